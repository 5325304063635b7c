"""Regenerate tests/data/golden_features_40.npy from the current pipeline.

Only rerun after an intentional feature change; the test suite cross-checks
the stored tensor against per-cell hand computations.
"""

import argparse
from pathlib import Path

import numpy as np

from cpcf.features import build_sample


def golden_patch() -> np.ndarray:
    """40x40 RGB test card from closed-form ramps and sinusoids.

    No gradient lands exactly on an orientation bin boundary, so the hand
    computation in the tests cannot disagree on tie-breaking.
    """
    ii, jj = np.mgrid[0:40, 0:40].astype(float)
    r = 0.5 + 0.4 * np.sin(ii / 5.0) * np.cos(jj / 7.0)
    g = (ii + 2.0 * jj) / 120.0
    b = 0.5 + 0.35 * np.sin((0.9 * ii + 1.3 * jj) / 4.0)
    return np.clip(np.stack([r, g, b], axis=-1), 0.0, 1.0)


def golden_features() -> np.ndarray:
    return build_sample(golden_patch(), (20.0, 20.0), (40.0, 40.0), (40, 40), cell_size=4)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path,
                    default=Path(__file__).resolve().parents[1] / "tests/data/golden_features_40.npy")
    args = ap.parse_args()
    args.out.parent.mkdir(parents=True, exist_ok=True)
    feats = golden_features()
    np.save(args.out, feats)
    print(f"wrote {args.out} {feats.shape}")


if __name__ == "__main__":
    main()
