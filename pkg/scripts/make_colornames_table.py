"""Generate the RGB -> 11 color-name probability table shipped with the package.

Layout: 32768 rows x 11 little-endian float32, row index
``r5 + 32 * g5 + 1024 * b5`` with each channel quantized to 5 bits
(``value_8bit >> 3``).  Column order: black, blue, brown, grey, green,
orange, pink, purple, red, white, yellow.

Each row is a softmax over negative squared distances (in CIE Lab) between
the bin-center color and one prototype per name.  A learned table with the
same layout can be dropped in place of the generated one.

    python scripts/make_colornames_table.py [OUT]
"""

import argparse
from pathlib import Path

import numpy as np
from skimage.color import rgb2lab

PROTOTYPES = {
    "black": (0.0, 0.0, 0.0),
    "blue": (0.1, 0.2, 0.85),
    "brown": (0.45, 0.27, 0.1),
    "grey": (0.5, 0.5, 0.5),
    "green": (0.15, 0.6, 0.15),
    "orange": (1.0, 0.55, 0.0),
    "pink": (1.0, 0.65, 0.78),
    "purple": (0.5, 0.15, 0.6),
    "red": (0.85, 0.1, 0.1),
    "white": (1.0, 1.0, 1.0),
    "yellow": (1.0, 0.95, 0.1),
}
TEMPERATURE = 20.0  # Lab units


def table_rows(q5: np.ndarray) -> np.ndarray:
    """Probabilities for 5-bit (r, g, b) bins, one row per input triple."""
    rgb = (np.asarray(q5, dtype=float) * 8 + 4) / 255.0
    lab = rgb2lab(rgb[None])[0]
    protos = rgb2lab(np.array(list(PROTOTYPES.values()))[None])[0]
    d2 = ((lab[:, None, :] - protos[None, :, :]) ** 2).sum(-1)
    logits = -d2 / (2 * TEMPERATURE**2)
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    return p / p.sum(axis=1, keepdims=True)


def build_table() -> np.ndarray:
    b, g, r = np.meshgrid(np.arange(32), np.arange(32), np.arange(32), indexing="ij")
    q5 = np.stack([r.ravel(), g.ravel(), b.ravel()], axis=-1)  # row = r + 32 g + 1024 b
    return table_rows(q5).astype("<f4")


def main() -> None:
    ap = argparse.ArgumentParser(description="Write the color-names lookup table.")
    ap.add_argument("out", nargs="?", type=Path,
                    default=Path(__file__).resolve().parents[1] / "src" / "cpcf" / "data" / "colornames.f32")
    out = ap.parse_args().out
    table = build_table()
    out.write_bytes(table.tobytes())
    print(f"wrote {table.shape} table to {out}")


if __name__ == "__main__":
    main()
