"""Ablation on the synthetic swap/velocity suite: default vs gamma = 0 vs fixed h = 1."""

import argparse
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np

from cpcf.config import TrackerConfig
from cpcf.harness import emit_report, run_batch
from cpcf.synth import ablation_suite, synth_sequence


def variants(base: TrackerConfig) -> dict[str, TrackerConfig]:
    return {
        "default": base,
        "gamma0": replace(base, gamma=0.0),
        "fixed_h1": replace(base, h_min=1.0, h_max=1.0),
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=None, help="write per-variant reports here")
    ap.add_argument("--sequences", type=int, default=10)
    ap.add_argument("--frames", type=int, default=100)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        specs = ablation_suite(args.sequences, args.frames, args.seed)
        dirs = [Path(tmp) / s.name for s in specs]
        for s in specs:
            synth_sequence(s, tmp)
        print(f"{'variant':10s} {'mean CLE':>9s} {'P@20':>6s} {'AUC':>6s}")
        for name, cfg in variants(TrackerConfig()).items():
            reports = run_batch(dirs, cfg, threads=args.threads)
            ok = [r for r in reports if r.error is None]
            cle = float(np.nanmean(np.concatenate([r.cle_per_frame for r in ok])))
            p20 = float(np.mean([r.precision20 for r in ok]))
            auc = float(np.mean([r.auc for r in ok]))
            print(f"{name:10s} {cle:9.3f} {p20:6.3f} {auc:6.3f}")
            if args.out:
                emit_report(reports, args.out / name)


if __name__ == "__main__":
    main()
