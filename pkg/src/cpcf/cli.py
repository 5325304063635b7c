"""Command line entry point: ``track``, ``bench``, ``synth`` and ``verify``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

import yaml

from .config import TrackerConfig, read_config_file, resolve_config
from .harness import (SequenceError, aggregate, emit_report, fmt, load_sequence, read_frame,
                      run_batch)
from .synth import SynthSpec, synth_sequence
from .tracker import BoundingBox, CPCFTracker
from .verify import format_table, run_checks

log = logging.getLogger("cpcf")

EFFECTIVE_CONFIG = "config.yaml"


@dataclass
class RunConfig:
    command: str
    tracker: TrackerConfig
    inputs: dict
    out_dir: Path | None
    seed: int
    threads: int
    overrides: dict


class CommandError(Exception):
    """Failure reported to the user as ``error: <stage>: <message>`` with exit 1."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _common(suppress: bool) -> argparse.ArgumentParser:
    """Global options; subcommand copies use SUPPRESS so they never mask a value
    given before the subcommand name."""
    def d(value):
        return argparse.SUPPRESS if suppress else value

    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, default=d(None), help="flat YAML file of tracker settings")
    p.add_argument("--seed", type=int, default=d(None), help="RNG seed (synth, verify); default 0")
    p.add_argument("--threads", type=int, default=d(os.cpu_count() or 1),
                   help="max parallel sequences (default: logical cores)")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))
    group = p.add_argument_group("tracker overrides (beat --config, which beats defaults)")
    for f in fields(TrackerConfig):
        kind = {"float": float, "int": int}.get(str(f.type), str)
        group.add_argument(_flag(f.name), dest=f"cfg_{f.name}", type=kind, default=d(None),
                           metavar=f.name.upper(), help=f"default {f.default}")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common(suppress=True)
    parser = argparse.ArgumentParser(prog="cpcf", description=__doc__, parents=[_common(False)])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", parents=[common], help="track one sequence")
    p.add_argument("--seq", type=Path, required=True)
    p.add_argument("--init", help="x,y,w,h of the first box (1-based); default: first ground-truth line")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("bench", parents=[common], help="one-pass evaluation over a dataset")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("synth", parents=[common], help="render synthetic sequences")
    p.add_argument("--spec", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("verify", parents=[common], help="run the built-in equivalence checks")
    p.add_argument("--perturb", action="store_true", help="corrupt the solver output to test the checks")
    return parser


def _run_config(args: argparse.Namespace) -> RunConfig:
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    file_values = read_config_file(args.config) if args.config else {}
    if args.threads < 1:
        raise ValueError(f"--threads must be positive, got {args.threads}")
    inputs = {k: str(getattr(args, k)) for k in ("seq", "dataset", "spec", "init")
              if getattr(args, k, None) is not None}
    return RunConfig(command=args.command, tracker=resolve_config(file_values, overrides),
                     inputs=inputs, out_dir=getattr(args, "out", None), seed=args.seed or 0,
                     threads=args.threads, overrides=overrides)


def write_effective_config(rc: RunConfig) -> Path:
    """Serialize the resolved settings; the timestamp is confined to the first line."""
    rc.out_dir.mkdir(parents=True, exist_ok=True)
    path = rc.out_dir / EFFECTIVE_CONFIG
    body = {"command": rc.command, "seed": rc.seed, "threads": rc.threads, "inputs": rc.inputs,
            "overrides": rc.overrides, "tracker": rc.tracker.to_dict()}
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S")
    path.write_text(f"# written {stamp}\n" + yaml.safe_dump(body, sort_keys=True), encoding="utf-8")
    return path


def _echo_overrides(rc: RunConfig) -> None:
    for k, v in sorted(rc.overrides.items()):
        print(f"override {k} = {v}")


def parse_init(text: str) -> BoundingBox:
    try:
        x, y, w, h = (float(v) for v in text.split(","))
    except ValueError:
        raise ValueError(f"--init expects x,y,w,h, got {text!r}") from None
    return BoundingBox(x - 1.0, y - 1.0, w, h)


def _box_line(b: BoundingBox) -> str:
    return ",".join(f"{v:.4f}" for v in (b.x + 1.0, b.y + 1.0, b.w, b.h))


def cmd_track(rc: RunConfig, init_text: str | None) -> int:
    try:
        seq = load_sequence(rc.inputs["seq"], require_groundtruth=init_text is None)
    except (SequenceError, OSError) as err:
        raise CommandError("load", str(err)) from err
    if init_text is not None:
        first = parse_init(init_text)
    elif seq.ground_truth and seq.ground_truth[0] is not None:
        first = seq.ground_truth[0]
    else:
        raise CommandError("load", f"{seq.name}: first frame has no box; pass --init")
    tracker = CPCFTracker(rc.tracker)
    boxes, diags = [], []
    try:
        for k, path in enumerate(seq.frame_paths):
            frame = read_frame(path)
            if k == 0:
                tracker.init(frame, first)
                boxes.append(first)
            else:
                boxes.append(tracker.update(frame))
            diags.append(tracker.diagnostics)
    except Exception as err:  # noqa: BLE001 - reported as a structured failure
        raise CommandError("track", f"frame {len(boxes) + 1}: {type(err).__name__}: {err}") from err
    write_effective_config(rc)
    (rc.out_dir / "bboxes.txt").write_text("\n".join(_box_line(b) for b in boxes) + "\n")
    with (rc.out_dir / "diagnostics.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "psrm", "h", "peak"])
        for k, d in enumerate(diags, start=1):
            w.writerow([k] + [fmt(d[key]) if key in d else "" for key in ("psrm", "h", "peak")])
    _echo_overrides(rc)
    print(f"{seq.name}: {len(boxes)} frames -> {rc.out_dir}")
    return 0


def find_sequences(dataset: Path) -> list[Path]:
    if not dataset.is_dir():
        return []
    return sorted(p for p in dataset.iterdir() if p.is_dir())


def cmd_bench(rc: RunConfig) -> int:
    seqs = find_sequences(Path(rc.inputs["dataset"]))
    if not seqs:
        raise CommandError("load", f"no sequences found in {rc.inputs['dataset']}")
    reports = run_batch(seqs, rc.tracker, threads=rc.threads)
    failed = [r for r in reports if r.error is not None]
    for r in failed:
        print(f"FAILED {r.name}: {r.error}", file=sys.stderr)
    if len(failed) == len(reports):
        raise CommandError("bench", f"all {len(reports)} sequences failed")
    write_effective_config(rc)
    emit_report(reports, rc.out_dir)
    agg = aggregate(reports)
    _echo_overrides(rc)
    print(f"sequences {agg.count}/{len(reports)}  precision@20 {agg.precision20:.3f}  "
          f"AUC {agg.auc:.3f}  FPS {agg.fps:.1f}")
    return 0


def read_synth_specs(path: Path) -> list[SynthSpec]:
    """A single spec mapping, or ``sequences:`` holding a list of them."""
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict) and "sequences" in data:
        if set(data) != {"sequences"}:
            raise ValueError(f"{path}: unexpected keys beside 'sequences'")
        items = data["sequences"]
    else:
        items = [data]
    if not items or not all(isinstance(d, dict) for d in items):
        raise ValueError(f"{path}: expected spec mappings")
    return [SynthSpec.from_dict(d) for d in items]


def cmd_synth(rc: RunConfig, explicit_seed: bool) -> int:
    try:
        specs = read_synth_specs(Path(rc.inputs["spec"]))
    except (OSError, ValueError, TypeError) as err:
        raise CommandError("load", str(err)) from err
    for i, spec in enumerate(specs):
        if explicit_seed:
            spec = SynthSpec.from_dict({**spec.to_dict(), "seed": rc.seed + i})
        seq = synth_sequence(spec, rc.out_dir)
        print(f"{spec.name}: {len(seq)} frames")
    return 0


def cmd_verify(rc: RunConfig, perturb: bool) -> int:
    results = run_checks(perturb=perturb, seed=rc.seed)
    print(format_table(results))
    return 0 if all(r.passed for r in results) else 1


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = _run_config(args)
        if rc.command == "track":
            return cmd_track(rc, args.init)
        if rc.command == "bench":
            return cmd_bench(rc)
        if rc.command == "synth":
            return cmd_synth(rc, args.seed is not None)
        return cmd_verify(rc, args.perturb)
    except CommandError as err:
        print(json.dumps({"error": err.stage, "message": str(err)}), file=sys.stderr)
        return 1
    except (ValueError, OSError) as err:
        print(json.dumps({"error": "config", "message": str(err)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
