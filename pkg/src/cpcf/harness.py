"""One-pass evaluation over image sequences and report emission.

Sequence layout on disk::

    <seq>/img/0001.png ...          (jpg or png, numbered)
    <seq>/groundtruth_rect.txt      one "x,y,w,h" line per frame, 1-based

Boxes are converted to 0-based pixel coordinates on load.
"""

from __future__ import annotations

import csv
import logging
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import cv2
import numpy as np

from .config import TrackerConfig
from .tracker import BoundingBox, CPCFTracker

log = logging.getLogger(__name__)

PRECISION_THRESHOLDS = np.arange(51, dtype=float)
SUCCESS_THRESHOLDS = np.round(np.linspace(0.0, 1.0, 101), 2)
PRECISION_AT = 20
IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png")
GT_NAME = "groundtruth_rect.txt"


class SequenceError(ValueError):
    pass


@dataclass
class Sequence:
    name: str
    frame_paths: list[Path]
    ground_truth: list[BoundingBox | None]  # None marks an unannotated (NaN) frame
    attributes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.ground_truth and len(self.ground_truth) != len(self.frame_paths):
            raise SequenceError(f"{self.name}: {len(self.frame_paths)} frames but "
                                f"{len(self.ground_truth)} annotations")
        if self.ground_truth and self.ground_truth[0] is None:
            raise SequenceError(f"{self.name}: first frame has no annotation")

    def __len__(self) -> int:
        return len(self.frame_paths)


class Tracker(Protocol):
    name: str

    def init(self, frame: np.ndarray, bbox: BoundingBox) -> None: ...

    def update(self, frame: np.ndarray) -> BoundingBox: ...


def read_frame(path: Path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise SequenceError(f"cannot decode image {path}")
    if img.ndim == 3:
        img = cv2.cvtColor(img[..., :3], cv2.COLOR_BGR2RGB)
    return img.astype(np.float64) / (65535.0 if img.dtype == np.uint16 else 255.0)


def _frame_number(p: Path) -> int:
    digits = re.findall(r"\d+", p.stem)
    return int(digits[-1]) if digits else -1


def parse_box_line(line: str, lineno: int) -> BoundingBox | None:
    parts = [t for t in re.split(r"[,\t ]+", line.strip()) if t]
    if len(parts) != 4:
        raise SequenceError(f"line {lineno}: expected 4 values, got {line.strip()!r}")
    try:
        x, y, w, h = (float(t) for t in parts)
    except ValueError:
        raise SequenceError(f"line {lineno}: unparseable box {line.strip()!r}") from None
    if any(math.isnan(v) for v in (x, y, w, h)):
        return None
    try:
        return BoundingBox(x - 1.0, y - 1.0, w, h)
    except ValueError:
        return None  # zero-size boxes mark absent targets in some benchmarks


def read_boxes(path: Path) -> list[BoundingBox | None]:
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    return [parse_box_line(ln, i + 1) for i, ln in enumerate(lines)]


def load_sequence(dir_path, require_groundtruth: bool = True) -> Sequence:
    root = Path(dir_path)
    img_dir = root / "img"
    if not img_dir.is_dir():
        raise SequenceError(f"{root}: missing img/ directory")
    frames = sorted((p for p in img_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES),
                    key=lambda p: (_frame_number(p), p.name))
    if not frames:
        raise SequenceError(f"{root}: no frames in img/")
    gt_path = root / GT_NAME
    if not gt_path.is_file():
        alt = sorted(root.glob("groundtruth*.txt"))
        gt_path = alt[0] if alt else gt_path
    if gt_path.is_file():
        boxes = read_boxes(gt_path)
        if len(boxes) != len(frames):
            raise SequenceError(f"{root.name}: {len(frames)} frames but {len(boxes)} annotations")
    elif require_groundtruth:
        raise SequenceError(f"{root}: missing ground truth {GT_NAME}")
    else:
        boxes = []
    attrs_path = root / "attributes.txt"
    attrs = attrs_path.read_text().split() if attrs_path.is_file() else []
    return Sequence(name=root.name, frame_paths=frames, ground_truth=boxes, attributes=attrs)


def center_error(a: BoundingBox, b: BoundingBox) -> float:
    (ar, ac), (br, bc) = a.center, b.center
    return math.hypot(ar - br, ac - bc)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.w * a.h + b.w * b.h - inter)


def precision_curve(cle: np.ndarray) -> np.ndarray:
    """Fraction of frames with center error within each 0..50 px threshold."""
    cle = np.asarray(cle, dtype=float)
    return (cle[None, :] <= PRECISION_THRESHOLDS[:, None]).mean(axis=1)


def success_curve(overlap: np.ndarray) -> np.ndarray:
    """Fraction of frames whose overlap reaches each threshold in 0..1.

    A frame with no overlap never counts, so the value at 0 is the fraction
    of frames that overlap at all and a perfect run scores 1 everywhere.
    """
    o = np.asarray(overlap, dtype=float)
    hit = (o[None, :] >= SUCCESS_THRESHOLDS[:, None]) & (o[None, :] > 0)
    return hit.mean(axis=1)


@dataclass
class MetricsReport:
    name: str
    cle_per_frame: np.ndarray
    iou_per_frame: np.ndarray
    precision_curve: np.ndarray
    success_curve: np.ndarray
    auc: float
    fps: float
    boxes: list[BoundingBox] = field(default_factory=list)
    diagnostics: list[dict] = field(default_factory=list)
    attributes: list[str] = field(default_factory=list)
    error: str | None = None

    @property
    def precision20(self) -> float:
        return float(self.precision_curve[PRECISION_AT])

    @property
    def mean_cle(self) -> float:
        v = self.cle_per_frame[np.isfinite(self.cle_per_frame)]
        return float(v.mean()) if v.size else float("nan")

    @classmethod
    def from_boxes(cls, name: str, boxes: list[BoundingBox], gt: list[BoundingBox | None],
                   fps: float = float("nan"), **extra) -> "MetricsReport":
        cle = np.array([center_error(b, g) if g is not None else np.nan for b, g in zip(boxes, gt)])
        ov = np.array([iou(b, g) if g is not None else np.nan for b, g in zip(boxes, gt)])
        valid = np.isfinite(cle)
        prec = precision_curve(cle[valid])
        succ = success_curve(ov[valid])
        return cls(name=name, cle_per_frame=cle, iou_per_frame=ov, precision_curve=prec,
                   success_curve=succ, auc=float(succ.mean()), fps=fps, boxes=list(boxes), **extra)


TrackerFactory = Callable[[Sequence], Tracker]


def run_ope(seq: Sequence, cfg: TrackerConfig = TrackerConfig(),
            tracker_factory: TrackerFactory | None = None) -> MetricsReport:
    """Initialize on the first annotated box and track to the end without resets.

    Frame decoding happens outside the timed region; FPS counts the tracker
    calls only.
    """
    if not seq.ground_truth:
        raise SequenceError(f"{seq.name}: OPE needs ground truth")
    tracker = tracker_factory(seq) if tracker_factory else CPCFTracker(cfg)
    boxes: list[BoundingBox] = []
    diags: list[dict] = []
    elapsed = 0.0
    for k, path in enumerate(seq.frame_paths):
        frame = read_frame(path)
        t0 = time.perf_counter()
        if k == 0:
            tracker.init(frame, seq.ground_truth[0])
            box = seq.ground_truth[0]
        else:
            box = tracker.update(frame)
        elapsed += time.perf_counter() - t0
        boxes.append(box)
        diags.append(dict(getattr(tracker, "diagnostics", {}) or {}))
    fps = len(seq) / elapsed if elapsed > 0 else float("inf")
    return MetricsReport.from_boxes(seq.name, boxes, seq.ground_truth, fps=fps,
                                    diagnostics=diags, attributes=list(seq.attributes))


def _ope_worker(args) -> MetricsReport:
    seq_dir, cfg = args
    seq = load_sequence(seq_dir)
    return run_ope(seq, cfg)


def _failed(name: str, err: Exception) -> MetricsReport:
    nan51, nan101 = np.full(51, np.nan), np.full(101, np.nan)
    return MetricsReport(name=name, cle_per_frame=np.array([]), iou_per_frame=np.array([]),
                         precision_curve=nan51, success_curve=nan101, auc=float("nan"),
                         fps=float("nan"), error=f"{type(err).__name__}: {err}")


def run_batch(seq_dirs: list[Path], cfg: TrackerConfig = TrackerConfig(),
              threads: int = 1) -> list[MetricsReport]:
    """OPE over many sequence directories; failures are recorded, not raised.

    Results come back sorted by sequence name regardless of completion order.
    """
    seq_dirs = [Path(p) for p in seq_dirs]
    reports: list[MetricsReport] = []
    if threads > 1 and len(seq_dirs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = {p: pool.submit(_ope_worker, (p, cfg)) for p in seq_dirs}
            for p, fut in futures.items():
                try:
                    reports.append(fut.result())
                except Exception as err:  # noqa: BLE001 - one bad sequence must not sink the batch
                    log.error("sequence %s failed: %s", p.name, err)
                    reports.append(_failed(p.name, err))
    else:
        for p in seq_dirs:
            try:
                reports.append(_ope_worker((p, cfg)))
            except Exception as err:  # noqa: BLE001
                log.error("sequence %s failed: %s", p.name, err)
                reports.append(_failed(p.name, err))
    return sorted(reports, key=lambda r: r.name)


@dataclass
class Aggregate:
    precision_curve: np.ndarray
    success_curve: np.ndarray
    auc: float
    precision20: float
    mean_cle: float
    fps: float
    count: int


def aggregate(reports: list[MetricsReport]) -> Aggregate:
    """Unweighted mean over successful sequences, reduced in name order."""
    ok = sorted((r for r in reports if r.error is None), key=lambda r: r.name)
    if not ok:
        raise ValueError("no successful reports to aggregate")
    prec = np.mean([r.precision_curve for r in ok], axis=0)
    succ = np.mean([r.success_curve for r in ok], axis=0)
    return Aggregate(precision_curve=prec, success_curve=succ, auc=float(np.mean([r.auc for r in ok])),
                     precision20=float(prec[PRECISION_AT]),
                     mean_cle=float(np.mean([r.mean_cle for r in ok])),
                     fps=float(np.mean([r.fps for r in ok])), count=len(ok))


def fmt(v: float) -> str:
    return f"{v:.6g}"


def _write_curves(path: Path, prec: np.ndarray, succ: np.ndarray) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["curve", "threshold", "value"])
        for t, v in zip(PRECISION_THRESHOLDS, prec):
            w.writerow(["precision", fmt(t), fmt(v)])
        for t, v in zip(SUCCESS_THRESHOLDS, succ):
            w.writerow(["success", fmt(t), fmt(v)])


def emit_report(reports: list[MetricsReport], out_dir) -> dict[str, Path]:
    """Write ``summary.csv``, per-sequence curve files and ``timing.csv``.

    Everything except ``timing.csv`` is a deterministic function of the
    tracker output, so repeated runs are byte-identical.
    """
    if not reports:
        raise ValueError("need at least one report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = sorted(reports, key=lambda r: r.name)
    agg = aggregate(reports)
    paths = {"summary": out / "summary.csv", "timing": out / "timing.csv",
             "aggregate_curves": out / "aggregate.curves.csv"}
    with paths["summary"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "precision20", "auc", "mean_cle", "frames", "attributes", "status"])
        for r in reports:
            if r.error is None:
                w.writerow([r.name, fmt(r.precision20), fmt(r.auc), fmt(r.mean_cle),
                            len(r.cle_per_frame), " ".join(r.attributes), "ok"])
            else:
                w.writerow([r.name, "", "", "", 0, " ".join(r.attributes), r.error])
        w.writerow(["aggregate", fmt(agg.precision20), fmt(agg.auc), fmt(agg.mean_cle),
                    sum(len(r.cle_per_frame) for r in reports), "", f"{agg.count} ok"])
    with paths["timing"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "fps"])
        for r in reports:
            w.writerow([r.name, fmt(r.fps)])
        w.writerow(["aggregate", fmt(agg.fps)])
    for r in reports:
        if r.error is None:
            p = out / f"{r.name}.curves.csv"
            _write_curves(p, r.precision_curve, r.success_curve)
            paths[f"curves:{r.name}"] = p
    _write_curves(paths["aggregate_curves"], agg.precision_curve, agg.success_curve)
    return paths


def read_curves(path) -> dict[str, list[tuple[float, float]]]:
    curves: dict[str, list[tuple[float, float]]] = {"precision": [], "success": []}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            curves[row["curve"]].append((float(row["threshold"]), float(row["value"])))
    return curves
