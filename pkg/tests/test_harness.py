import math

import cv2
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpcf.harness import (PRECISION_THRESHOLDS, SUCCESS_THRESHOLDS, MetricsReport, SequenceError,
                          aggregate, center_error, emit_report, iou, load_sequence, parse_box_line,
                          precision_curve, read_curves, run_batch, run_ope, success_curve)
from cpcf.tracker import BoundingBox


def write_fixture(root, n_frames, gt_lines):
    (root / "img").mkdir(parents=True)
    for k in range(n_frames):
        cv2.imwrite(str(root / "img" / f"{k + 1:04d}.png"), np.full((20, 20, 3), 40 * k, np.uint8))
    (root / "groundtruth_rect.txt").write_text("\n".join(gt_lines) + "\n")
    return root


class OracleStub:
    name = "oracle"

    def __init__(self, seq):
        self.boxes = iter(seq.ground_truth[1:])

    def init(self, frame, bbox):
        pass

    def update(self, frame):
        return next(self.boxes)


class StaticStub:
    name = "static"

    def __init__(self, seq):
        self.box = None

    def init(self, frame, bbox):
        self.box = bbox

    def update(self, frame):
        return self.box


boxes = st.builds(BoundingBox, st.floats(-50, 50), st.floats(-50, 50), st.floats(0.5, 60), st.floats(0.5, 60))


# -- loading -----------------------------------------------------------------------

def test_minimal_fixture(tmp_path):
    seq = load_sequence(write_fixture(tmp_path / "s", 2, ["1,1,5,5", "2,2,5,5"]))
    assert len(seq) == 2 and seq.name == "s"
    assert seq.ground_truth[1] == BoundingBox(1, 1, 5, 5)


def test_count_mismatch_names_both_counts(tmp_path):
    with pytest.raises(SequenceError, match=r"3 frames but 2 annotations"):
        load_sequence(write_fixture(tmp_path / "s", 3, ["1,1,5,5", "2,2,5,5"]))


def test_missing_groundtruth(tmp_path):
    root = write_fixture(tmp_path / "s", 2, ["1,1,5,5", "2,2,5,5"])
    (root / "groundtruth_rect.txt").unlink()
    with pytest.raises(SequenceError, match="missing ground truth"):
        load_sequence(root)
    assert load_sequence(root, require_groundtruth=False).ground_truth == []


def test_frames_sort_numerically(tmp_path):
    root = tmp_path / "s"
    (root / "img").mkdir(parents=True)
    for n in (10, 2, 1):
        cv2.imwrite(str(root / "img" / f"{n}.png"), np.zeros((4, 4), np.uint8))
    (root / "groundtruth_rect.txt").write_text("1,1,2,2\n" * 3)
    assert [p.stem for p in load_sequence(root).frame_paths] == ["1", "2", "10"]


def test_parse_one_based_line():
    assert parse_box_line("128.0,82.0,40.0,56.0", 1) == BoundingBox(127.0, 81.0, 40.0, 56.0)
    assert parse_box_line("128\t82\t40\t56", 1) == BoundingBox(127.0, 81.0, 40.0, 56.0)
    assert parse_box_line("128 82 40 56", 1) == BoundingBox(127.0, 81.0, 40.0, 56.0)
    assert parse_box_line("NaN,NaN,NaN,NaN", 1) is None


def test_parse_error_reports_line_number(tmp_path):
    with pytest.raises(SequenceError, match="line 2"):
        load_sequence(write_fixture(tmp_path / "s", 2, ["1,1,5,5", "a,b,c"]))


# -- metrics -------------------------------------------------------------------------

def test_center_error_examples():
    a = BoundingBox(0, 0, 2, 2)
    assert center_error(a, a) == 0
    assert center_error(BoundingBox(-1, -1, 2, 2), BoundingBox(2, 3, 2, 2)) == 5.0


@settings(max_examples=50, deadline=None)
@given(boxes, boxes)
def test_center_error_formula(a, b):
    direct = math.sqrt((a.x + a.w / 2 - b.x - b.w / 2) ** 2 + (a.y + a.h / 2 - b.y - b.h / 2) ** 2)
    assert center_error(a, b) == pytest.approx(direct, abs=1e-9)


def test_iou_examples():
    a = BoundingBox(0, 0, 1, 1)
    assert iou(a, a) == 1.0
    assert iou(a, BoundingBox(5, 5, 1, 1)) == 0.0
    assert iou(a, BoundingBox(0.5, 0, 1, 1)) == pytest.approx(1 / 3)


@settings(max_examples=100, deadline=None)
@given(boxes, boxes)
def test_iou_bounded_and_symmetric(a, b):
    v = iou(a, b)
    assert 0.0 <= v <= 1.0 + 1e-12
    assert v == pytest.approx(iou(b, a), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=1, max_size=40), st.lists(st.floats(0, 1), min_size=1, max_size=40))
def test_curves_are_monotone(cle, ov):
    p = precision_curve(np.array(cle))
    s = success_curve(np.array(ov))
    assert len(p) == 51 and len(s) == 101
    assert np.all(np.diff(p) >= 0) and np.all(np.diff(s) <= 0)


def test_threshold_grids():
    assert PRECISION_THRESHOLDS[0] == 0 and PRECISION_THRESHOLDS[-1] == 50
    assert SUCCESS_THRESHOLDS[0] == 0 and SUCCESS_THRESHOLDS[-1] == 1 and SUCCESS_THRESHOLDS[37] == 0.37


def test_auc_is_mean_of_success():
    gt = [BoundingBox(0, 0, 10, 10)] * 5
    pred = [BoundingBox(float(k), 0, 10, 10) for k in range(5)]
    r = MetricsReport.from_boxes("x", pred, gt)
    assert abs(r.auc - r.success_curve.mean()) < 1e-12


def test_nan_frames_are_skipped():
    gt = [BoundingBox(0, 0, 10, 10), None, BoundingBox(0, 0, 10, 10)]
    pred = [BoundingBox(0, 0, 10, 10), BoundingBox(50, 50, 10, 10), BoundingBox(0, 0, 10, 10)]
    r = MetricsReport.from_boxes("x", pred, gt)
    assert r.precision20 == 1.0 and r.auc == 1.0
    assert np.isnan(r.cle_per_frame[1])


# -- OPE ------------------------------------------------------------------------------

def test_oracle_stub_scores_perfectly(small_dataset):
    for name in ("alpha", "beta"):
        r = run_ope(load_sequence(small_dataset / name), tracker_factory=OracleStub)
        assert np.all(r.precision_curve == 1.0)
        assert r.auc == 1.0


def test_static_stub_threshold_zero(small_dataset):
    seq = load_sequence(small_dataset / "alpha")
    r = run_ope(seq, tracker_factory=StaticStub)
    frac = np.mean([iou(seq.ground_truth[0], g) > 0 for g in seq.ground_truth])
    assert r.success_curve[0] == pytest.approx(frac)
    assert r.fps > 0


def test_cpcf_run_logs_bounded_h(small_dataset):
    r = run_ope(load_sequence(small_dataset / "alpha"))
    assert len(r.diagnostics) == 10
    assert all(0.6 <= d["h"] <= 1.2 for d in r.diagnostics)
    assert r.precision20 == 1.0


def test_batch_is_order_independent(small_dataset):
    dirs = [small_dataset / "alpha", small_dataset / "beta"]
    a = run_batch(dirs)
    b = run_batch(dirs[::-1], threads=2)
    assert [r.name for r in a] == [r.name for r in b] == ["alpha", "beta"]
    ga, gb = aggregate(a), aggregate(b)
    assert ga.auc == gb.auc and np.array_equal(ga.precision_curve, gb.precision_curve)


def test_batch_records_failures(small_dataset, tmp_path):
    broken = tmp_path / "broken"
    (broken / "img").mkdir(parents=True)
    reports = run_batch([small_dataset / "alpha", broken])
    assert [r.error is None for r in reports] == [True, False]
    assert "img" in reports[1].error or "frames" in reports[1].error


# -- reports ---------------------------------------------------------------------------

def _report(name, auc):
    succ = np.full(101, auc)
    return MetricsReport(name=name, cle_per_frame=np.zeros(3), iou_per_frame=np.ones(3),
                         precision_curve=np.ones(51), success_curve=succ, auc=auc, fps=10.0)


def test_aggregate_means():
    one = aggregate([_report("a", 0.4)])
    assert one.auc == 0.4 and one.precision20 == 1.0
    assert aggregate([_report("a", 0.4), _report("b", 0.6)]).auc == pytest.approx(0.5)


def test_emit_report_files(tmp_path):
    paths = emit_report([_report("b", 0.6), _report("a", 0.4)], tmp_path)
    rows = paths["summary"].read_text().splitlines()
    assert rows[0] == "name,precision20,auc,mean_cle,frames,attributes,status"
    assert [r.split(",")[0] for r in rows[1:]] == ["a", "b", "aggregate"]
    assert rows[-1].split(",")[2] == "0.5"
    curves = read_curves(tmp_path / "a.curves.csv")
    assert len(curves["precision"]) == 51 and len(curves["success"]) == 101
    assert (tmp_path / "aggregate.curves.csv").is_file()
    assert "fps" in paths["timing"].read_text().splitlines()[0]


def test_emit_report_needs_reports(tmp_path):
    with pytest.raises(ValueError):
        emit_report([], tmp_path)
