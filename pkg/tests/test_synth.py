import hashlib

import numpy as np
import pytest

from cpcf.harness import load_sequence
from cpcf.synth import (SynthSpec, ablation_suite, boxes_for, constant_velocity_spec, render,
                        synth_sequence)


def test_static_spec_has_constant_boxes():
    spec = SynthSpec(n_frames=5, motion=(0, 0))
    assert len(set(boxes_for(spec))) == 1


def test_constant_motion_is_arithmetic():
    xs = np.array([b[0] for b in boxes_for(constant_velocity_spec())])
    assert len(xs) == 100
    np.testing.assert_allclose(np.diff(xs), 2.0)


def test_velocity_change_and_scale_ramp():
    spec = SynthSpec(n_frames=6, motion=(1, 0), velocity_changes={3: (0, 2)}, scale_ramp=1.02)
    b = boxes_for(spec)
    cx = [x + w / 2 for x, _, w, _ in b]
    cy = [y + h / 2 for _, y, _, h in b]
    np.testing.assert_allclose(np.diff(cx), [1, 1, 1, 0, 0])
    np.testing.assert_allclose(np.diff(cy), [0, 0, 0, 2, 2])
    assert b[5][2] == pytest.approx(40 * 1.02**5)


def test_leaving_frame_is_an_error():
    with pytest.raises(ValueError, match="leaves the frame"):
        boxes_for(SynthSpec(n_frames=200, motion=(3, 0)))


def _hashes(root):
    return [hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(root.rglob("*")) if p.is_file()]


def test_fixed_seed_gives_identical_files(tmp_path):
    spec = SynthSpec(name="s", n_frames=4, noise_sigma=0.05, appearance_swap_frame=2, seed=11)
    synth_sequence(spec, tmp_path / "a")
    synth_sequence(spec, tmp_path / "b")
    assert _hashes(tmp_path / "a" / "s") == _hashes(tmp_path / "b" / "s")
    other = SynthSpec(name="s", n_frames=4, noise_sigma=0.05, appearance_swap_frame=2, seed=12)
    synth_sequence(other, tmp_path / "c")
    assert _hashes(tmp_path / "a" / "s") != _hashes(tmp_path / "c" / "s")


def test_written_sequence_roundtrips(tmp_path):
    spec = SynthSpec(name="rt", n_frames=3, target=(10.5, 20.25, 30, 40), attributes=("a", "b"))
    seq = synth_sequence(spec, tmp_path)
    assert seq.attributes == ["a", "b"]
    for got, want in zip(seq.ground_truth, boxes_for(spec)):
        assert got.as_tuple() == pytest.approx(want, abs=1e-4)
    assert load_sequence(tmp_path / "rt").name == "rt"


def test_target_differs_from_background():
    frames, boxes = render(SynthSpec(n_frames=1, color=False, seed=4))
    x, y, w, h = (int(v) for v in boxes[0])
    inside = frames[0][y + 2:y + h - 2, x + 2:x + w - 2].astype(float)
    assert inside.std() > 20  # sharp texture
    assert frames[0].ndim == 2


def test_appearance_swap_changes_target_only():
    spec = SynthSpec(n_frames=3, motion=(0, 0), appearance_swap_frame=2, seed=5)
    frames, boxes = render(spec)
    x, y, w, h = (int(v) for v in boxes[0])
    assert np.array_equal(frames[0], frames[1])
    diff = np.abs(frames[2].astype(int) - frames[1].astype(int)).sum(axis=2)
    assert diff[y + 1:y + h - 1, x + 1:x + w - 1].mean() > 10
    outside = diff.copy()
    outside[y - 1:y + h + 1, x - 1:x + w + 1] = 0
    assert outside.max() == 0


def test_spec_dict_roundtrip_and_validation():
    spec = SynthSpec(velocity_changes={4: (1.0, 2.0)}, attributes=("x",))
    assert SynthSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ValueError, match="unknown synth keys"):
        SynthSpec.from_dict({"nam": "x"})


def test_ablation_suite_is_fixed():
    a, b = ablation_suite(), ablation_suite()
    assert a == b and len(a) == 10
    for s in a:
        assert s.appearance_swap_frame is not None and len(s.velocity_changes) == 2
        boxes_for(s)
