"""Synthetic sequences with exact ground truth.

A textured rectangle moves over a smoother textured background.  Motion is
a per-frame velocity that can change at given frames, the box can grow or
shrink geometrically, the target texture can be swapped for a new one at a
given frame, and Gaussian pixel noise can be added.  Everything is driven by
one seed, and frames are written as lossless PNG so repeated runs produce
identical files.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import cv2
import numpy as np
from scipy.ndimage import gaussian_filter

from .harness import GT_NAME, Sequence, load_sequence


@dataclass(frozen=True)
class SynthSpec:
    name: str = "synth"
    frame_size: tuple[int, int] = (240, 240)  # (H, W)
    n_frames: int = 100
    target: tuple[float, float, float, float] = (60.0, 100.0, 40.0, 40.0)  # x, y, w, h (0-based)
    motion: tuple[float, float] = (2.0, 0.0)  # dx, dy pixels per frame
    velocity_changes: dict[int, tuple[float, float]] = field(default_factory=dict)
    scale_ramp: float = 1.0  # per-frame size factor
    noise_sigma: float = 0.0
    appearance_swap_frame: int | None = None  # 0-based frame index
    pattern: str = "blobs"  # blobs | checker
    color: bool = True
    seed: int = 0
    attributes: tuple[str, ...] = ()

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown synth keys: {sorted(unknown)}")
        for key in ("frame_size", "target", "motion", "attributes"):
            if key in d:
                d[key] = tuple(d[key])
        if "velocity_changes" in d:
            d["velocity_changes"] = {int(k): tuple(v) for k, v in d["velocity_changes"].items()}
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["velocity_changes"] = {k: list(v) for k, v in self.velocity_changes.items()}
        return d


def boxes_for(spec: SynthSpec) -> list[tuple[float, float, float, float]]:
    """Ground-truth (x, y, w, h) per frame, raising if the target leaves the frame."""
    x, y, w, h = spec.target
    cx, cy = x + w / 2.0, y + h / 2.0
    vx, vy = spec.motion
    out = []
    for k in range(spec.n_frames):
        if k in spec.velocity_changes:
            vx, vy = spec.velocity_changes[k]
        s = spec.scale_ramp**k
        bw, bh = w * s, h * s
        box = (cx - bw / 2.0, cy - bh / 2.0, bw, bh)
        if box[0] < 0 or box[1] < 0 or box[0] + bw > spec.frame_size[1] or box[1] + bh > spec.frame_size[0]:
            raise ValueError(f"{spec.name}: target leaves the frame at frame {k}")
        out.append(box)
        cx, cy = cx + vx, cy + vy
    return out


def _normalize(t: np.ndarray, lo: float, hi: float) -> np.ndarray:
    t = t - t.min(axis=(0, 1), keepdims=True)
    t = t / np.maximum(t.max(axis=(0, 1), keepdims=True), 1e-12)
    return lo + (hi - lo) * t


def texture(rng: np.random.Generator, shape: tuple[int, int], pattern: str, color: bool,
            smooth: float, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    c = 3 if color else 1
    if pattern == "blobs":
        t = np.stack([gaussian_filter(rng.standard_normal(shape), smooth, mode="wrap")
                      for _ in range(c)], axis=-1)
    elif pattern == "checker":
        cell = max(2, int(smooth))
        ii, jj = np.indices(shape)
        board = ((ii // cell + jj // cell) % 2).astype(float)
        tint = rng.uniform(0.2, 1.0, size=(2, c))
        t = board[..., None] * tint[0] + (1 - board[..., None]) * (1 - tint[1])
        t += 0.15 * np.stack([gaussian_filter(rng.standard_normal(shape), 1.0) for _ in range(c)], -1)
    else:
        raise ValueError(f"unknown pattern {pattern!r}")
    t = _normalize(t, lo, hi)
    return t if color else t[..., 0]


def _paste(frame: np.ndarray, tex: np.ndarray, box) -> None:
    """Draw ``tex`` stretched over ``box``; pixels whose centers fall inside are covered."""
    x, y, w, h = box
    hgt, wid = frame.shape[:2]
    r0, r1 = max(0, int(np.ceil(y - 0.5))), min(hgt, int(np.ceil(y + h - 0.5)))
    c0, c1 = max(0, int(np.ceil(x - 0.5))), min(wid, int(np.ceil(x + w - 0.5)))
    th, tw = tex.shape[:2]
    v = ((np.arange(r0, r1) + 0.5 - y) / h * th - 0.5).astype(np.float32)
    u = ((np.arange(c0, c1) + 0.5 - x) / w * tw - 0.5).astype(np.float32)
    map_x = np.broadcast_to(u[None, :], (r1 - r0, c1 - c0)).copy()
    map_y = np.broadcast_to(v[:, None], (r1 - r0, c1 - c0)).copy()
    patch = cv2.remap(tex.astype(np.float32), map_x, map_y, cv2.INTER_LINEAR,
                      borderMode=cv2.BORDER_REPLICATE)
    frame[r0:r1, c0:c1] = patch


def render(spec: SynthSpec) -> tuple[list[np.ndarray], list[tuple[float, float, float, float]]]:
    """Frames as uint8 arrays (RGB or gray) and their ground-truth boxes."""
    boxes = boxes_for(spec)
    rng = np.random.default_rng(spec.seed)
    hgt, wid = spec.frame_size
    background = texture(rng, (hgt, wid), "blobs", spec.color, smooth=6.0, lo=0.25, hi=0.75)
    tex_shape = (int(2 * spec.target[3]), int(2 * spec.target[2]))
    smooth = 2.0 if spec.pattern == "blobs" else max(4.0, spec.target[2] / 5.0)
    targets = [texture(rng, tex_shape, spec.pattern, spec.color, smooth)]
    if spec.appearance_swap_frame is not None:
        targets.append(texture(rng, tex_shape, spec.pattern, spec.color, smooth))
    noise_rng = np.random.default_rng(spec.seed + 1_000_003)
    frames = []
    for k, box in enumerate(boxes):
        frame = background.copy()
        swapped = spec.appearance_swap_frame is not None and k >= spec.appearance_swap_frame
        _paste(frame, targets[1 if swapped else 0], box)
        if spec.noise_sigma > 0:
            frame = frame + noise_rng.normal(0.0, spec.noise_sigma, frame.shape)
        frames.append(np.clip(np.rint(frame * 255.0), 0, 255).astype(np.uint8))
    return frames, boxes


def synth_sequence(spec: SynthSpec, out_root) -> Sequence:
    """Render ``spec`` under ``out_root/<name>`` in the benchmark layout and load it."""
    frames, boxes = render(spec)
    root = Path(out_root) / spec.name
    img_dir = root / "img"
    img_dir.mkdir(parents=True, exist_ok=True)
    for k, f in enumerate(frames):
        bgr = cv2.cvtColor(f, cv2.COLOR_RGB2BGR) if f.ndim == 3 else f
        cv2.imwrite(str(img_dir / f"{k + 1:04d}.png"), bgr)
    lines = [",".join(f"{v:.4f}" for v in (x + 1.0, y + 1.0, w, h)) for x, y, w, h in boxes]
    (root / GT_NAME).write_text("\n".join(lines) + "\n")
    if spec.attributes:
        (root / "attributes.txt").write_text(" ".join(spec.attributes) + "\n")
    return load_sequence(root)


def constant_velocity_spec(**overrides) -> SynthSpec:
    """240x240, 2 px/frame, 100 frames, pixel noise 0.01."""
    base = dict(name="constant_velocity", frame_size=(240, 240), n_frames=100,
                target=(1.0, 100.0, 40.0, 40.0), motion=(2.0, 0.0), noise_sigma=0.01, seed=7)
    base.update(overrides)
    return SynthSpec(**base)


def ablation_suite(n: int = 10, n_frames: int = 100, seed: int = 2024) -> list[SynthSpec]:
    """Sequences mixing appearance swaps with velocity changes.

    Each draws a start box, an initial velocity, two velocity changes and a
    swap frame from one seeded generator, keeping the box inside the frame.
    """
    rng = np.random.default_rng(seed)
    specs = []
    size = (240, 240)
    while len(specs) < n:
        w = float(rng.integers(32, 49))
        h = float(rng.integers(32, 49))
        x0 = float(rng.uniform(70, 130))
        y0 = float(rng.uniform(70, 130))
        v = [tuple(np.round(rng.uniform(-2.5, 2.5, 2), 2)) for _ in range(3)]
        k1, k2 = sorted(int(k) for k in rng.choice(np.arange(15, n_frames - 10), 2, replace=False))
        swap = int(rng.integers(n_frames // 3, 2 * n_frames // 3))
        spec = SynthSpec(name=f"swap_{len(specs):02d}", frame_size=size, n_frames=n_frames,
                         target=(x0, y0, w, h), motion=v[0], velocity_changes={k1: v[1], k2: v[2]},
                         noise_sigma=0.02, appearance_swap_frame=swap,
                         pattern=str(rng.choice(["blobs", "checker"])),
                         seed=int(rng.integers(0, 2**31 - 1)),
                         attributes=("appearance_swap", "velocity_change"))
        try:
            boxes_for(spec)
        except ValueError:
            continue
        specs.append(spec)
    return specs
