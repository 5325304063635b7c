"""Temporal consistency between responses and the dynamic constraint label.

The ideal response ``y`` is peaked at the grid origin (zero displacement),
so a trained response that reproduces ``y`` correlated with a detection
response whose peak was moved to the grid center yields a map peaked at the
center.  The fixed label is re-centered the same way so the two compare
cell for cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .signal import circ_shift, cyclic_correlate, grid_center


@dataclass(frozen=True)
class ResponseMap:
    grid: np.ndarray
    peak_value: float
    peak_pos: tuple[int, int]

    @classmethod
    def from_grid(cls, grid: np.ndarray) -> "ResponseMap":
        grid = np.asarray(grid, dtype=np.float64)
        # np.argmax returns the first maximum in row-major order
        flat = int(np.argmax(grid))
        pos = divmod(flat, grid.shape[1])
        return cls(grid=grid, peak_value=float(grid[pos]), peak_pos=(int(pos[0]), int(pos[1])))

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape


@dataclass(frozen=True)
class ConstraintLabel:
    grid: np.ndarray
    h: float


@dataclass(frozen=True)
class PsrmScore:
    value: float
    psr_part: float
    peak_part: float


def recenter(resp: ResponseMap) -> np.ndarray:
    """Shift ``resp`` so its peak lands on the grid center."""
    ci, cj = grid_center(resp.shape)
    return circ_shift(resp.grid, (ci - resp.peak_pos[0], cj - resp.peak_pos[1]))


def consistency_map(target_resp: ResponseMap, detect_resp: ResponseMap) -> np.ndarray:
    if target_resp.shape != detect_resp.shape:
        raise ValueError(f"response shapes differ: {target_resp.shape} vs {detect_resp.shape}")
    return cyclic_correlate(target_resp.grid, recenter(detect_resp))


def fixed_label(y: np.ndarray) -> np.ndarray:
    """Autocorrelation of the ideal response, peak moved to the grid center."""
    y = np.asarray(y, dtype=np.float64)
    auto = cyclic_correlate(y, y)
    return circ_shift(auto, grid_center(auto.shape))


@lru_cache(maxsize=16)
def _cached_fixed_label(shape: tuple[int, int], y_bytes: bytes) -> np.ndarray:
    lf = fixed_label(np.frombuffer(y_bytes, dtype=np.float64).reshape(shape))
    lf.setflags(write=False)
    return lf


def cached_fixed_label(y: np.ndarray) -> np.ndarray:
    """:func:`fixed_label` memoized on the label contents (read-only result)."""
    y = np.ascontiguousarray(y, dtype=np.float64)
    return _cached_fixed_label(y.shape, y.tobytes())


def sidelobe_mask(shape: tuple[int, int], peak_pos: tuple[int, int], margin: float) -> np.ndarray:
    """Boolean mask of cells outside the exclusion window around the peak.

    The window is ``margin * side`` cells per axis (at least 3, forced odd so
    it centers on the peak) and wraps cyclically like the response itself.
    """
    m, n = shape
    sides = []
    for length in (m, n):
        side = max(3, math.ceil(margin * length))
        if side % 2 == 0:
            side += 1
        if side >= length:
            raise ValueError(f"{m}x{n} grid is too small for a {side}-cell exclusion window")
        sides.append(side)
    rows = (peak_pos[0] + np.arange(sides[0]) - sides[0] // 2) % m
    cols = (peak_pos[1] + np.arange(sides[1]) - sides[1] // 2) % n
    mask = np.ones(shape, dtype=bool)
    mask[np.ix_(rows, cols)] = False
    return mask


def psrm(resp: ResponseMap, beta: float, sidelobe_margin: float = 0.15) -> PsrmScore:
    mask = sidelobe_mask(resp.shape, resp.peak_pos, sidelobe_margin)
    side = resp.grid[mask]
    if side.size < 2:
        raise ValueError("fewer than two sidelobe cells")
    mu, sigma = float(side.mean()), float(side.std())
    r_max = resp.peak_value
    psr = (r_max - mu) / sigma if sigma >= 1e-8 else 0.0
    return PsrmScore(value=psr + beta * r_max, psr_part=psr, peak_part=r_max)


def dynamic_factor(score: PsrmScore | float, h_min: float, h_max: float, alpha: float) -> float:
    """Map a PSRM score linearly onto ``[h_min, h_max]``, clamped."""
    if h_min > h_max:
        raise ValueError(f"h_min {h_min} exceeds h_max {h_max}")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    value = score.value if isinstance(score, PsrmScore) else float(score)
    h = h_min + (value / alpha) * (h_max - h_min)
    return float(min(max(h, h_min), h_max))


def dynamic_label(h: float, l_f: np.ndarray) -> ConstraintLabel:
    if not math.isfinite(h):
        raise ValueError(f"non-finite regulatory factor {h}")
    return ConstraintLabel(grid=h * np.asarray(l_f, dtype=np.float64), h=float(h))
