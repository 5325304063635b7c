"""Frame-to-frame tracking loop: detect, update the model, retrain."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .config import TrackerConfig
from .consistency import (ResponseMap, cached_fixed_label, dynamic_factor, dynamic_label,
                          psrm, recenter)
from .features import as_image, build_sample, load_cn_table
from .signal import dft2, gaussian_label, idft2
from .solver import FilterStack, SolverDivergence, TrainingProblem, solve_filter, spatial_weight

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"bounding box needs positive size, got {self.w}x{self.h}")

    @property
    def center(self) -> tuple[float, float]:
        """(row, col) of the box center."""
        return self.y + self.h / 2.0, self.x + self.w / 2.0

    @classmethod
    def from_center(cls, center: tuple[float, float], size: tuple[float, float]) -> "BoundingBox":
        return cls(x=center[1] - size[1] / 2.0, y=center[0] - size[0] / 2.0, w=size[1], h=size[0])

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.x, self.y, self.w, self.h


@dataclass(frozen=True)
class Geometry:
    """Sampling geometry fixed at initialization."""

    base_target: tuple[float, float]  # (h, w) pixels at scale 1
    window: tuple[float, float]  # search region (h, w) pixels at scale 1
    model_px: tuple[int, int]  # resampled patch size
    grid: tuple[int, int]  # feature cells
    target_cells: tuple[float, float]
    y_hat: np.ndarray
    l_f: np.ndarray
    s: np.ndarray
    scale_factors: np.ndarray

    @classmethod
    def build(cls, target: tuple[float, float], cfg: TrackerConfig) -> "Geometry":
        side = math.sqrt(cfg.padding)
        window = (target[0] * side, target[1] * side)
        area = window[0] * window[1]
        resize = 1.0
        if area > cfg.max_sample_area:
            resize = math.sqrt(area / cfg.max_sample_area)
        elif area < cfg.min_sample_area:
            resize = math.sqrt(area / cfg.min_sample_area)
        grid = tuple(max(4, round(v / resize / cfg.cell_size)) for v in window)
        model_px = (grid[0] * cfg.cell_size, grid[1] * cfg.cell_size)
        cells = tuple(min(g, t * m / (w * cfg.cell_size))
                      for g, t, m, w in zip(grid, target, model_px, window))
        sigma = cfg.label_sigma_factor * math.sqrt(cells[0] * cells[1])
        y = gaussian_label(grid[0], grid[1], sigma)
        k = np.arange(cfg.scale_count) - (cfg.scale_count - 1) // 2
        return cls(base_target=target, window=window, model_px=model_px, grid=grid,
                   target_cells=cells, y_hat=dft2(y), l_f=cached_fixed_label(y),
                   s=spatial_weight(cells, grid, cfg.reg_mu, cfg.reg_theta),
                   scale_factors=cfg.scale_step ** k.astype(float))


@dataclass
class TrackerState:
    cfg: TrackerConfig
    geom: Geometry
    model_x_hat: np.ndarray
    filter: FilterStack
    position: tuple[float, float]  # (row, col) pixels
    scale: float
    frame_index: int
    prev_response: ResponseMap | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def target_size(self) -> tuple[float, float]:
        return (self.geom.base_target[0] * self.scale, self.geom.base_target[1] * self.scale)

    @property
    def bbox(self) -> BoundingBox:
        return BoundingBox.from_center(self.position, self.target_size)


@dataclass(frozen=True)
class Detection:
    response: ResponseMap
    position: tuple[float, float]
    scale: float
    scale_index: int
    translation: tuple[float, float]  # pixels (row, col)


def _table(cfg: TrackerConfig, frame: np.ndarray):
    return load_cn_table(cfg.cn_table) if frame.ndim == 3 else None


def sample_spectra(frame: np.ndarray, position, scale: float, geom: Geometry,
                   cfg: TrackerConfig) -> np.ndarray:
    size = (geom.window[0] * scale, geom.window[1] * scale)
    x = build_sample(frame, position, size, geom.model_px, cfg.cell_size, _table(cfg, frame))
    return dft2(x)


def init(frame, bbox: BoundingBox, cfg: TrackerConfig = TrackerConfig()) -> TrackerState:
    frame = as_image(frame)
    if bbox.w < 2 or bbox.h < 2:
        raise ValueError(f"bounding box {bbox.w}x{bbox.h} is degenerate")
    hgt, wid = frame.shape[:2]
    if bbox.x >= wid or bbox.y >= hgt or bbox.x + bbox.w <= 0 or bbox.y + bbox.h <= 0:
        raise ValueError("bounding box lies outside the frame")
    geom = Geometry.build((bbox.h, bbox.w), cfg)
    x_hat = sample_spectra(frame, bbox.center, 1.0, geom, cfg)
    state = TrackerState(cfg=cfg, geom=geom, model_x_hat=x_hat,
                         filter=FilterStack.zeros(x_hat.shape[0], geom.grid, cfg.nu0),
                         position=bbox.center, scale=1.0, frame_index=1)
    problem = TrainingProblem(x_hat, geom.y_hat, geom.s)
    state.filter = solve_filter(problem, state.filter, cfg.admm_iters, cfg.schedule)
    # no detection exists yet; score the filter on its own training sample
    own = ResponseMap.from_grid(response(state.filter.w_hat, x_hat))
    score = psrm(own, cfg.beta, cfg.sidelobe_margin)
    state.diagnostics = {"psrm": score.value, "peak": own.peak_value, "diverged": False,
                         "h": dynamic_factor(score, cfg.h_min, cfg.h_max, cfg.alpha)}
    return state


def response(filter_w_hat: np.ndarray, z_hat: np.ndarray) -> np.ndarray:
    return idft2(np.sum(np.conj(filter_w_hat) * z_hat, axis=0))


def _parabolic(left: float, mid: float, right: float) -> float:
    denom = left - 2.0 * mid + right
    if denom >= 0:
        return 0.0
    return float(np.clip(0.5 * (left - right) / denom, -0.5, 0.5))


def subcell_peak(grid: np.ndarray, peak: tuple[int, int]) -> tuple[float, float]:
    """Peak position refined by a 3-point parabola per axis (cyclic neighbors)."""
    m, n = grid.shape
    i, j = peak
    di = _parabolic(grid[(i - 1) % m, j], grid[i, j], grid[(i + 1) % m, j])
    dj = _parabolic(grid[i, (j - 1) % n], grid[i, j], grid[i, (j + 1) % n])
    return i + di, j + dj


def _wrap(v: float, length: int) -> float:
    return (v + length / 2.0) % length - length / 2.0


def detect(state: TrackerState, frame) -> Detection:
    if state is None or state.filter is None:
        raise RuntimeError("tracker is not initialized")
    frame = as_image(frame)
    cfg, geom = state.cfg, state.geom
    w_hat = state.filter.w_hat
    center = (cfg.scale_count - 1) // 2
    best = None
    for k, f in enumerate(geom.scale_factors):
        z_hat = sample_spectra(frame, state.position, state.scale * f, geom, cfg)
        resp = ResponseMap.from_grid(response(w_hat, z_hat))
        score = resp.peak_value * cfg.scale_penalty ** abs(k - center)
        if best is None or score > best[0]:
            best = (score, k, f, resp)
    _, k, f, resp = best
    pi, pj = subcell_peak(resp.grid, resp.peak_pos)
    m, n = geom.grid
    px_per_cell = [state.scale * f * geom.window[a] / geom.model_px[a] * cfg.cell_size for a in (0, 1)]
    t = (_wrap(pi, m) * px_per_cell[0], _wrap(pj, n) * px_per_cell[1])
    hgt, wid = frame.shape[:2]
    pos = (min(max(state.position[0] + t[0], 0.0), hgt - 1.0),
           min(max(state.position[1] + t[1], 0.0), wid - 1.0))
    return Detection(response=resp, position=pos, scale=state.scale * f, scale_index=k,
                     translation=t)


def update_model(state: TrackerState, sample_x_hat: np.ndarray, eta: float) -> TrackerState:
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"learning rate must lie in [0, 1], got {eta}")
    return replace(state, model_x_hat=(1.0 - eta) * state.model_x_hat + eta * sample_x_hat)


def training_problem(state: TrackerState, detection: ResponseMap | None) -> tuple[TrainingProblem, dict]:
    """Problem for the current model; the consistency term needs a detection response."""
    cfg, geom = state.cfg, state.geom
    if detection is None or cfg.gamma == 0:
        diag = {}
        if detection is not None:
            score = psrm(detection, cfg.beta, cfg.sidelobe_margin)
            diag = {"psrm": score.value, "h": dynamic_factor(score, cfg.h_min, cfg.h_max, cfg.alpha),
                    "peak": detection.peak_value}
        return TrainingProblem(state.model_x_hat, geom.y_hat, geom.s), diag
    score = psrm(detection, cfg.beta, cfg.sidelobe_margin)
    h = dynamic_factor(score, cfg.h_min, cfg.h_max, cfg.alpha)
    label = dynamic_label(h, geom.l_f)
    problem = TrainingProblem(state.model_x_hat, geom.y_hat, geom.s, cfg.gamma,
                              r_hat=dft2(recenter(detection)), l_hat=dft2(label.grid))
    return problem, {"psrm": score.value, "h": h, "peak": detection.peak_value}


def train(state: TrackerState) -> TrackerState:
    """Retrain the filter on the current model against ``state.prev_response``."""
    problem, diag = training_problem(state, state.prev_response)
    try:
        filt = solve_filter(problem, state.filter.warm(state.cfg.nu0), state.cfg.admm_iters,
                            state.cfg.schedule)
        diag["diverged"] = False
    except SolverDivergence:
        log.warning("ADMM diverged on frame %d; keeping previous filter", state.frame_index)
        filt = state.filter
        diag["diverged"] = True
    return replace(state, filter=filt, diagnostics=diag)


def step(state: TrackerState, frame) -> tuple[TrackerState, BoundingBox]:
    frame = as_image(frame)
    det = detect(state, frame)
    state = replace(state, position=det.position, scale=det.scale, prev_response=det.response)
    x_hat = sample_spectra(frame, state.position, state.scale, state.geom, state.cfg)
    state = update_model(state, x_hat, state.cfg.eta)
    state = train(state)
    state.frame_index += 1
    state.diagnostics["scale_index"] = det.scale_index
    return state, state.bbox


class CPCFTracker:
    """Stateful wrapper with the ``init`` / ``update`` interface the harness drives."""

    name = "CPCF"

    def __init__(self, cfg: TrackerConfig = TrackerConfig()):
        self.cfg = cfg
        self.state: TrackerState | None = None

    def init(self, frame, bbox: BoundingBox) -> None:
        self.state = init(frame, bbox, self.cfg)

    def update(self, frame) -> BoundingBox:
        if self.state is None:
            raise RuntimeError("tracker is not initialized")
        self.state, box = step(self.state, frame)
        return box

    @property
    def diagnostics(self) -> dict:
        return {} if self.state is None else dict(self.state.diagnostics)
