"""Tracker hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

import yaml

from .solver import PenaltySchedule


@dataclass(frozen=True)
class TrackerConfig:
    # consistency term and dynamic label
    gamma: float = 0.9
    h_min: float = 0.6
    h_max: float = 1.2
    alpha: float = 50.0
    beta: float = 100.0
    eta: float = 0.042
    sidelobe_margin: float = 0.15
    # sampling geometry
    cell_size: int = 4
    padding: float = 4.0  # search area / target area
    max_sample_area: float = 200.0**2
    min_sample_area: float = 80.0**2
    label_sigma_factor: float = 1.0 / 16.0
    # scale search
    scale_count: int = 5
    scale_step: float = 1.01
    scale_penalty: float = 0.99
    # spatial weight
    reg_mu: float = 0.1
    reg_theta: float = 3.0
    # ADMM
    admm_iters: int = 3
    nu0: float = 1.0
    nu_growth: float = 10.0
    nu_max: float = 1e4
    cn_table: str | None = None

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if self.h_min > self.h_max:
            raise ValueError(f"h_min {self.h_min} exceeds h_max {self.h_max}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("gamma", "cn_table") or v is None:
                continue
            if v <= 0:
                raise ValueError(f"{f.name} must be positive, got {v}")
        if self.scale_count % 2 == 0:
            raise ValueError("scale_count must be odd so the current scale is searched")

    @property
    def schedule(self) -> PenaltySchedule:
        return PenaltySchedule(nu0=self.nu0, growth=self.nu_growth, nu_max=self.nu_max)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def read_config_file(path) -> dict:
    """Flat ``key: value`` YAML mapping of tracker fields; unknown keys are errors."""
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a flat key/value mapping")
    known = set(TrackerConfig.field_names())
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValueError(f"{path}: unknown config keys {unknown}")
    nested = [k for k, v in data.items() if isinstance(v, (dict, list))]
    if nested:
        raise ValueError(f"{path}: values must be scalars, got nested {nested}")
    return data


def resolve_config(file_values: dict | None = None, overrides: dict | None = None) -> TrackerConfig:
    """Defaults, then file values, then explicit overrides (``None`` means unset)."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    types = {f.name: f.type for f in fields(TrackerConfig)}
    for k, v in merged.items():
        if v is not None and types[k] in ("float", float):
            merged[k] = float(v)
        elif v is not None and types[k] in ("int", int):
            if float(v) != int(v):
                raise ValueError(f"{k} must be an integer, got {v}")
            merged[k] = int(v)
    return TrackerConfig(**merged)
