"""Self-checks behind ``cpcf verify``.

Each check compares a fast path against a brute-force reference built from
explicit loops or dense matrices.  ``perturb=True`` nudges the ADMM output
before it is compared with the dense solve, to prove the check can fail.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .consistency import (ResponseMap, consistency_map, dynamic_factor, fixed_label, psrm,
                          recenter)
from .signal import circ_shift, cyclic_correlate, dft2, gaussian_label
from .solver import (CONVERGENT, FilterStack, TrainingProblem, oracle_solve,
                     sherman_morrison_solve, solve_filter, spatial_weight, without_consistency)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    error: float
    tolerance: float
    seconds: float


def random_problem(rng: np.random.Generator, shape=(8, 8), channels: int = 2,
                   gamma: float = 0.0, h: float = 1.0) -> TrainingProblem:
    """A training problem shaped like the tracker's: Gaussian label, bowl weight,
    random features and (for gamma > 0) a noisy peaked detection response."""
    m, n = shape
    x = rng.standard_normal((channels, m, n))
    y = gaussian_label(m, n, max(0.5, 0.1 * np.sqrt(m * n)))
    s = spatial_weight((m / 2.0, n / 2.0), shape)
    if gamma == 0:
        return TrainingProblem(dft2(x), dft2(y), s)
    peak = (int(rng.integers(m)), int(rng.integers(n)))
    r = gaussian_label(m, n, 1.0, peak) + 0.1 * rng.standard_normal(shape)
    l = h * fixed_label(y)
    return TrainingProblem(dft2(x), dft2(y), s, gamma,
                           r_hat=dft2(recenter(ResponseMap.from_grid(r))), l_hat=dft2(l))


def rel_max(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


# brute-force references ------------------------------------------------------

def _dft_loops(g: np.ndarray) -> np.ndarray:
    m, n = g.shape
    k = np.arange(m)[:, None]
    l = np.arange(n)[:, None]
    fm = np.exp(-2j * np.pi * k * np.arange(m)[None, :] / m)
    fn = np.exp(-2j * np.pi * l * np.arange(n)[None, :] / n)
    return fm @ g @ fn.T


def _correlate_loops(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m, n = a.shape
    out = np.empty((m, n))
    for u in range(m):
        for v in range(n):
            out[u, v] = sum(a[i, j] * b[(i + u) % m, (j + v) % n]
                            for i in range(m) for j in range(n))
    return out


def _consistency_loops(target: np.ndarray, detect: np.ndarray) -> np.ndarray:
    m, n = detect.shape
    pi, pj = np.unravel_index(int(np.argmax(detect)), detect.shape)
    du, dv = m // 2 - pi, n // 2 - pj
    moved = np.empty_like(detect)
    for i in range(m):
        for j in range(n):
            moved[i, j] = detect[(i - du) % m, (j - dv) % n]
    return _correlate_loops(target, moved)


# checks ----------------------------------------------------------------------

def check_dft(rng) -> float:
    g = rng.standard_normal((6, 7))
    return rel_max(dft2(g), _dft_loops(g))


def check_parseval(rng) -> float:
    worst = 0.0
    for _ in range(20):
        g = rng.standard_normal(tuple(rng.integers(1, 33, 2)))
        e = np.sum(g**2)
        worst = max(worst, abs(e - np.sum(np.abs(dft2(g)) ** 2) / g.size) / e)
    return worst


def check_correlation(rng) -> float:
    a, b = rng.standard_normal((2, 6, 5))
    return rel_max(cyclic_correlate(a, b), _correlate_loops(a, b))


def check_consistency(rng) -> float:
    y = gaussian_label(9, 8, 1.2)
    err = rel_max(consistency_map(ResponseMap.from_grid(y), ResponseMap.from_grid(y)), fixed_label(y))
    t, d = rng.standard_normal((2, 7, 6))
    err = max(err, rel_max(consistency_map(ResponseMap.from_grid(t), ResponseMap.from_grid(d)),
                           _consistency_loops(t, d)))
    moved = circ_shift(d, (3, -2))
    return max(err, rel_max(consistency_map(ResponseMap.from_grid(t), ResponseMap.from_grid(moved)),
                            consistency_map(ResponseMap.from_grid(t), ResponseMap.from_grid(d))))


def check_sherman_morrison(rng) -> float:
    worst = 0.0
    for d in (1, 2, 3, 8):
        x = rng.standard_normal((d, 200)) + 1j * rng.standard_normal((d, 200))
        v = rng.standard_normal((d, 200)) + 1j * rng.standard_normal((d, 200))
        c = 1.0 + rng.random(200) * 3
        nu = float(rng.uniform(0.1, 100))
        fast = sherman_morrison_solve(x, c, nu, v)
        for k in range(200):
            a = c[k] * np.outer(x[:, k], np.conj(x[:, k])) + nu * np.eye(d)
            worst = max(worst, rel_max(fast[:, k], np.linalg.inv(a) @ v[:, k]))
    return worst


def _solver_vs_oracle(p: TrainingProblem, perturb: bool) -> float:
    w = solve_filter(p, FilterStack.zeros(p.channels, p.shape), 3000, CONVERGENT).w
    if perturb:
        w = w * (1.0 + 1e-3)
    return rel_max(w, oracle_solve(p))


def check_solver_oracle(rng, perturb: bool = False) -> float:
    return max(_solver_vs_oracle(random_problem(rng, (8, 8), 2, g), perturb) for g in (0.0, 0.9))


def check_srdcf_reduction(rng) -> float:
    p = random_problem(rng, (8, 6), 2, 0.9)
    reduced = TrainingProblem(p.x_hat, p.y_hat, p.spatial_weight, 0.0, p.r_hat, p.l_hat)
    w = solve_filter(reduced, FilterStack.zeros(2, p.shape), 3000, CONVERGENT).w
    return rel_max(w, oracle_solve(without_consistency(p)))


def check_flat_response(rng) -> float:
    """A constant response has no peak structure; h must fall to h_min."""
    flat = ResponseMap.from_grid(np.zeros((10, 10)))
    h = dynamic_factor(psrm(flat, beta=100.0), 0.6, 1.2, 50.0)
    return abs(h - 0.6)


CHECKS: list[tuple[str, Callable, float]] = [
    ("dft_vs_direct_sum", check_dft, 1e-10),
    ("parseval", check_parseval, 1e-9),
    ("correlation_vs_loops", check_correlation, 1e-10),
    ("consistency_map_vs_loops", check_consistency, 1e-9),
    ("sherman_morrison_vs_dense", check_sherman_morrison, 1e-10),
    ("solver_vs_oracle", check_solver_oracle, 1e-6),
    ("srdcf_reduction", check_srdcf_reduction, 1e-6),
    ("flat_response_h_min", check_flat_response, 1e-12),
]


def run_checks(perturb: bool = False, seed: int = 0) -> list[CheckResult]:
    results = []
    for k, (name, fn, tol) in enumerate(CHECKS):
        rng = np.random.default_rng([seed, k])
        t0 = time.perf_counter()
        err = fn(rng, perturb) if fn is check_solver_oracle else fn(rng)
        results.append(CheckResult(name, bool(err <= tol), float(err), tol,
                                   time.perf_counter() - t0))
    return results


def format_table(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  status  error      tolerance"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  "
                     f"{r.error:<9.2e}  {r.tolerance:.0e}")
    failed = [r.name for r in results if not r.passed]
    lines.append(f"{len(results)} checks, {len(results) - len(failed)} passed"
                 + (f"; failed: {', '.join(failed)}" if failed else ""))
    return "\n".join(lines)
