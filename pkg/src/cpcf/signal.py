"""2-D grid arithmetic shared by every other module.

Grids are plain ``float64`` numpy arrays of shape ``(M, N)``; stacks of
channels are ``(D, M, N)`` and every routine here acts on the last two axes.

Transform convention: the forward DFT is unnormalized and the inverse
carries ``1/(M*N)`` (numpy's default).  Under this convention the per-bin
ADMM algebra needs no extra scale factors: a spatial inner product equals
``1/(M*N)`` times the spectral one on *both* sides of every equation, so the
factor cancels.
"""

from __future__ import annotations

import numpy as np

# Largest tolerated imaginary residue when inverting a spectrum that should
# be conjugate-symmetric, relative to the max-norm of the real part.
IMAG_TOL = 1e-8


def as_grid(values, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Validate and return ``values`` as a finite real float64 array.

    If ``shape`` is given, a flat sequence is reshaped to it and a value count
    that does not match ``M*N`` is an error.
    """
    arr = np.asarray(values, dtype=np.float64)
    if shape is not None:
        m, n = shape
        if m <= 0 or n <= 0:
            raise ValueError(f"grid dimensions must be positive, got {shape}")
        if arr.size != m * n:
            raise ValueError(f"expected {m * n} values for a {m}x{n} grid, got {arr.size}")
        arr = arr.reshape(m, n)
    if arr.ndim < 2 or 0 in arr.shape[-2:]:
        raise ValueError(f"not a 2-D grid: shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("grid contains non-finite values")
    return arr


def dft2(g: np.ndarray) -> np.ndarray:
    """Forward 2-D DFT over the last two axes (unnormalized)."""
    g = np.asarray(g)
    if g.ndim < 2 or 0 in g.shape[-2:]:
        raise ValueError(f"dft2 needs positive 2-D dimensions, got {g.shape}")
    return np.fft.fft2(g, axes=(-2, -1))


def idft2(s: np.ndarray, real: bool = True) -> np.ndarray:
    """Inverse of :func:`dft2`.

    With ``real=True`` (the default) the input must be conjugate-symmetric up
    to round-off; the imaginary residue is checked and dropped.
    """
    out = np.fft.ifft2(s, axes=(-2, -1))
    if not real:
        return out
    scale = max(float(np.max(np.abs(out.real), initial=0.0)), 1.0)
    resid = float(np.max(np.abs(out.imag), initial=0.0))
    if resid > IMAG_TOL * scale:
        raise ValueError(f"spectrum is not conjugate-symmetric (imag residue {resid:.3g})")
    return out.real.copy()


def correlate_spectra(a_hat: np.ndarray, b_hat: np.ndarray) -> np.ndarray:
    """Spectrum of ``cyclic_correlate(a, b)`` given the two spectra."""
    return np.conj(a_hat) * b_hat


def cyclic_correlate(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``out[tau] = sum_t a[t] * b[t + tau]`` with cyclic indices.

    The conjugate sits on the first argument; every call site in the package
    uses this orientation.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return idft2(correlate_spectra(dft2(a), dft2(b)))


def circ_shift(g: np.ndarray, shift: tuple[int, int]) -> np.ndarray:
    """Cyclic shift: ``out[i, j] = g[(i - du) % M, (j - dv) % N]``."""
    g = np.asarray(g)
    m, n = g.shape[-2:]
    du, dv = int(shift[0]) % m, int(shift[1]) % n
    return np.roll(g, (du, dv), axis=(-2, -1))


def grid_center(shape: tuple[int, int]) -> tuple[int, int]:
    return shape[0] // 2, shape[1] // 2


def cyclic_offsets(length: int, center: float = 0.0) -> np.ndarray:
    """Signed cyclic distance of each index from ``center``, in ``[-L/2, L/2)``."""
    d = np.arange(length) - center
    return (d + length / 2) % length - length / 2


def gaussian_label(m: int, n: int, sigma: float, center: tuple[float, float] = (0, 0)) -> np.ndarray:
    """Gaussian bump of unit peak at ``center`` using cyclic distances."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if m <= 0 or n <= 0:
        raise ValueError(f"grid dimensions must be positive, got {(m, n)}")
    if not (0 <= center[0] < m and 0 <= center[1] < n):
        raise ValueError(f"center {center} outside a {m}x{n} grid")
    di = cyclic_offsets(m, center[0])
    dj = cyclic_offsets(n, center[1])
    return np.exp(-(di[:, None] ** 2 + dj[None, :] ** 2) / (2.0 * sigma**2))


def hann_window(m: int, n: int) -> np.ndarray:
    """Separable raised-cosine window, zero on the border, 1 for a 1x1 grid."""
    if m < 1 or n < 1:
        raise ValueError(f"window dimensions must be >= 1, got {(m, n)}")
    return np.outer(_hann1d(m), _hann1d(n))


def _hann1d(length: int) -> np.ndarray:
    if length == 1:
        return np.ones(1)
    i = np.arange(length)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * i / (length - 1)))
