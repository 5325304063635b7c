"""Image patches and the HOG / color-names / intensity feature stack.

Images are float arrays in ``[0, 1]`` of shape ``(H, W)`` or ``(H, W, 3)``
(RGB).  Feature maps are channel-first ``(D, rows, cols)`` on a grid of
``cell_size`` pixel cells.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .signal import hann_window

CN_NAMES = ("black", "blue", "brown", "grey", "green", "orange",
            "pink", "purple", "red", "white", "yellow")
CN_ROWS = 32768
HOG_CHANNELS = 31

_HOG_EPS = 1e-4
_HOG_CLIP = 0.2
_TEXTURE_SCALE = 0.2357
# unit vectors of the 9 unsigned orientations; the signed set appends their negatives
_ANGLES = np.arange(9) * np.pi / 9
_UX = np.cos(_ANGLES)
_UY = np.sin(_ANGLES)


class GrayscaleInput(ValueError):
    """Color-names features need an RGB patch."""


def as_image(img) -> np.ndarray:
    """Float image in [0, 1]; 8-bit input is rescaled."""
    arr = np.asarray(img)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[..., 0]
    if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] != 3):
        raise ValueError(f"image must be HxW or HxWx3, got shape {arr.shape}")
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    return arr.astype(np.float64, copy=False)


def _sample_coords(center: float, size: float, out: int, limit: int):
    # pixel k covers [k, k+1); output cell i samples the source at its center
    pos = center - size / 2.0 + (np.arange(out) + 0.5) * (size / out) - 0.5
    pos = np.clip(pos, 0.0, limit - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, limit - 1)
    return lo, hi, pos - lo


def extract_patch(img: np.ndarray, center: tuple[float, float], size: tuple[float, float],
                  output_size: tuple[int, int]) -> np.ndarray:
    """Crop ``size`` (rows, cols) around ``center`` and resample bilinearly.

    Coordinates outside the image take the nearest edge pixel.
    """
    if size[0] <= 0 or size[1] <= 0:
        raise ValueError(f"patch size must be positive, got {size}")
    if output_size[0] <= 0 or output_size[1] <= 0:
        raise ValueError(f"output size must be positive, got {output_size}")
    h, w = img.shape[:2]
    r0, r1, fr = _sample_coords(center[0], size[0], int(output_size[0]), h)
    c0, c1, fc = _sample_coords(center[1], size[1], int(output_size[1]), w)
    if img.ndim == 3:
        fr = fr[:, None, None]
        fc = fc[None, :, None]
    else:
        fr = fr[:, None]
        fc = fc[None, :]
    top = img[r0][:, c0] * (1 - fc) + img[r0][:, c1] * fc
    bottom = img[r1][:, c0] * (1 - fc) + img[r1][:, c1] * fc
    return top * (1 - fr) + bottom * fr


def _pad_to_cells(patch: np.ndarray, cell_size: int) -> np.ndarray:
    h, w = patch.shape[:2]
    ph, pw = (-h) % cell_size, (-w) % cell_size
    if ph or pw:
        pad = ((0, ph), (0, pw)) + ((0, 0),) * (patch.ndim - 2)
        patch = np.pad(patch, pad, mode="edge")
    return patch


def _gradients(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full central differences; one-sided at the border."""
    p = np.pad(img, ((1, 1), (1, 1)) + ((0, 0),) * (img.ndim - 2), mode="edge")
    dx = p[1:-1, 2:] - p[1:-1, :-2]
    dy = p[2:, 1:-1] - p[:-2, 1:-1]
    return dx, dy


def orientation_histogram(patch: np.ndarray, cell_size: int) -> np.ndarray:
    """Per-cell magnitude-weighted histogram over 18 signed orientations."""
    dx, dy = _gradients(patch)
    mag = np.hypot(dx, dy)
    if patch.ndim == 3:
        best = np.argmax(mag, axis=2)[..., None]
        dx = np.take_along_axis(dx, best, axis=2)[..., 0]
        dy = np.take_along_axis(dy, best, axis=2)[..., 0]
        mag = np.take_along_axis(mag, best, axis=2)[..., 0]
    dots = _UX[:, None, None] * dx + _UY[:, None, None] * dy
    bins = np.argmax(np.concatenate([dots, -dots]), axis=0)
    h, w = mag.shape
    rows, cols = h // cell_size, w // cell_size
    cell = (np.arange(h) // cell_size)[:, None] * cols + (np.arange(w) // cell_size)[None, :]
    idx = bins * (rows * cols) + cell
    hist = np.bincount(idx.ravel(), weights=mag.ravel(), minlength=18 * rows * cols)
    return hist.reshape(18, rows, cols)


def hog_features(patch: np.ndarray, cell_size: int = 4) -> np.ndarray:
    """31-channel Felzenszwalb HOG: 18 signed, 9 unsigned, 4 texture channels.

    Each cell histogram is normalized by the energy of the four 2x2 cell
    blocks that contain it, clipped at 0.2 and summed over the blocks.
    Border blocks reuse replicated edge cells so the output keeps one value
    per cell.
    """
    patch = as_image(patch)
    if patch.shape[0] < cell_size or patch.shape[1] < cell_size:
        raise ValueError(f"patch {patch.shape[:2]} is smaller than one {cell_size}px cell")
    hist = orientation_histogram(_pad_to_cells(patch, cell_size), cell_size)
    unsigned = hist[:9] + hist[9:]
    energy = np.pad(np.sum(unsigned**2, axis=0), 1, mode="edge")
    block = energy[:-1, :-1] + energy[1:, :-1] + energy[:-1, 1:] + energy[1:, 1:]
    inv = 1.0 / np.sqrt(block + _HOG_EPS)
    norms = (inv[:-1, :-1], inv[:-1, 1:], inv[1:, :-1], inv[1:, 1:])

    rows, cols = hist.shape[1:]
    out = np.zeros((HOG_CHANNELS, rows, cols))
    for k, n in enumerate(norms):
        signed = np.minimum(hist * n, _HOG_CLIP)
        out[:18] += 0.5 * signed
        out[18:27] += 0.5 * np.minimum(unsigned * n, _HOG_CLIP)
        out[27 + k] = _TEXTURE_SCALE * signed.sum(axis=0)
    return out


@lru_cache(maxsize=4)
def load_cn_table(path: str | None = None) -> np.ndarray:
    """Read the 32768 x 11 color-names table (little-endian float32)."""
    if path is None:
        data = resources.files("cpcf").joinpath("data/colornames.f32").read_bytes()
    else:
        p = Path(path)
        if not p.is_file():
            raise FileNotFoundError(f"color-names table not found: {p}")
        data = p.read_bytes()
    table = np.frombuffer(data, dtype="<f4")
    if table.size != CN_ROWS * len(CN_NAMES):
        raise ValueError(f"color-names table has {table.size} values, expected {CN_ROWS * 11}")
    return table.reshape(CN_ROWS, len(CN_NAMES)).astype(np.float64)


def cn_index(rgb: np.ndarray) -> np.ndarray:
    """Table row for each RGB pixel (values in [0, 1])."""
    q = np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.int64) >> 3
    return q[..., 0] + 32 * q[..., 1] + 1024 * q[..., 2]


def pixel_color_names(patch: np.ndarray, table: np.ndarray | None = None) -> np.ndarray:
    patch = as_image(patch)
    if patch.ndim != 3:
        raise GrayscaleInput("color names need a 3-channel patch")
    table = load_cn_table() if table is None else table
    return table[cn_index(patch)]


def _cell_mean(values: np.ndarray, cell_size: int) -> np.ndarray:
    """(H, W, C) -> (C, rows, cols) average over each cell."""
    h, w, c = values.shape
    r, q = h // cell_size, w // cell_size
    v = values[: r * cell_size, : q * cell_size].reshape(r, cell_size, q, cell_size, c)
    return v.mean(axis=(1, 3)).transpose(2, 0, 1)


def cn_features(patch: np.ndarray, cell_size: int = 4, table: np.ndarray | None = None) -> np.ndarray:
    """11 color-name probability channels averaged over each cell."""
    probs = pixel_color_names(patch, table)
    return _cell_mean(_pad_to_cells(probs, cell_size), cell_size)


def intensity_feature(patch: np.ndarray, cell_size: int = 4) -> np.ndarray:
    """Cell-averaged gray level, shifted to zero mean over [0, 1] input."""
    patch = as_image(patch)
    gray = patch.mean(axis=2) if patch.ndim == 3 else patch
    return _cell_mean(_pad_to_cells(gray[..., None], cell_size), cell_size) - 0.5


def feature_stack(patch: np.ndarray, cell_size: int = 4, table: np.ndarray | None = None) -> np.ndarray:
    """Unwindowed HOG + CN + intensity (43 channels), or HOG + intensity (32) for gray."""
    patch = as_image(patch)
    parts = [hog_features(patch, cell_size)]
    if patch.ndim == 3:
        parts.append(cn_features(patch, cell_size, table))
    parts.append(intensity_feature(patch, cell_size))
    return np.concatenate(parts, axis=0)


def build_sample(img: np.ndarray, center: tuple[float, float], size: tuple[float, float],
                 output_size: tuple[int, int], cell_size: int = 4,
                 table: np.ndarray | None = None) -> np.ndarray:
    """Windowed feature map of the region ``size`` around ``center``.

    ``output_size`` is the resampled patch size in pixels and should be a
    multiple of ``cell_size``.
    """
    patch = extract_patch(as_image(img), center, size, output_size)
    feats = feature_stack(patch, cell_size, table)
    return feats * hann_window(*feats.shape[1:])
