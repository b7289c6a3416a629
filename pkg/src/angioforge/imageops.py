"""Deterministic, pure image transforms used by the local pipeline backend.

Grayscale images are uint8 HxW arrays; binary masks are bool HxW arrays
(True = vessel foreground). Foreground connectivity is 8-connected,
background 4-connected. Intensity affine maps round half-up so outputs are
reproducible bit-exactly across platforms.
"""

import math
from enum import Enum

import numpy as np
from scipy import ndimage

from .errors import AreaDistortion, TileTooSmall, UniformImage

_STRUCT8 = np.ones((3, 3), dtype=bool)


class Polarity(Enum):
    VESSELS_DARK = "VesselsDark"
    VESSELS_BRIGHT = "VesselsBright"


def _round_half_up(x):
    return np.floor(x + 0.5)


def to_gray(arr: np.ndarray) -> np.ndarray:
    """Collapse RGB to luma (Rec. 601 weights); grayscale passes through."""
    if arr.ndim == 2:
        return arr.astype(np.uint8)
    y = 0.299 * arr[..., 0] + 0.587 * arr[..., 1] + 0.114 * arr[..., 2]
    return _round_half_up(y).astype(np.uint8)


def invert(img: np.ndarray) -> np.ndarray:
    return (255 - img.astype(np.int32)).astype(np.uint8)


def normalize(img: np.ndarray) -> np.ndarray:
    """Stretch intensities to [0, 255]; a uniform image maps to constant 128."""
    img = np.asarray(img, dtype=np.uint8)
    lo = int(img.min())
    hi = int(img.max())
    if lo == hi:
        return np.full_like(img, 128)
    scaled = (img.astype(np.float64) - lo) * 255.0 / (hi - lo)
    return _round_half_up(scaled).astype(np.uint8)


def _tile_lut(hist: np.ndarray, npix: int, clip: float) -> np.ndarray:
    """Equalization LUT for one tile: clip, redistribute, cumulate, rescale.

    A tile whose (pre-clip) histogram occupies a single bin keeps the
    identity mapping, so constant regions survive equalization unchanged.
    """
    identity = np.arange(256, dtype=np.uint8)
    if np.count_nonzero(hist) <= 1:
        return identity
    limit = max(1, int(math.floor(clip * npix)))
    excess = int(np.maximum(hist - limit, 0).sum())
    clipped = np.minimum(hist, limit).astype(np.int64)
    clipped += excess // 256
    rem = excess % 256
    if rem:
        clipped[:rem] += 1
    c = np.cumsum(clipped)
    total = int(c[-1])
    cmin = int(c[np.nonzero(clipped)[0][0]])
    if total == cmin:
        return identity
    lut = _round_half_up(255.0 * (c - cmin) / (total - cmin))
    return np.clip(lut, 0, 255).astype(np.uint8)


def enhance_contrast(img: np.ndarray, tile: int = 64, clip: float = 0.01) -> np.ndarray:
    """Tile-wise clipped histogram equalization with bilinear blending
    between tile-center mappings (CLAHE-style)."""
    if tile < 8:
        raise TileTooSmall(f"tile {tile} < 8")
    if not 0 < clip <= 1:
        raise ValueError("clip must be in (0, 1]")
    h, w = img.shape
    ty = (h + tile - 1) // tile
    tx = (w + tile - 1) // tile
    padded = np.pad(img, ((0, ty * tile - h), (0, tx * tile - w)), mode="edge")
    luts = np.empty((ty, tx, 256), dtype=np.uint8)
    npix = tile * tile
    for i in range(ty):
        for j in range(tx):
            block = padded[i * tile:(i + 1) * tile, j * tile:(j + 1) * tile]
            hist = np.bincount(block.ravel(), minlength=256)
            luts[i, j] = _tile_lut(hist, npix, clip)

    yy = np.arange(h, dtype=np.float64)[:, None]
    xx = np.arange(w, dtype=np.float64)[None, :]
    gy = (yy + 0.5) / tile - 0.5
    gx = (xx + 0.5) / tile - 0.5
    iy0 = np.clip(np.floor(gy), 0, ty - 1).astype(np.int64)
    ix0 = np.clip(np.floor(gx), 0, tx - 1).astype(np.int64)
    iy1 = np.minimum(iy0 + 1, ty - 1)
    ix1 = np.minimum(ix0 + 1, tx - 1)
    fy = np.clip(gy - iy0, 0.0, 1.0)
    fx = np.clip(gx - ix0, 0.0, 1.0)

    v = img.astype(np.int64)
    iy0b = np.broadcast_to(iy0, (h, w))
    iy1b = np.broadcast_to(iy1, (h, w))
    ix0b = np.broadcast_to(ix0, (h, w))
    ix1b = np.broadcast_to(ix1, (h, w))
    p00 = luts[iy0b, ix0b, v].astype(np.float64)
    p01 = luts[iy0b, ix1b, v].astype(np.float64)
    p10 = luts[iy1b, ix0b, v].astype(np.float64)
    p11 = luts[iy1b, ix1b, v].astype(np.float64)
    out = ((1 - fy) * ((1 - fx) * p00 + fx * p01)
           + fy * ((1 - fx) * p10 + fx * p11))
    return np.clip(_round_half_up(out), 0, 255).astype(np.uint8)


def otsu_threshold(img: np.ndarray):
    """Threshold maximizing between-class variance over the 256 candidates
    (lowest winner on ties); mask is True where intensity >= threshold."""
    hist = np.bincount(img.ravel(), minlength=256).astype(np.float64)
    if np.count_nonzero(hist) < 2:
        raise UniformImage("image has a single intensity")
    total = hist.sum()
    idx = np.arange(256, dtype=np.float64)
    csum = np.cumsum(hist)
    cmom = np.cumsum(hist * idx)
    grand = cmom[-1]
    # background = intensities < t, foreground = intensities >= t
    w0 = np.concatenate(([0.0], csum[:-1]))
    m0 = np.concatenate(([0.0], cmom[:-1]))
    w1 = total - w0
    variances = np.full(256, -np.inf)
    valid = (w0 > 0) & (w1 > 0)
    mu0 = np.divide(m0, w0, out=np.zeros(256), where=valid)
    mu1 = np.divide(grand - m0, w1, out=np.zeros(256), where=valid)
    variances[valid] = (w0 * w1)[valid] * (mu0 - mu1)[valid] ** 2
    t = int(np.argmax(variances))
    return t, img >= t


def detect_polarity(img: np.ndarray) -> Polarity:
    """Angiograms show bright background around dark vessels; the 5%-border
    frame being >= 10 units brighter than the global mean flags that case."""
    h, w = img.shape
    b = max(1, round(0.05 * min(h, w)))
    frame = np.zeros((h, w), dtype=bool)
    frame[:b, :] = frame[-b:, :] = True
    frame[:, :b] = frame[:, -b:] = True
    border_mean = float(img[frame].mean())
    global_mean = float(img.mean())
    if border_mean - global_mean >= 10.0:
        return Polarity.VESSELS_DARK
    return Polarity.VESSELS_BRIGHT


def ensure_bright(img: np.ndarray) -> np.ndarray:
    """Invert when vessels render dark so foreground is always bright."""
    if detect_polarity(img) is Polarity.VESSELS_DARK:
        return invert(img)
    return img


def denoise_median(img: np.ndarray, size: int = 3) -> np.ndarray:
    return ndimage.median_filter(img, size=size)


def remove_small_components(mask: np.ndarray, min_area: int) -> np.ndarray:
    if min_area < 1:
        raise ValueError("min_area must be >= 1")
    labels, n = ndimage.label(mask, structure=_STRUCT8)
    if n == 0:
        return mask.copy()
    areas = np.bincount(labels.ravel())
    keep = areas >= min_area
    keep[0] = False
    return keep[labels]


def fill_holes(mask: np.ndarray) -> np.ndarray:
    """Turn background components not 4-connected to the border into
    foreground."""
    return ndimage.binary_fill_holes(mask)


def _disk(radius: int) -> np.ndarray:
    r = int(radius)
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    return (yy * yy + xx * xx) <= r * r


def smooth_boundary(mask: np.ndarray, radius: int = 2) -> np.ndarray:
    """Morphological closing then opening with a disk; guards against the
    structuring element destroying thin structure (±15% area bound)."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    disk = _disk(radius)
    pad = radius + 1
    m = np.pad(mask, pad)
    m = ndimage.binary_erosion(ndimage.binary_dilation(m, disk), disk)
    m = ndimage.binary_dilation(ndimage.binary_erosion(m, disk), disk)
    out = m[pad:-pad, pad:-pad]
    in_area = int(mask.sum())
    out_area = int(out.sum())
    if in_area == 0:
        if out_area != 0:
            raise AreaDistortion("smoothing created foreground from nothing")
        return out
    change = abs(out_area - in_area) / in_area
    if change > 0.15:
        raise AreaDistortion(
            f"smoothing changed area by {change:.1%} (> 15%); radius {radius} "
            "inappropriate for this mask")
    return out


def close_gaps(mask: np.ndarray, radius: int = 3) -> np.ndarray:
    """Morphological closing only; bridges small breaks in vessel continuity."""
    disk = _disk(radius)
    pad = radius + 1
    m = np.pad(mask, pad)
    m = ndimage.binary_erosion(ndimage.binary_dilation(m, disk), disk)
    return m[pad:-pad, pad:-pad]


def majority_smooth(mask: np.ndarray) -> np.ndarray:
    """3x3 majority vote; knocks down single-pixel saw teeth on boundaries."""
    counts = ndimage.uniform_filter(mask.astype(np.float64), size=3) * 9.0
    return counts >= 4.5


def largest_component(mask: np.ndarray) -> np.ndarray:
    labels, n = ndimage.label(mask, structure=_STRUCT8)
    if n == 0:
        return mask.copy()
    areas = np.bincount(labels.ravel())
    areas[0] = 0
    return labels == int(np.argmax(areas))
