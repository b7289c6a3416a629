"""Raster I/O and content addressing.

Images travel between pipeline steps as encoded PNG bytes; in memory they
are numpy arrays (uint8, HxW grayscale or HxWx3 RGB). Masks are encoded as
8-bit grayscale PNG with values {0, 255}.
"""

import hashlib
import io

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageTooLarge, ImageTooSmall, UndecodableImage

MIN_SIDE = 16
MAX_SIDE = 8192

# artifact kinds
SOURCE_ANGIOGRAM = "SourceAngiogram"
PROJECTION = "Projection"
MASK = "Mask"
FLOW_OVERLAY = "FlowOverlay"


def content_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def decode_image(data: bytes) -> np.ndarray:
    """Decode PNG/raster bytes to a uint8 array (HxW or HxWx3)."""
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            if im.mode in ("L", "RGB"):
                arr = np.asarray(im)
            elif im.mode in ("1", "I", "I;16", "LA", "P"):
                arr = np.asarray(im.convert("L"))
            else:
                arr = np.asarray(im.convert("RGB"))
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise UndecodableImage(f"cannot decode image: {exc}") from exc
    return np.ascontiguousarray(arr.astype(np.uint8))


def check_dimensions(arr: np.ndarray) -> None:
    h, w = arr.shape[:2]
    if h < MIN_SIDE or w < MIN_SIDE:
        raise ImageTooSmall(f"image {w}x{h} below minimum side {MIN_SIDE}")
    if h > MAX_SIDE or w > MAX_SIDE:
        raise ImageTooLarge(f"image {w}x{h} above maximum side {MAX_SIDE}")


def encode_png(arr: np.ndarray) -> bytes:
    """Deterministic PNG encoding (fixed zlib settings via Pillow)."""
    arr = np.asarray(arr, dtype=np.uint8)
    mode = "L" if arr.ndim == 2 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def mask_to_image(mask: np.ndarray) -> np.ndarray:
    return np.where(mask, 255, 0).astype(np.uint8)


def image_to_mask(arr: np.ndarray) -> np.ndarray:
    if arr.ndim == 3:
        arr = arr[..., 0]
    return arr > 127


def resample_bilinear(arr: np.ndarray, width: int, height: int) -> np.ndarray:
    mode = "L" if arr.ndim == 2 else "RGB"
    im = Image.fromarray(arr, mode=mode).resize((width, height), Image.BILINEAR)
    return np.asarray(im, dtype=np.uint8)
