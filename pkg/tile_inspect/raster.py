"""
Raster ingestion: decode PNG/BMP files into RGB arrays, crop them to a
common size and convert them to gray level.

RGB images are (height, width, 3) uint8 arrays and gray images are
(height, width) uint8 arrays.
"""
import os

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import utils
from .errors import DecodeError, DimensionError

SUPPORTED_FORMATS = ("PNG", "BMP")

# ITU-R BT.601 luma
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def check_rgb(img):
    if not isinstance(img, np.ndarray) or img.ndim != 3 or img.shape[2] != 3:
        raise DimensionError(
            f"expected a (height, width, 3) array, got {getattr(img, 'shape', type(img))}"
        )
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise DimensionError(f"empty image of shape {img.shape}")
    if img.dtype != np.uint8:
        raise DimensionError(f"expected uint8 pixels, got {img.dtype}")
    return img


def check_gray(img):
    if not isinstance(img, np.ndarray) or img.ndim != 2:
        raise DimensionError(
            f"expected a (height, width) array, got {getattr(img, 'shape', type(img))}"
        )
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise DimensionError(f"empty image of shape {img.shape}")
    if img.dtype != np.uint8:
        raise DimensionError(f"expected uint8 pixels, got {img.dtype}")
    return img


def load_image(path):
    """
    Decode a PNG or BMP file into an RGB array. Single-channel files are
    expanded to three identical channels; alpha is dropped.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    try:
        with Image.open(path) as pil_img:
            if pil_img.format not in SUPPORTED_FORMATS:
                raise DecodeError(f"{path}: unsupported format {pil_img.format}")
            pil_img.load()
            if pil_img.mode in ("L", "1", "P", "RGBA", "LA", "I;16", "I"):
                if pil_img.mode in ("I;16", "I"):
                    raise DecodeError(f"{path}: unsupported bit depth ({pil_img.mode})")
                pil_img = pil_img.convert("RGB")
            elif pil_img.mode != "RGB":
                raise DecodeError(f"{path}: unsupported pixel mode {pil_img.mode}")
            data = np.asarray(pil_img, dtype=np.uint8)
    except (DecodeError, FileNotFoundError):
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError, EOFError) as e:
        raise DecodeError(f"{path}: {e}") from e
    return np.ascontiguousarray(data)


def save_image(img, path):
    """
    Encode an RGB (or gray) array losslessly; the format follows the
    file extension (.png or .bmp).
    """
    if img.ndim == 2:
        pil_img = Image.fromarray(check_gray(img), mode="L")
    else:
        pil_img = Image.fromarray(check_rgb(img), mode="RGB")
    ext = os.path.splitext(str(path))[1].lower()
    fmt = {".png": "PNG", ".bmp": "BMP"}.get(ext)
    if fmt is None:
        raise DecodeError(f"{path}: only .png and .bmp are supported")
    pil_img.save(path, format=fmt)


def trim(img, m, n):
    """
    Centered m x n (width x height) crop.
    """
    height, width = img.shape[:2]
    if not (1 <= m <= width and 1 <= n <= height):
        raise DimensionError(f"cannot trim a {width}x{height} image to {m}x{n}")
    left = (width - m) // 2
    top = (height - n) // 2
    return img[top : top + n, left : left + m].copy()


def to_gray(img):
    check_rgb(img)
    rgb = img.astype(np.float64)
    wr, wg, wb = LUMA_WEIGHTS
    gray = wr * rgb[..., 0] + wg * rgb[..., 1] + wb * rgb[..., 2]
    return np.clip(utils.round_half_up(gray), 0, 255).astype(np.uint8)
