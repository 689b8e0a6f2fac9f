import dataclasses
from typing import Optional

import numpy as np
from scipy import ndimage

from . import raster, utils
from .errors import ParamError

EPS = 2.0 ** -52

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.int32)
SOBEL_Y = SOBEL_X.T.copy()


@dataclasses.dataclass
class StretchParams:
    """
    Contrast stretch parameters.

    M is the sigmoid midpoint in normalized [0, 1] units (None: the mean of
    the 3x3-median-filtered image), E its slope. n_i and i are the number of
    intensity levels and the initial level of the linear stretch.
    """

    M: Optional[float] = None
    E: float = 4.0
    eps: float = EPS
    n_i: int = 256
    i: int = 0

    def validate(self):
        if self.M is not None and not 0.0 < self.M <= 1.0:
            raise ParamError(f"M must be in (0, 1], got {self.M}")
        if self.E <= 0:
            raise ParamError(f"E must be > 0, got {self.E}")
        if self.eps != EPS:
            raise ParamError(f"eps must be 2**-52, got {self.eps}")
        if self.n_i < 2 or not 0 <= self.i <= self.n_i - 1:
            raise ParamError(f"need n_i >= 2 and 0 <= i <= n_i - 1, got {self.n_i}, {self.i}")
        return self


def stretch_linear(gray, params=None, literal_scale=False):
    """
    Two-pass range stretch: find min/max, then map every pixel with
    (I - min) * (n_i - 1) / (max - min) + i. A constant image is returned
    unchanged.
    """
    raster.check_gray(gray)
    params = (params or StretchParams()).validate()
    lo = int(gray.min())
    hi = int(gray.max())
    if hi == lo:
        return gray.copy()
    levels = params.n_i if literal_scale else params.n_i - 1
    scale = levels / (hi - lo)
    out = utils.round_half_up((gray.astype(np.float64) - lo) * scale + params.i)
    return np.clip(out, 0, min(params.n_i - 1, 255)).astype(np.uint8)


def default_midpoint(gray):
    return float(np.mean(median_filter(gray, 3).astype(np.float64) / 255.0))


def stretch_sigmoid(gray, params=None):
    """
    g = 1 / (1 + (M / (f + eps)) ** E) on the normalized image, rescaled to
    0..255. Monotone non-decreasing in f.
    """
    raster.check_gray(gray)
    params = (params or StretchParams()).validate()
    M = params.M if params.M is not None else default_midpoint(gray)
    f = gray.astype(np.float64) / 255.0
    with np.errstate(over="ignore"):
        g = 1.0 / (1.0 + (M / (f + params.eps)) ** params.E)
    return np.clip(utils.round_half_up(g * 255.0), 0, 255).astype(np.uint8)


def median_filter(gray, window=3):
    if window < 3 or window % 2 == 0:
        raise ParamError(f"median window must be odd and >= 3, got {window}")
    raster.check_gray(gray)
    return ndimage.median_filter(gray, size=window, mode="nearest")


def sobel_edges(gray):
    """
    L1 Sobel magnitude |Gx| + |Gy| with replicate padding, as int32.
    """
    raster.check_gray(gray)
    img = gray.astype(np.int32)
    gx = ndimage.correlate(img, SOBEL_X, mode="nearest")
    gy = ndimage.correlate(img, SOBEL_Y, mode="nearest")
    return np.abs(gx) + np.abs(gy)


def binarize(grad, tau=0.25):
    """
    Mark every pixel whose magnitude reaches tau * max(magnitude).
    """
    if not 0.0 < tau <= 1.0:
        raise ParamError(f"tau must be in (0, 1], got {tau}")
    peak = int(grad.max()) if grad.size else 0
    if peak <= 0:
        return np.zeros(grad.shape, dtype=np.uint8)
    return (grad >= tau * peak).astype(np.uint8)


def enhance(gray, cfg):
    if cfg.stretch_variant.value == "linear":
        return stretch_linear(gray, cfg.stretch, literal_scale=cfg.linear_literal_scale)
    return stretch_sigmoid(gray, cfg.stretch)


def preprocess_pipeline(img, cfg):
    """
    RGB tile -> gray -> contrast stretch -> median -> Sobel -> BinaryMatrix.
    """
    gray = raster.to_gray(img)
    stretched = enhance(gray, cfg)
    smooth = median_filter(stretched, cfg.median_window)
    return binarize(sobel_edges(smooth), cfg.tau)
