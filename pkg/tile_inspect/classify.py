import dataclasses
import enum
from typing import FrozenSet, Set, Tuple

import numpy as np
from scipy import ndimage
from skimage.util.shape import view_as_windows

from . import detect
from .errors import ConfigError, ParamError
from .label import check_label

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class Corner(str, enum.Enum):
    TL = "TL"
    TR = "TR"
    BL = "BL"
    BR = "BR"


@dataclasses.dataclass(frozen=True)
class PinholeResult:
    found: bool = False
    p_count: int = 0


@dataclasses.dataclass(frozen=True)
class CrackResult:
    found: bool = False
    c_count: int = 0


@dataclasses.dataclass(frozen=True)
class BlobResult:
    found: bool = False


@dataclasses.dataclass(frozen=True)
class SpotResult:
    found: bool = False


@dataclasses.dataclass(frozen=True)
class EdgeResult:
    found: bool = False
    e_count: int = 0


@dataclasses.dataclass(frozen=True)
class CornerResult:
    found: bool = False
    corner_ids: FrozenSet[Corner] = frozenset()


DEFECT_CLASSES = ("pinhole", "crack", "blob", "spot", "edge", "corner")


@dataclasses.dataclass(frozen=True)
class DefectReport:
    detection: detect.DetectionResult
    pinhole: PinholeResult = PinholeResult()
    crack: CrackResult = CrackResult()
    blob: BlobResult = BlobResult()
    spot: SpotResult = SpotResult()
    edge: EdgeResult = EdgeResult()
    corner: CornerResult = CornerResult()

    def found(self):
        """
        {class name: found flag} for the six classes, in report order.
        """
        return {name: getattr(self, name).found for name in DEFECT_CLASSES}

    def found_kinds(self):
        return [name for name, hit in self.found().items() if hit]

    def as_dict(self):
        return {
            "n1": self.detection.n1,
            "n2": self.detection.n2,
            "defective": self.detection.defective,
            "pinhole": {"found": self.pinhole.found, "p_count": self.pinhole.p_count},
            "crack": {"found": self.crack.found, "c_count": self.crack.c_count},
            "blob": {"found": self.blob.found},
            "spot": {"found": self.spot.found},
            "edge": {"found": self.edge.found, "e_count": self.edge.e_count},
            "corner": {
                "found": self.corner.found,
                "corner_ids": sorted(c.value for c in self.corner.corner_ids),
            },
        }


def corner_slices(rows, cols, c_range):
    return {
        Corner.TL: (slice(0, c_range), slice(0, c_range)),
        Corner.TR: (slice(0, c_range), slice(cols - c_range, cols)),
        Corner.BL: (slice(rows - c_range, rows), slice(0, c_range)),
        Corner.BR: (slice(rows - c_range, rows), slice(cols - c_range, cols)),
    }


def pinhole_region(rows, cols, cfg):
    """
    Boolean mask of the pinhole search area: everything at least e_range
    pixels from the border, minus the four corner squares.
    """
    region = np.zeros((rows, cols), dtype=bool)
    region[cfg.e_range : rows - cfg.e_range, cfg.e_range : cols - cfg.e_range] = True
    for rs, cs in corner_slices(rows, cols, cfg.c_range).values():
        region[rs, cs] = False
    return region


def classify_pinhole(label, cfg):
    check_label(label)
    rows, cols = label.shape
    cfg.validate_shape(rows, cols)
    region = pinhole_region(rows, cols, cfg)
    if not region.any():
        raise ConfigError(f"empty pinhole search region on a {rows}x{cols} matrix")
    one = label == 1
    zero = label == 0
    plus = (
        zero[1:-1, 1:-1]
        & one[:-2, 1:-1]
        & one[2:, 1:-1]
        & one[1:-1, :-2]
        & one[1:-1, 2:]
        & zero[:-2, :-2]
        & zero[:-2, 2:]
        & zero[2:, :-2]
        & zero[2:, 2:]
    )
    hits = np.zeros((rows, cols), dtype=bool)
    hits[1:-1, 1:-1] = plus
    p_count = int(np.count_nonzero(hits & region))
    return PinholeResult(found=p_count > 0, p_count=p_count)


def classify_crack(label, cfg):
    """
    Size the 8-connected components of label-1 cells. Returns the result and
    a copy of `label` where every component longer than c_length is
    relabeled 3, so later classifiers ignore crack pixels.
    """
    check_label(label)
    components, n = ndimage.label(label == 1, structure=EIGHT_CONNECTED)
    claimed = label.copy()
    if n == 0:
        return CrackResult(found=False, c_count=0), claimed
    sizes = np.bincount(components.ravel(), minlength=n + 1)
    sizes[0] = 0
    c_count = int(sizes.max())
    long_ids = np.flatnonzero(sizes > cfg.c_length)
    if long_ids.size:
        claimed[np.isin(components, long_ids)] = 3
    return CrackResult(found=c_count > cfg.c_length, c_count=c_count), claimed


def square_block_mask(label, k):
    """
    Boolean mask of the centers of every k x k window made only of 2s.
    """
    if k < 3 or k % 2 == 0 or k > min(label.shape):
        raise ParamError(f"block size must be odd, >= 3 and fit in {label.shape}, got {k}")
    windows = view_as_windows(np.ascontiguousarray(label == 2), (k, k))
    full = windows.all(axis=(2, 3))
    half = k // 2
    centers = np.zeros(label.shape, dtype=bool)
    centers[half : half + full.shape[0], half : half + full.shape[1]] = full
    return centers


def find_square_blocks(label, k) -> Set[Tuple[int, int]]:
    check_label(label)
    centers = square_block_mask(label, k)
    return {(int(i), int(j)) for i, j in np.argwhere(centers)}


def classify_blob(label, cfg):
    check_label(label)
    return BlobResult(found=bool(square_block_mask(label, cfg.blob_matx).any()))


def classify_spot(label, cfg):
    """
    A label-2 component with a spot_matx block but no blob_matx block is a
    spot; one with a blob_matx block belongs to the blob classifier.
    """
    check_label(label)
    if cfg.spot_matx >= cfg.blob_matx:
        raise ConfigError("spot_matx must be smaller than blob_matx")
    spot_centers = square_block_mask(label, cfg.spot_matx)
    if not spot_centers.any():
        return SpotResult(found=False)
    components, _ = ndimage.label(label == 2, structure=EIGHT_CONNECTED)
    spot_ids = set(np.unique(components[spot_centers]))
    if min(label.shape) >= cfg.blob_matx:
        blob_ids = set(np.unique(components[square_block_mask(label, cfg.blob_matx)]))
    else:
        blob_ids = set()
    return SpotResult(found=bool(spot_ids - blob_ids))


def classify_edge(label, cfg):
    check_label(label)
    rows, cols = label.shape
    cfg.validate_shape(rows, cols)
    c = cfg.c_range
    bands = (
        label[0, c : cols - c],
        label[rows - 1, c : cols - c],
        label[c : rows - c, 0],
        label[c : rows - c, cols - 1],
    )
    # 1, 2 and crack-claimed 3 all count
    hit = any(np.count_nonzero(band) for band in bands)
    return EdgeResult(found=hit, e_count=int(hit))


def classify_corner(label, cfg):
    check_label(label)
    rows, cols = label.shape
    cfg.validate_shape(rows, cols)
    area = cfg.c_range * cfg.c_range
    broken = frozenset(
        corner
        for corner, (rs, cs) in corner_slices(rows, cols, cfg.c_range).items()
        if np.count_nonzero(label[rs, cs] == 2) == area
    )
    return CornerResult(found=bool(broken), corner_ids=broken)


def classify_all(label, detection, cfg):
    """
    Run the six classifiers on a detected-defective tile. The crack pass goes
    first and the others read its relabeled matrix.
    """
    check_label(label)
    if not detection.defective:
        return DefectReport(detection=detection)
    crack, claimed = classify_crack(label, cfg)
    return DefectReport(
        detection=detection,
        pinhole=classify_pinhole(claimed, cfg),
        crack=crack,
        blob=classify_blob(claimed, cfg),
        spot=classify_spot(claimed, cfg),
        edge=classify_edge(claimed, cfg),
        corner=classify_corner(claimed, cfg),
    )
