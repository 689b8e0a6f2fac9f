"""
Turn a test BinaryMatrix into the 0/1/2 LabelMatrix the classifiers read,
and persist label matrices as text.

0 is background, 1 a thin edge pixel, 2 a pixel that survives hole filling
followed by erosion (a solid region), 3 a pixel claimed by the crack
classifier (never written here).
"""
import enum

import numpy as np
from scipy import ndimage

from .errors import DimensionError, DimensionMismatch, ModeError, ParseError

FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)
SQUARE_3X3 = np.ones((3, 3), dtype=bool)
LABEL_VALUES = (0, 1, 2, 3)


class TileMode(str, enum.Enum):
    PLANE = "plane"
    PRINTED = "printed"


def check_binary(bin_matrix):
    if not isinstance(bin_matrix, np.ndarray) or bin_matrix.ndim != 2:
        raise DimensionError("a binary matrix must be a 2-D array")
    if bin_matrix.size and not np.isin(bin_matrix, (0, 1)).all():
        raise DimensionError("binary matrix cells must be 0 or 1")
    return bin_matrix


def check_label(label):
    if not isinstance(label, np.ndarray) or label.ndim != 2:
        raise DimensionError("a label matrix must be a 2-D array")
    if label.size and not np.isin(label, LABEL_VALUES).all():
        raise DimensionError("label matrix cells must be in {0, 1, 2, 3}")
    return label


def fill_holes(bin_matrix, framed=False):
    """
    Set enclosed background to 1 (4-connected flood).

    Unframed, a 0-region fills iff it does not touch the image border.
    Framed, the border counts as a wall too: every 0-region fills except the
    largest one touching the border (the tile background), so break regions
    cut off by a contour and the border fill as well.
    """
    check_binary(bin_matrix)
    background = bin_matrix == 0
    regions, n_regions = ndimage.label(background, structure=FOUR_CONNECTED)
    if n_regions == 0:
        return bin_matrix.astype(np.uint8)
    border_ids = np.unique(
        np.concatenate(
            [regions[0, :], regions[-1, :], regions[:, 0], regions[:, -1]]
        )
    )
    border_ids = border_ids[border_ids > 0]
    keep = np.zeros(n_regions + 1, dtype=bool)
    if framed:
        if border_ids.size:
            sizes = np.bincount(regions.ravel(), minlength=n_regions + 1)
            # argmax returns the first (lowest, row-major) id among ties
            largest = border_ids[np.argmax(sizes[border_ids])]
            keep[largest] = True
    else:
        keep[border_ids] = True
    filled = background & ~keep[regions]
    return (bin_matrix.astype(bool) | filled).astype(np.uint8)


def erode(bin_matrix, framed=False):
    """
    Binary erosion with a 3x3 square. Outside the image counts as 0, or as
    1 when the matrix came out of framed filling.
    """
    check_binary(bin_matrix)
    if bin_matrix.size == 0:
        return bin_matrix.astype(np.uint8)
    eroded = ndimage.binary_erosion(
        bin_matrix.astype(bool), structure=SQUARE_3X3, border_value=int(framed)
    )
    return eroded.astype(np.uint8)


def reference_mask(ref_bin, dilate=0):
    mask = ref_bin.astype(bool)
    if dilate > 0:
        mask = ndimage.binary_dilation(
            mask, structure=np.ones((2 * dilate + 1, 2 * dilate + 1), dtype=bool)
        )
    return mask


def morph_matrix(bin_matrix):
    return erode(fill_holes(bin_matrix, framed=True), framed=True)


def build_label_matrix(test_bin, mode, ref_bin=None, ref_dilate=0):
    """
    Label a test matrix: its 1s stay 1 and every cell of
    ``erode(fill_holes(test_bin, framed=True), framed=True)`` becomes 2.
    Note the framed erosion; ``erode``'s own default treats the outside as 0.

    Printed tiles then zero every cell the reference explains: its marked
    pixels and its own solid regions (background enclosed by the print),
    optionally widened by ``ref_dilate``.
    """
    check_binary(test_bin)
    mode = TileMode(mode)
    if mode is TileMode.PRINTED:
        if ref_bin is None:
            raise ModeError("printed tiles need a reference matrix")
        if ref_bin.shape != test_bin.shape:
            raise DimensionMismatch(
                f"test matrix is {test_bin.shape} but reference is {ref_bin.shape}"
            )
    label = test_bin.astype(np.uint8)
    label[morph_matrix(test_bin) == 1] = 2
    if mode is TileMode.PRINTED:
        check_binary(ref_bin)
        explained = ref_bin.astype(bool) | morph_matrix(ref_bin).astype(bool)
        label[reference_mask(explained, ref_dilate)] = 0
    return label


def format_matrix(label):
    check_label(label)
    rows, cols = label.shape
    lines = [f"{rows} {cols}"]
    lines.extend(" ".join(str(int(v)) for v in row) for row in label)
    return "\n".join(lines) + "\n"


def parse_matrix(text, source="<matrix>"):
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines = lines[:-1]
    if not lines:
        raise ParseError(f"{source}: empty file")
    header = lines[0].split(" ")
    if len(header) != 2 or not all(tok.isdigit() for tok in header):
        raise ParseError(f"{source}: bad header {lines[0]!r}")
    rows, cols = int(header[0]), int(header[1])
    body = lines[1:]
    if len(body) != rows:
        raise ParseError(f"{source}: header says {rows} rows, found {len(body)}")
    label = np.zeros((rows, cols), dtype=np.uint8)
    for r, line in enumerate(body):
        tokens = line.split(" ")
        if len(tokens) != cols or (cols == 0 and line != ""):
            raise ParseError(f"{source}: row {r} has {len(tokens)} tokens, expected {cols}")
        for c, tok in enumerate(tokens):
            if tok not in ("0", "1", "2", "3"):
                raise ParseError(f"{source}: row {r} col {c}: bad token {tok!r}")
            label[r, c] = int(tok)
    return label


def save_matrix(label, path):
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(format_matrix(label))


def load_matrix(path):
    with open(path, "r", encoding="ascii", newline="") as f:
        text = f.read()
    return parse_matrix(text, source=str(path))
