import dataclasses

import numpy as np

from .errors import DimensionMismatch


@dataclasses.dataclass(frozen=True)
class DetectionResult:
    n1: int
    n2: int
    defective: bool


def count_marked(bin_matrix):
    return int(np.count_nonzero(np.asarray(bin_matrix) == 1))


def detect_defect(test, reference, margin=0):
    """
    A tile is defective when its binary edge map has more marked pixels
    than the reference's: n1 > n2 (+ margin, 0 by default).
    """
    if test.shape != reference.shape:
        raise DimensionMismatch(
            f"test matrix is {test.shape} but reference is {reference.shape}"
        )
    n1 = count_marked(test)
    n2 = count_marked(reference)
    return DetectionResult(n1=n1, n2=n2, defective=n1 > n2 + margin)
