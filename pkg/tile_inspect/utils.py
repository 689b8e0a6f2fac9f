import math
import os
import time
from contextlib import contextmanager

import numpy as np


def clean_hparams_dict(hparams_dict):
    return {key: val for key, val in hparams_dict.items() if val is not None}


def mean(lst):
    return float(sum(lst)) / len(lst)


def round_half_up(x):
    """
    Round to the nearest integer with ties going up, elementwise.

    numpy's `np.round` uses banker's rounding, which would send 127.5 to 128
    but 126.5 to 126.
    """
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5).astype(np.int64)


def make_process_dirs(run_name, base_path="ti_runs"):
    base_dir = os.path.join(base_path, run_name)
    i = 0
    while os.path.exists(base_dir + f"_{i}"):
        i += 1
    base_dir += f"_{i}"
    os.makedirs(base_dir)
    return base_dir


def quartiles(values):
    """
    (q1, median, q3) of a list of floats, linear interpolation.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return (math.nan, math.nan, math.nan)
    q1, q2, q3 = np.percentile(arr, [25, 50, 75])
    return float(q1), float(q2), float(q3)


@contextmanager
def stopwatch():
    """
    Measure wall-clock time on the monotonic clock:

        with stopwatch() as elapsed:
            work()
        seconds = elapsed()
    """
    start = time.perf_counter()
    end = None

    def elapsed():
        return (end if end is not None else time.perf_counter()) - start

    try:
        yield elapsed
    finally:
        end = time.perf_counter()
