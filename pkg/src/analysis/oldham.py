from typing import Tuple

import numpy as np
from numpy.random import SFC64, Generator, SeedSequence
from numpy.typing import ArrayLike

from analysis.strategies import make_change_score
from utils.errors import UsageError

MIN_OLDHAM_N = 10


def sample_correlation(a: ArrayLike, b: ArrayLike) -> float:
    """Pearson correlation; NaN when either column is constant."""
    a = np.asarray(a, dtype=float) - np.mean(a)
    b = np.asarray(b, dtype=float) - np.mean(b)
    denom = np.sqrt((a @ a) * (b @ b))
    if denom == 0:
        return float("nan")
    return float((a @ b) / denom)


def oldham_correlation(n: int, seed: int, y0_sd: float = 1.0, y1_sd: float = 1.0) -> Tuple[float, float]:
    """
    Correlations of two unrelated measurements with their difference.

    With equal variances both are +/- 1/sqrt(2) in expectation although y0 and
    y1 share nothing; the association is built into the change score.
    """
    if n < MIN_OLDHAM_N:
        raise UsageError(f"n must be at least {MIN_OLDHAM_N}, got {n}", {"n": n})
    if y0_sd < 0 or y1_sd < 0:
        raise UsageError("standard deviations must be non-negative")

    rng = Generator(SFC64(SeedSequence(seed)))
    draws = rng.standard_normal((n, 2))
    y0 = y0_sd * draws[:, 0]
    y1 = y1_sd * draws[:, 1]
    delta = make_change_score(y0, y1)
    return sample_correlation(y0, delta), sample_correlation(y1, delta)
