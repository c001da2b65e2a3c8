"""Score correlations: PLCC and SRCC."""

import numpy as np
from scipy.stats import rankdata

from attriqa.errors import DegenerateInput, ShapeError


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ShapeError("score vectors differ in length", x.shape, y.shape)
    if len(x) < 2:
        raise DegenerateInput(f"correlation needs at least 2 scores, got {len(x)}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DegenerateInput("scores must be finite")
    return x, y


def plcc(x, y) -> float:
    """Pearson r with two-pass means."""
    x, y = _pair(x, y)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateInput("zero variance in a score vector")
    r = float(np.dot(dx, dy)) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0))


def srcc(x, y) -> float:
    """Spearman rho: Pearson of average ranks."""
    x, y = _pair(x, y)
    return plcc(rankdata(x, method="average"), rankdata(y, method="average"))
