"""Distortion-strength metrics: interval accuracy and RMSE."""

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from attriqa.errors import DataError, ShapeError

GRID_TOL = 1e-9


class IntervalScheme(BaseModel):
    """L + 1 intervals partitioning [0, 1], one centred on each level k/L.

    Intervals are closed below and open above, except the last which is
    closed at 1 so the top level can be scored.
    """

    model_config = ConfigDict(frozen=True)

    levels: int = Field(default=5, ge=1)

    def boundaries(self) -> np.ndarray:
        n = self.levels
        return np.array([(2 * k - 1) / (2 * n) for k in range(1, n + 1)])

    def interval(self, level: int) -> tuple[float, float]:
        n = self.levels
        if not 0 <= level <= n:
            raise DataError(f"level {level} outside 0..{n}")
        lo = 0.0 if level == 0 else (2 * level - 1) / (2 * n)
        hi = 1.0 if level == n else (2 * level + 1) / (2 * n)
        return lo, hi

    def level_of(self, target: float) -> int:
        k = target * self.levels
        level = int(round(k))
        if abs(k - level) > GRID_TOL * self.levels or not 0 <= level <= self.levels:
            raise DataError(f"target {target} is not on the 1/{self.levels} level grid")
        return level

    def contains(self, level: int, value: float) -> bool:
        lo, hi = self.interval(level)
        if level == self.levels:
            return lo <= value <= hi
        return lo <= value < hi


def _congruent(pred, target) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeError("prediction and target matrices differ", p.shape, t.shape)
    if p.size == 0:
        raise DataError("empty strength matrices")
    return p, t


def interval_hits(pred, target, scheme: IntervalScheme) -> np.ndarray:
    """Boolean matrix: prediction falls in the interval centred on its target."""
    p, t = _congruent(pred, target)
    levels = np.vectorize(scheme.level_of, otypes=[int])(t)
    lo = np.where(levels == 0, 0.0, (2 * levels - 1) / (2 * scheme.levels))
    hi = np.where(levels == scheme.levels, 1.0, (2 * levels + 1) / (2 * scheme.levels))
    upper = np.where(levels == scheme.levels, p <= hi, p < hi)
    return (p >= lo) & upper


def interval_accuracy(pred, target, scheme: IntervalScheme | None = None) -> float:
    return float(interval_hits(pred, target, scheme or IntervalScheme()).mean())


def strength_rmse(pred, target) -> float:
    p, t = _congruent(pred, target)
    return float(np.sqrt(np.mean((p - t) ** 2)))
