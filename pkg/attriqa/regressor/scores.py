"""Quality-score normalization to [0, 1], higher meaning better."""

import logging
from enum import Enum
from pathlib import Path

import pandas as pd
from pydantic import BaseModel, ConfigDict, PrivateAttr, model_validator

from attriqa.errors import DataError, SchemaError

logger = logging.getLogger(__name__)

SCORE_COLUMNS = ["record_id", "raw_score", "lo", "hi", "polarity"]


class Polarity(str, Enum):
    HIGHER_BETTER = "higher-better"
    LOWER_BETTER = "lower-better"


class ScoreNormalizer(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lo: float
    hi: float
    polarity: Polarity = Polarity.HIGHER_BETTER
    _clamped: int = PrivateAttr(default=0)

    @model_validator(mode="after")
    def _ordered(self):
        if not self.hi > self.lo:
            raise ValueError(f"score range needs hi > lo, got [{self.lo}, {self.hi}]")
        return self

    @property
    def clamped(self) -> int:
        """Raw scores pulled back into range so far."""
        return self._clamped


def normalize_score(raw: float, normalizer: ScoreNormalizer) -> float:
    lo, hi = normalizer.lo, normalizer.hi
    if raw < lo or raw > hi:
        normalizer._clamped += 1
        logger.warning(f"Score {raw} outside [{lo}, {hi}], clamped")
        raw = min(max(raw, lo), hi)
    s = (raw - lo) / (hi - lo)
    if normalizer.polarity == Polarity.LOWER_BETTER:
        s = 1.0 - s
    return s


def read_scores(path: Path | str) -> dict[str, float]:
    """Scores file: record_id, raw_score, lo, hi, polarity; returns normalized scores."""
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype={"record_id": str, "polarity": str})
    except FileNotFoundError:
        raise DataError(f"scores file {path} not found") from None
    if list(df.columns) != SCORE_COLUMNS:
        raise SchemaError(f"{path}: expected columns {SCORE_COLUMNS}, found {list(df.columns)}")
    if df["record_id"].duplicated().any():
        raise DataError(f"{path}: duplicate record ids")
    normalizers: dict[tuple, ScoreNormalizer] = {}
    out = {}
    for row in df.itertuples(index=False):
        key = (float(row.lo), float(row.hi), row.polarity)
        if key not in normalizers:
            try:
                normalizers[key] = ScoreNormalizer(lo=key[0], hi=key[1], polarity=key[2])
            except ValueError as e:
                raise DataError(f"{path}: {e}") from None
        out[row.record_id] = normalize_score(float(row.raw_score), normalizers[key])
    clamped = sum(n.clamped for n in normalizers.values())
    if clamped:
        logger.warning(f"{clamped} of {len(out)} scores in {path} were out of range")
    return out
