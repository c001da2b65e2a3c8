"""MetricReport: the evaluation record written by the eval command."""

import logging
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from attriqa.metrics.correlation import plcc, srcc
from attriqa.metrics.strength import IntervalScheme, interval_accuracy, strength_rmse

logger = logging.getLogger(__name__)


class DistortionBreakdown(BaseModel):
    distortion: str
    accuracy: float = Field(ge=0.0, le=1.0)
    rmse: float = Field(ge=0.0)


class MetricReport(BaseModel):
    accuracy: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    rmse: Optional[float] = Field(default=None, ge=0.0)
    plcc: Optional[float] = Field(default=None, ge=-1.0, le=1.0)
    srcc: Optional[float] = Field(default=None, ge=-1.0, le=1.0)
    counts: dict[str, int] = Field(default_factory=dict)
    per_distortion: list[DistortionBreakdown] = Field(default_factory=list)
    dataset_digest: Optional[str] = None
    checkpoint_digest: Optional[str] = None
    train_dataset_digest: Optional[str] = None
    split: str = "all"

    def summary(self) -> str:
        parts = []
        if self.accuracy is not None:
            parts.append(f"accuracy={self.accuracy:.4f} rmse={self.rmse:.4f}")
        if self.plcc is not None:
            parts.append(f"plcc={self.plcc:.4f} srcc={self.srcc:.4f}")
        counts = " ".join(f"{k}={v}" for k, v in self.counts.items())
        return f"[{self.split}] " + " ".join(parts + [counts]).strip()


def strength_metrics(
    pred: np.ndarray, target: np.ndarray, distortions: Sequence[str], levels: int
) -> tuple[float, float, list[DistortionBreakdown]]:
    scheme = IntervalScheme(levels=levels)
    breakdown = [
        DistortionBreakdown(
            distortion=d,
            accuracy=interval_accuracy(pred[:, j], target[:, j], scheme),
            rmse=strength_rmse(pred[:, j], target[:, j]),
        )
        for j, d in enumerate(distortions)
    ]
    return interval_accuracy(pred, target, scheme), strength_rmse(pred, target), breakdown


def score_metrics(pred: np.ndarray, target: np.ndarray) -> tuple[float, float]:
    return plcc(pred, target), srcc(pred, target)
