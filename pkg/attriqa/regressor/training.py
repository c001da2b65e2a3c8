"""Regressor training on attribute-probability matrices."""

import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd
import torch
from pydantic import BaseModel, ConfigDict, Field

from attriqa.datagen.rng import named_stream
from attriqa.diffcore.checkpoint import read_tensors, write_tensors
from attriqa.diffcore.params import backward
from attriqa.diffcore.schedule import REGRESSOR_SCHEDULE, Schedule
from attriqa.errors import ConfigError, DataError, NumericalError, SchemaError
from attriqa.regressor.model import QualityRegressor, RegressorConfig
from attriqa.util.artifacts import ArtifactHeader

logger = logging.getLogger(__name__)

REGRESSOR_FORMAT = "attriqa-regressor"
REGRESSOR_VERSION = 1


class RegTrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    hidden: tuple[int, int] = (128, 64)
    dropout: float = Field(default=0.2, ge=0.0, lt=1.0)
    schedule: Schedule = REGRESSOR_SCHEDULE
    seed: int = 0


@dataclass
class RegressorResult:
    model: QualityRegressor
    columns: list[str]
    history: list[float] = field(default_factory=list)
    val_history: list[float] = field(default_factory=list)
    best_epoch: int = 0


def check_schema(df: pd.DataFrame, columns: Sequence[str], what: str = "attribute matrix"):
    """The matrix must hold exactly record_id and the expected columns, in order."""
    expected = ["record_id", *columns]
    if list(df.columns) != expected:
        extra = [c for c in df.columns if c not in expected]
        missing = [c for c in expected if c not in df.columns]
        raise SchemaError(
            f"{what} columns do not match: unexpected {extra}, missing {missing}"
            if extra or missing
            else f"{what} columns are out of order"
        )


def feature_matrix(df: pd.DataFrame, columns: Sequence[str]) -> np.ndarray:
    check_schema(df, columns)
    x = df[list(columns)].to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DataError("attribute matrix holds non-finite values")
    return x


def align_scores(df: pd.DataFrame, scores: dict[str, float]) -> np.ndarray:
    missing = [r for r in df["record_id"] if r not in scores]
    if missing:
        raise DataError(f"{len(missing)} records have no score (first: {missing[0]})")
    return np.array([scores[r] for r in df["record_id"]], dtype=np.float64)


def _mse(model: QualityRegressor, x: torch.Tensor, y: torch.Tensor) -> float:
    model.eval()
    with torch.no_grad():
        return float(((model(x) - y) ** 2).mean())


def train_regressor(
    x_train: np.ndarray,
    y_train: np.ndarray,
    columns: Sequence[str],
    config: RegTrainConfig,
    x_val: Optional[np.ndarray] = None,
    y_val: Optional[np.ndarray] = None,
) -> RegressorResult:
    """Minimize MSE against normalized scores, keeping the best-validation weights."""
    if len(x_train) != len(y_train):
        raise ConfigError(f"{len(x_train)} feature rows but {len(y_train)} scores")
    if len(x_train) == 0:
        raise ConfigError("no training rows")
    if x_train.shape[1] != len(columns):
        raise ConfigError(f"{x_train.shape[1]} features for {len(columns)} columns")
    schedule = config.schedule
    model = QualityRegressor(
        RegressorConfig(
            input_dim=len(columns), hidden=config.hidden, dropout=config.dropout, init_seed=config.seed
        )
    )
    model.start_from_constant(float(np.mean(y_train)))
    group = model.param_group()
    optimizer = torch.optim.Adam(
        list(group.params.values()), lr=schedule.max_lr, weight_decay=schedule.weight_decay
    )
    lr_schedule = schedule.scheduler(optimizer)
    shuffle = named_stream(config.seed, "regressor-batches")
    dropout_gen = torch.Generator().manual_seed(config.seed)

    xt, yt = torch.from_numpy(x_train), torch.from_numpy(y_train)
    has_val = x_val is not None and y_val is not None and len(x_val) > 0
    if has_val:
        xv, yv = torch.from_numpy(x_val), torch.from_numpy(y_val)

    result = RegressorResult(model, list(columns))
    best, best_state = float("inf"), None
    logger.info(f"Training regressor on {len(xt)} rows, {len(columns)} features")
    for epoch in range(schedule.epochs):
        model.train()
        order = torch.as_tensor(shuffle.permutation(len(xt)))
        total = 0.0
        for start in range(0, len(order), schedule.batch_size):
            idx = order[start : start + schedule.batch_size]
            optimizer.zero_grad(set_to_none=True)
            loss = ((model(xt[idx], dropout_gen) - yt[idx]) ** 2).mean()
            if not torch.isfinite(loss):
                raise NumericalError(f"non-finite regressor loss at epoch {epoch + 1}")
            backward(loss)
            optimizer.step()
            total += float(loss.detach()) * len(idx)
        lr_schedule.step()
        result.history.append(total / len(xt))
        score = _mse(model, xv, yv) if has_val else result.history[-1]
        if has_val:
            result.val_history.append(score)
        if score < best:
            best, best_state, result.best_epoch = score, copy.deepcopy(model.state_dict()), epoch + 1
        logger.debug(f"Epoch {epoch + 1}: train {result.history[-1]:.6f} selection {score:.6f}")
    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    logger.info(f"Kept epoch {result.best_epoch} (selection MSE {best:.6f})")
    return result


def save_regressor(result: RegressorResult, path: Path | str, config: RegTrainConfig, inputs: dict[str, str]) -> str:
    header = ArtifactHeader(
        format=REGRESSOR_FORMAT,
        version=REGRESSOR_VERSION,
        inputs=inputs,
        meta={
            "model": result.model.config.model_dump(mode="json"),
            "train": config.model_dump(mode="json"),
            "columns": result.columns,
            "history": result.history,
            "val_history": result.val_history,
            "best_epoch": result.best_epoch,
        },
    )
    tensors = {k: v.detach().numpy() for k, v in result.model.state_dict().items()}
    return write_tensors(path, header, tensors)


def load_regressor(path: Path | str, columns: Sequence[str] | None = None) -> tuple[QualityRegressor, ArtifactHeader]:
    header, tensors = read_tensors(path)
    header.require(REGRESSOR_FORMAT, REGRESSOR_VERSION, path)
    model_config = RegressorConfig.model_validate(header.meta["model"])
    if columns is not None:
        if model_config.input_dim != len(columns):
            raise ConfigError(
                f"regressor {path} expects {model_config.input_dim} inputs, matrix has {len(columns)}"
            )
        if list(header.meta["columns"]) != list(columns):
            raise ConfigError(f"regressor {path} was trained on different attribute columns")
    model = QualityRegressor(model_config)
    model.load_state_dict({k: torch.from_numpy(v) for k, v in tensors.items()})
    model.eval()
    return model, header
