"""Distortion-model training on a manifest and its checkpoint format."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional, Sequence

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field, model_validator

from attriqa.attributes.model import DistortionIdentifier, check_simplex, distortion_loss
from attriqa.attributes.registry import AttributeRegistry
from attriqa.datagen.manifest import ManifestRecord, ground_truth_matrix
from attriqa.datagen.rng import named_stream
from attriqa.diffcore.checkpoint import read_tensors, write_tensors
from attriqa.diffcore.params import backward, check_finite, trainable_parameters
from attriqa.diffcore.schedule import FULL_SCHEDULE, PROMPT_SCHEDULE, Schedule
from attriqa.encoder.vit import PromptMode, TuneMode, VisionEncoder, VitConfig, prepare_images
from attriqa.errors import ConfigError, NumericalError
from attriqa.imaging.image import load_png
from attriqa.util.artifacts import ArtifactHeader, require_binding

logger = logging.getLogger(__name__)

MODEL_FORMAT = "attriqa-distortion-model"
MODEL_VERSION = 1


class DistTrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: TuneMode = TuneMode.FULL
    vit: VitConfig = Field(default_factory=VitConfig)
    schedule: Optional[Schedule] = None
    normalize: bool = False
    temperature: float = Field(default=0.07, gt=0)
    augment: bool = False
    precision: Literal["float64", "float32"] = "float64"
    seed: int = 0

    @model_validator(mode="after")
    def _prompt_mode(self):
        if self.mode != TuneMode.FULL:
            if self.vit.prompt_len < 1:
                raise ValueError(f"{self.mode.value} prompt tuning needs prompt_len >= 1")
            self.vit = self.vit.model_copy(update={"prompt_mode": PromptMode(self.mode.value)})
        return self

    def resolved_schedule(self) -> Schedule:
        if self.schedule is not None:
            return self.schedule
        return FULL_SCHEDULE if self.mode == TuneMode.FULL else PROMPT_SCHEDULE

    @property
    def dtype(self) -> torch.dtype:
        return torch.float32 if self.precision == "float32" else torch.float64


@dataclass
class TrainResult:
    model: DistortionIdentifier
    history: list[float] = field(default_factory=list)
    initial_loss: float = float("nan")


def load_images(
    records: Sequence[ManifestRecord],
    root: Path,
    vit: VitConfig,
    dtype=torch.float64,
    workers: int = 1,
) -> torch.Tensor:
    """Stack record images, center-cropped and resized for the encoder."""
    paths = [Path(root) / r.output_path for r in records]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            images = list(pool.map(load_png, paths))
    else:
        images = [load_png(p) for p in paths]
    return prepare_images(images, vit, dtype)


def build_model(
    config: DistTrainConfig, registry: AttributeRegistry, dtype: torch.dtype = torch.float64
) -> DistortionIdentifier:
    encoder = VisionEncoder(config.vit).to(dtype)
    return DistortionIdentifier(encoder, registry, config.normalize, config.temperature)


def random_flips(images: torch.Tensor, rng: np.random.Generator) -> torch.Tensor:
    """Mirror each image left-right and top-bottom, each with probability 1/2.

    Distortion strength does not change under mirroring, so targets stay as they are.
    """
    n = len(images)
    across = torch.as_tensor(rng.random(n) < 0.5).view(n, 1, 1, 1)
    down = torch.as_tensor(rng.random(n) < 0.5).view(n, 1, 1, 1)
    images = torch.where(across, images.flip(-1), images)
    return torch.where(down, images.flip(-2), images)


def _mean_loss(model: DistortionIdentifier, images: torch.Tensor, targets: torch.Tensor, batch: int) -> float:
    total = 0.0
    with torch.no_grad():
        for start in range(0, len(images), batch):
            _, pred = model(images[start : start + batch])
            n = len(pred)
            total += float(distortion_loss(pred, targets[start : start + batch])) * n
    return total / max(1, len(images))


def train_distortion_model(
    records: Sequence[ManifestRecord],
    root: Path,
    registry: AttributeRegistry,
    config: DistTrainConfig,
    workers: int = 1,
) -> TrainResult:
    """Minimize the distortion loss over the mode's trainable tensors and the attribute weights."""
    if not records:
        raise ConfigError("no training records")
    schedule = config.resolved_schedule()
    dtype = config.dtype
    targets = torch.from_numpy(ground_truth_matrix(records, registry.distortions)).to(dtype)
    images = load_images(records, root, config.vit, dtype, workers)
    record_ids = [r.record_id for r in records]

    torch.manual_seed(config.seed)
    model = build_model(config, registry, dtype)
    groups = model.param_groups(config.mode)
    params = trainable_parameters(groups)
    optimizer = torch.optim.Adam(params, lr=schedule.max_lr, weight_decay=schedule.weight_decay)
    lr_schedule = schedule.scheduler(optimizer)
    shuffle = named_stream(config.seed, "batches")
    flips = named_stream(config.seed, "flips")

    trainable = sum(g.numel() for g in groups if g.trainable)
    logger.info(
        f"Training {config.mode.value} mode on {len(records)} records: "
        f"{trainable} trainable scalars, {schedule.epochs} epochs, max lr {schedule.max_lr}, "
        f"{config.precision}{', mirrored batches' if config.augment else ''}"
    )
    initial = _mean_loss(model, images, targets, schedule.batch_size)
    logger.info(f"Epoch 0 loss {initial:.6f}")

    history = []
    for epoch in range(schedule.epochs):
        model.train()
        order = shuffle.permutation(len(records))
        total = 0.0
        for start in range(0, len(order), schedule.batch_size):
            idx = torch.as_tensor(order[start : start + schedule.batch_size])
            optimizer.zero_grad(set_to_none=True)
            batch = random_flips(images[idx], flips) if config.augment else images[idx]
            _, pred = model(batch)
            loss = distortion_loss(pred, targets[idx])
            if not torch.isfinite(loss):
                bad = [record_ids[int(i)] for i in idx]
                raise NumericalError(
                    f"non-finite loss at epoch {epoch + 1}, batch records: {', '.join(bad)}"
                )
            backward(loss)
            optimizer.step()
            total += float(loss.detach()) * len(idx)
        lr_schedule.step()
        check_finite(groups)
        check_simplex(model.weights())
        history.append(total / len(records))
        logger.info(
            f"Epoch {epoch + 1}/{schedule.epochs} loss {history[-1]:.6f} "
            f"lr {optimizer.param_groups[0]['lr']:.2e}"
        )
    model.eval()
    return TrainResult(model, history, initial)


def save_distortion_model(
    result: TrainResult,
    path: Path | str,
    config: DistTrainConfig,
    manifest_digest: str | None = None,
) -> str:
    model = result.model
    header = ArtifactHeader(
        format=MODEL_FORMAT,
        version=MODEL_VERSION,
        inputs={"registry": model.registry_digest, "manifest": manifest_digest or ""},
        meta={
            "config": config.model_dump(mode="json"),
            "distortions": model.distortions,
            "history": result.history,
            "initial_loss": result.initial_loss,
        },
    )
    tensors = {k: v.detach().cpu().numpy() for k, v in model.state_dict().items()}
    digest = write_tensors(path, header, tensors)
    logger.info(f"Checkpoint written to {path}")
    return digest


def load_distortion_model(
    path: Path | str, registry: AttributeRegistry
) -> tuple[DistortionIdentifier, ArtifactHeader]:
    """Rebuild a frozen model; the registry must be the one it was trained with."""
    header, tensors = read_tensors(path)
    header.require(MODEL_FORMAT, MODEL_VERSION, path)
    require_binding("registry", header.inputs.get("registry"), registry.digest)
    config = DistTrainConfig.model_validate(header.meta["config"])
    model = build_model(config, registry)
    state = {k: torch.from_numpy(v) for k, v in tensors.items()}
    missing, unexpected = model.load_state_dict(state, strict=False)
    if missing or unexpected:
        raise ConfigError(
            f"checkpoint {path} does not match the model: missing {missing}, unexpected {unexpected}"
        )
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)
    return model, header
