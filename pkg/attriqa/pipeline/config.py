"""Per-run configuration: one TOML file, one section per command, flags win."""

import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Literal, Optional, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from attriqa.config.settings import settings
from attriqa.diffcore.schedule import REGRESSOR_SCHEDULE, Schedule
from attriqa.encoder.vit import TuneMode, VitConfig
from attriqa.errors import ConfigError
from attriqa.imaging.schedule import DEFAULT_LEVELS, supported_distortions
from attriqa.util.digests import sha256_json

logger = logging.getLogger(__name__)

SplitName = Literal["all", "train", "val", "test"]
RESOLVED_NAME = "resolved_config.json"

M = TypeVar("M", bound=BaseModel)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GenerateSection(_Section):
    sources: list[Path] = Field(default_factory=list)
    synthetic_sources: int = Field(default=0, ge=0)
    source_size: int = Field(default=64, ge=16)
    repeats: int = Field(default=10, ge=1)
    distortions: list[str] = Field(default_factory=lambda: [d.id for d in supported_distortions()])
    levels: int = Field(default=DEFAULT_LEVELS, ge=1)
    single_distortion: bool = False
    synthetic_scores: bool = True


class BuildRegistrySection(_Section):
    source: Optional[Path] = None
    embeddings: Optional[Path] = None
    dim: int = Field(default=64, ge=1)
    distortions: Optional[list[str]] = None
    manifest: Optional[Path] = None


class TrainDistSection(_Section):
    mode: TuneMode = TuneMode.FULL
    vit: VitConfig = Field(default_factory=VitConfig)
    schedule: Optional[Schedule] = None
    normalize: bool = False
    temperature: float = Field(default=0.07, gt=0)
    augment: bool = False
    precision: Literal["float64", "float32"] = "float64"
    split: SplitName = "train"
    manifest: Optional[Path] = None
    registry: Optional[Path] = None


class ExtractSection(_Section):
    split: SplitName = "all"
    batch_size: int = Field(default=64, ge=1)
    manifest: Optional[Path] = None
    registry: Optional[Path] = None
    checkpoint: Optional[Path] = None


class TrainRegSection(_Section):
    hidden: tuple[int, int] = (128, 64)
    dropout: float = Field(default=0.2, ge=0.0, lt=1.0)
    schedule: Schedule = REGRESSOR_SCHEDULE
    scores: Optional[Path] = None
    split: SplitName = "train"
    val_split: Optional[SplitName] = "val"
    manifest: Optional[Path] = None
    features: Optional[Path] = None
    registry: Optional[Path] = None


class EvalSection(_Section):
    split: SplitName = "test"
    dist_predictions: Optional[Path] = None
    scores: Optional[Path] = None
    manifest: Optional[Path] = None
    registry: Optional[Path] = None
    checkpoint: Optional[Path] = None
    features: Optional[Path] = None
    regressor: Optional[Path] = None
    strengths: bool = True
    quality: bool = True


class SaliencySection(_Section):
    split: SplitName = "test"
    distortions: Optional[list[str]] = None
    limit: int = Field(default=4, ge=1)
    sigma: Optional[float] = Field(default=1.0, ge=0.0)
    alpha: float = Field(default=0.6, ge=0.0, le=1.0)
    csv: bool = False
    manifest: Optional[Path] = None
    registry: Optional[Path] = None
    checkpoint: Optional[Path] = None


class RunConfig(_Section):
    seed: int = Field(default=0, ge=0)
    workers: Optional[int] = Field(default=None, ge=1)
    out: Path = Path("runs/default")
    split_fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    generate: GenerateSection = Field(default_factory=GenerateSection)
    build_registry: BuildRegistrySection = Field(default_factory=BuildRegistrySection)
    train_dist: TrainDistSection = Field(default_factory=TrainDistSection)
    extract: ExtractSection = Field(default_factory=ExtractSection)
    train_reg: TrainRegSection = Field(default_factory=TrainRegSection)
    eval: EvalSection = Field(default_factory=EvalSection)
    saliency: SaliencySection = Field(default_factory=SaliencySection)

    @property
    def digest(self) -> str:
        return sha256_json(self.model_dump(mode="json"))

    def resolved_workers(self) -> int:
        return settings.resolve_workers(self.workers)


def _describe(e: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
    )


def _set(data: dict, dotted: str, value: Any):
    node = data
    *parents, leaf = dotted.split(".")
    for key in parents:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override {dotted}: {key} is not a section")
    node[leaf] = value


def load_run_config(path: Path | str | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Read the TOML file (if any), apply dotted-key overrides, validate."""
    data: dict = {}
    if path:
        path = Path(path)
        try:
            with open(path, "rb") as f:
                data = tomllib.load(f)
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None
    for key, value in (overrides or {}).items():
        if value is not None:
            _set(data, key, value)
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        where = f"{path}: " if path else ""
        raise ConfigError(f"{where}{_describe(e)}") from None
    if not config.out.is_absolute():
        config = config.model_copy(update={"out": settings.resolve_path(config.out)})
    return config


def write_resolved(config: RunConfig, out_dir: Path | str, command: str) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / RESOLVED_NAME
    payload = {"command": command, "config": config.model_dump(mode="json")}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def build_config(model: type[M], where: str, **values) -> M:
    """Validate a component config assembled from run sections; failures are config errors."""
    try:
        return model(**values)
    except ValidationError as e:
        raise ConfigError(f"[{where}] {_describe(e)}") from None
