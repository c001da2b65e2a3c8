import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from attriqa.datagen.manifest import (
    AppliedDistortion,
    ManifestRecord,
    manifest_header,
    write_manifest,
)
from attriqa.datagen.rng import MASK_64, record_stream
from attriqa.errors import ConfigError, DataError
from attriqa.imaging.bank import apply_sequence
from attriqa.imaging.image import Image, load_png, save_png
from attriqa.imaging.schedule import (
    DEFAULT_LEVELS,
    StrengthLevel,
    parse_distortions,
    supported_distortions,
)
from attriqa.util.digests import sha256_file, sha256_json

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"
REJECTS_NAME = "rejects.jsonl"


class GeneratorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    master_seed: int = Field(default=0, ge=0, le=MASK_64)
    repeats: int = Field(default=10, ge=1)
    distortions: list[str] = Field(
        default_factory=lambda: [d.id for d in supported_distortions()]
    )
    levels: int = Field(default=DEFAULT_LEVELS, ge=1)
    sources: list[Path] = Field(default_factory=list)
    single_distortion: bool = False
    synthetic_scores: bool = False

    @field_validator("distortions")
    @classmethod
    def _known(cls, v):
        if not v:
            raise ValueError("distortion set is empty")
        ids = [d.id for d in parse_distortions(v)]
        if len(set(ids)) != len(ids):
            raise ValueError("distortion set has duplicates")
        return ids


@dataclass
class GenerationResult:
    records: list[ManifestRecord]
    manifest_path: Path
    manifest_digest: str
    rejects: list[dict] = field(default_factory=list)


def sample_applied(
    rng: np.random.Generator, distortion_ids: Sequence[str], levels: int, single: bool = False
) -> list[tuple[str, int]]:
    """Draw K uniformly from [1, |D|], then K distinct distortions in sampled order."""
    n = len(distortion_ids)
    k = 1 if single else int(rng.integers(1, n + 1))
    chosen = rng.choice(n, size=k, replace=False)
    picked = rng.integers(1, levels + 1, size=k)
    return [(distortion_ids[int(j)], int(lv)) for j, lv in zip(chosen, picked)]


def synthetic_score(applied: Sequence[AppliedDistortion]) -> float:
    """S(I) = 1 - mean applied strength."""
    return 1.0 - float(np.mean([a.strength for a in applied]))


class DatasetGenerator:
    def __init__(self, config: GeneratorConfig, out_dir: Path, workers: int = 1):
        self.config = config
        self.out_dir = Path(out_dir)
        self.workers = max(1, workers)
        self.distortions = parse_distortions(config.distortions)
        self._by_id = {d.id: d for d in self.distortions}

    def generate(self) -> GenerationResult:
        """Main generation process."""
        sources, digests, rejects = self._load_sources()
        tasks = [
            (sid, v) for sid in sorted(sources) for v in range(self.config.repeats)
        ]
        logger.info(
            f"Generating {len(tasks)} images from {len(sources)} sources "
            f"({self.config.repeats} variants each, {self.workers} workers)"
        )

        def run(task):
            sid, v = task
            return self._make_record(sid, v, sources[sid])

        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                records = list(pool.map(run, tasks))
        else:
            records = [run(t) for t in tasks]
        records.sort(key=lambda r: (r.source_id, r.variant_index))

        header = manifest_header(
            self.config.levels,
            [d.id for d in self.distortions],
            inputs=digests,
            meta={
                "config_digest": sha256_json(self.config.model_dump(mode="json")),
                "master_seed": self.config.master_seed,
                "repeats": self.config.repeats,
                "single_distortion": self.config.single_distortion,
            },
        )
        manifest_path = self.out_dir / MANIFEST_NAME
        digest = write_manifest(records, manifest_path, header)
        self._write_rejects(rejects)
        logger.info(f"Manifest written to {manifest_path} ({len(records)} records)")
        return GenerationResult(records, manifest_path, digest, rejects)

    def _load_sources(self):
        sources: dict[str, Image] = {}
        digests: dict[str, str] = {}
        rejects = []
        for path in self.config.sources:
            sid = Path(path).stem
            if sid in sources:
                raise ConfigError(f"two sources share the id {sid!r}")
            try:
                sources[sid] = load_png(path)
                digests[sid] = sha256_file(path)
            except DataError as e:
                logger.warning(f"Skipping source {path}: {e}")
                rejects.append({"source": str(path), "source_id": sid, "reason": str(e)})
        if not sources:
            raise DataError("no readable source images")
        return sources, digests, rejects

    def _make_record(self, sid: str, variant: int, img: Image) -> ManifestRecord:
        rng = record_stream(self.config.master_seed, sid, variant)
        picks = sample_applied(
            rng, self.config.distortions, self.config.levels, self.config.single_distortion
        )
        specs = [
            (self._by_id[d], StrengthLevel(lv, self.config.levels)) for d, lv in picks
        ]
        out = apply_sequence(img, specs, rng)
        rel = Path("images") / sid / f"{sid}_v{variant:02d}.png"
        save_png(out, self.out_dir / rel)
        applied = [
            AppliedDistortion(distortion=d.id, level=s.level, strength=s.strength)
            for d, s in specs
        ]
        score = synthetic_score(applied) if self.config.synthetic_scores else None
        return ManifestRecord.model_validate(
            {
                "source_id": sid,
                "variant_index": variant,
                "output_path": rel.as_posix(),
                "applied": applied,
                "score": score,
            },
            context={"levels": self.config.levels},
        )

    def _write_rejects(self, rejects: list[dict]):
        path = self.out_dir / REJECTS_NAME
        if not rejects:
            if path.exists():
                path.unlink()
            return
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for r in rejects:
                f.write(json.dumps(r) + "\n")
        logger.warning(f"{len(rejects)} sources rejected, see {path}")


def generate(config: GeneratorConfig, out_dir: Path | str, workers: int = 1) -> GenerationResult:
    return DatasetGenerator(config, Path(out_dir), workers).generate()
