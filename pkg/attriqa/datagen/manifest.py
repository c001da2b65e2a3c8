"""JSON Lines manifest: a versioned header line, then one record per line."""

import json
import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from attriqa.errors import DataError, DuplicateDistortion, ParseError, UnknownDistortion
from attriqa.imaging.schedule import DEFAULT_LEVELS, DistortionType
from attriqa.util.artifacts import ArtifactHeader
from attriqa.util.digests import sha256_file

logger = logging.getLogger(__name__)

MANIFEST_FORMAT = "attriqa-manifest"
MANIFEST_VERSION = 1


class AppliedDistortion(BaseModel):
    model_config = ConfigDict(extra="forbid")

    distortion: str
    level: int = Field(ge=1)
    strength: float


class ManifestRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    source_id: str
    variant_index: int = Field(ge=0)
    output_path: str
    applied: list[AppliedDistortion] = Field(min_length=1)
    score: Optional[float] = Field(default=None, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_applied(self, info):
        levels = (info.context or {}).get("levels", DEFAULT_LEVELS)
        seen = set()
        for entry in self.applied:
            if entry.distortion in seen:
                raise DuplicateDistortion(
                    f"distortion {entry.distortion!r} applied twice"
                )
            seen.add(entry.distortion)
            if entry.level > levels:
                raise ValueError(f"level {entry.level} exceeds level count {levels}")
            if entry.strength != entry.level / levels:
                raise ValueError(
                    f"strength {entry.strength} of {entry.distortion} "
                    f"is not level/{levels} = {entry.level / levels}"
                )
        return self

    @property
    def record_id(self) -> str:
        return f"{self.source_id}#{self.variant_index}"

    def strengths(self) -> dict[str, float]:
        return {a.distortion: a.strength for a in self.applied}


class Manifest(BaseModel):
    header: ArtifactHeader
    records: list[ManifestRecord]

    @property
    def levels(self) -> int:
        return int(self.header.meta.get("levels", DEFAULT_LEVELS))

    @property
    def distortions(self) -> list[str]:
        return list(self.header.meta.get("distortions", []))


def manifest_header(levels: int, distortions: Sequence[str], **kwargs) -> ArtifactHeader:
    meta = {"levels": levels, "distortions": list(distortions)}
    meta.update(kwargs.pop("meta", {}))
    return ArtifactHeader(
        format=MANIFEST_FORMAT, version=MANIFEST_VERSION, meta=meta, **kwargs
    )


def _describe(e: ValidationError) -> str:
    parts = []
    for err in e.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "record"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def read_manifest(path: Path | str) -> Manifest:
    path = Path(path)
    header = None
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"malformed JSON: {e.msg}", lineno, path) from e
            try:
                if header is None:
                    header = ArtifactHeader.model_validate(obj)
                    header.require(MANIFEST_FORMAT, MANIFEST_VERSION, path)
                    levels = int(header.meta.get("levels", DEFAULT_LEVELS))
                    continue
                records.append(
                    ManifestRecord.model_validate(obj, context={"levels": levels})
                )
            except ValidationError as e:
                raise ParseError(_describe(e), lineno, path) from e
            except DuplicateDistortion as e:
                raise ParseError(str(e), lineno, path) from e
    if header is None:
        raise ParseError("empty manifest, header line missing", 1, path)
    logger.debug(f"Loaded {len(records)} records from {path}")
    return Manifest(header=header, records=records)


def load_manifest(path: Path | str) -> list[ManifestRecord]:
    return read_manifest(path).records


def write_manifest(
    records: Sequence[ManifestRecord],
    path: Path | str,
    header: ArtifactHeader | None = None,
) -> str:
    """Write header + records and return the file digest."""
    path = Path(path)
    if header is None:
        ids = []
        for r in records:
            ids.extend(a.distortion for a in r.applied if a.distortion not in ids)
        header = manifest_header(DEFAULT_LEVELS, ids)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(header.model_dump_json() + "\n")
        for r in records:
            f.write(r.model_dump_json() + "\n")
    return sha256_file(path)


def ground_truth_matrix(
    records: Sequence[ManifestRecord], distortions: Sequence[str | DistortionType]
) -> np.ndarray:
    """P(I, d): rows follow record order, columns follow the distortion order."""
    ids = [d if isinstance(d, str) else d.id for d in distortions]
    column = {d: j for j, d in enumerate(ids)}
    matrix = np.zeros((len(records), len(ids)), dtype=np.float64)
    for i, r in enumerate(records):
        for a in r.applied:
            if a.distortion not in column:
                raise UnknownDistortion(
                    f"record {r.record_id} applies {a.distortion!r}, "
                    f"which is not in the distortion set"
                )
            matrix[i, column[a.distortion]] = a.strength
    return matrix


def score_vector(records: Sequence[ManifestRecord]) -> np.ndarray:
    missing = [r.record_id for r in records if r.score is None]
    if missing:
        raise DataError(
            f"{len(missing)} records have no quality score (first: {missing[0]})"
        )
    return np.array([r.score for r in records], dtype=np.float64)
