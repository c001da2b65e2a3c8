"""Attribute registry: per-distortion attribute sentences and their text anchors."""

import json
import logging
from pathlib import Path
from typing import Literal, Optional, Sequence

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from attriqa.config.settings import settings
from attriqa.encoder.text import (
    Provenance,
    TextAnchorSet,
    read_embedding_file,
    toy_anchor_set,
)
from attriqa.errors import ConfigError, DataError, ParseError, UnknownDistortion
from attriqa.imaging.schedule import parse_distortion
from attriqa.util.artifacts import ArtifactHeader
from attriqa.util.digests import sha256_json

logger = logging.getLogger(__name__)

SOURCE_FORMAT = "attriqa-registry-source"
REGISTRY_FORMAT = "attriqa-registry"
REGISTRY_VERSION = 1
ATTRS_PER_DISTORTION = 5
DEFAULT_SOURCE = "registry_default.json"

POSITIVE_PREFIX = "There is "
NEGATIVE_PREFIX = "There is not "


def assemble_sentences(text: str) -> tuple[str, str]:
    """Fill the "There is <a> in the photo." / "There is not <a> in the photo." pair.

    Attribute text that already reads as a full "There is ..." sentence is used
    as the positive sentence without a second prefix.
    """
    text = " ".join(text.split())
    if not text:
        raise DataError("empty attribute text")
    if text.lower().startswith(POSITIVE_PREFIX.lower()):
        rest = text[len(POSITIVE_PREFIX) :]
        if not rest.endswith("."):
            rest += "."
        return POSITIVE_PREFIX + rest, NEGATIVE_PREFIX + rest
    body = text.rstrip(".")
    return f"{POSITIVE_PREFIX}{body} in the photo.", f"{NEGATIVE_PREFIX}{body} in the photo."


def differ_by_negation(positive: str, negative: str) -> bool:
    return positive.startswith(POSITIVE_PREFIX) and negative == NEGATIVE_PREFIX + positive[
        len(POSITIVE_PREFIX) :
    ]


class SourceAttribute(BaseModel):
    model_config = ConfigDict(extra="forbid")

    text: str
    positive: Optional[str] = None
    negative: Optional[str] = None
    provenance: Literal["published", "author"] = "author"

    def sentences(self) -> tuple[str, str]:
        if self.positive is None and self.negative is None:
            return assemble_sentences(self.text)
        if self.positive is None or self.negative is None:
            raise DataError(f"attribute {self.text!r} gives only one of positive/negative")
        if not differ_by_negation(self.positive, self.negative):
            raise DataError(
                f"sentences for {self.text!r} must differ only by the negation: "
                f"{self.positive!r} / {self.negative!r}"
            )
        return self.positive, self.negative


class SourceEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    distortion: str
    attributes: list[SourceAttribute] = Field(min_length=1)


class RegistrySource(BaseModel):
    """Human-edited attribute file."""

    model_config = ConfigDict(extra="forbid")

    format: Literal["attriqa-registry-source"] = SOURCE_FORMAT
    version: int = REGISTRY_VERSION
    distortions: list[SourceEntry]

    def entry(self, distortion: str) -> SourceEntry:
        for e in self.distortions:
            if e.distortion == distortion:
                return e
        raise UnknownDistortion(f"no attributes for distortion {distortion!r} in registry source")


def read_registry_source(path: Path | str | None = None) -> RegistrySource:
    path = Path(path) if path else settings.shipped_data_dir / DEFAULT_SOURCE
    try:
        return RegistrySource.model_validate_json(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"registry source {path} not found") from None
    except ValidationError as e:
        err = e.errors()[0]
        loc = ".".join(str(p) for p in err["loc"])
        raise ParseError(f"{loc}: {err['msg']}", path=path) from None


class RegistryAttribute(BaseModel):
    model_config = ConfigDict(extra="forbid")

    distortion: str
    index: int = Field(ge=0)
    text: str
    positive: str
    negative: str
    provenance: Literal["published", "author"]
    positive_anchor: list[float]
    negative_anchor: list[float]

    @property
    def id(self) -> str:
        return f"{self.distortion}.{self.index}"


class AttributeRegistry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    header: ArtifactHeader
    distortions: list[str]
    attrs_per_distortion: int = Field(default=ATTRS_PER_DISTORTION, ge=1)
    anchor_provenance: Provenance
    dim: int = Field(ge=1)
    attributes: list[RegistryAttribute]

    @model_validator(mode="after")
    def _uniform(self):
        expected = [
            (d, k) for d in self.distortions for k in range(self.attrs_per_distortion)
        ]
        found = [(a.distortion, a.index) for a in self.attributes]
        if found != expected:
            raise ValueError(
                f"attributes must be {self.attrs_per_distortion} per distortion "
                f"in distortion order"
            )
        for a in self.attributes:
            if not differ_by_negation(a.positive, a.negative):
                raise ValueError(f"{a.id}: sentences differ by more than the negation")
            for vec in (a.positive_anchor, a.negative_anchor):
                if len(vec) != self.dim or not np.all(np.isfinite(vec)):
                    raise ValueError(f"{a.id}: anchor is not a finite vector of length {self.dim}")
        return self

    @property
    def digest(self) -> str:
        return sha256_json(self.model_dump(mode="json"))

    def column_names(self) -> list[str]:
        return [a.id for a in self.attributes]

    def attributes_of(self, distortion: str) -> list[RegistryAttribute]:
        if distortion not in self.distortions:
            raise UnknownDistortion(f"distortion {distortion!r} is not in the registry")
        return [a for a in self.attributes if a.distortion == distortion]

    def anchor_tensors(self, dtype=torch.float64) -> tuple[torch.Tensor, torch.Tensor]:
        """Positive and negative anchors shaped (|D|, attrs_per_distortion, d)."""
        shape = (len(self.distortions), self.attrs_per_distortion, self.dim)
        pos = torch.tensor([a.positive_anchor for a in self.attributes], dtype=dtype)
        neg = torch.tensor([a.negative_anchor for a in self.attributes], dtype=dtype)
        return pos.reshape(shape), neg.reshape(shape)


def build_registry(
    source: RegistrySource,
    distortions: Sequence[str] | None = None,
    anchors: TextAnchorSet | None = None,
    dim: int = 64,
    attrs_per_distortion: int = ATTRS_PER_DISTORTION,
    inputs: dict[str, str] | None = None,
) -> AttributeRegistry:
    """Resolve sentences and bind anchors, either imported or toy-hashed."""
    ids = [parse_distortion(d).id for d in distortions] if distortions else [
        parse_distortion(e.distortion).id for e in source.distortions
    ]
    sentences = {}
    rows = []
    for d in ids:
        entry = source.entry(d)
        if len(entry.attributes) != attrs_per_distortion:
            raise DataError(
                f"{d} has {len(entry.attributes)} attributes, "
                f"expected {attrs_per_distortion}"
            )
        for k, attr in enumerate(entry.attributes):
            pos, neg = attr.sentences()
            sentences[f"{d}.{k}"] = (pos, neg)
            rows.append((d, k, attr, pos, neg))

    if anchors is None:
        anchors = toy_anchor_set(sentences, dim)
        logger.warning(
            f"Using toy hashed text anchors (dim {dim}); import real embeddings for "
            f"anything beyond plumbing runs"
        )
    missing = [key for key in sentences if key not in anchors.positive]
    if missing:
        raise DataError(f"anchor set lacks {len(missing)} attributes, first {missing[0]}")

    attributes = []
    for d, k, attr, pos, neg in rows:
        p, n = anchors.pair(f"{d}.{k}")
        attributes.append(
            RegistryAttribute(
                distortion=d,
                index=k,
                text=attr.text,
                positive=pos,
                negative=neg,
                provenance=attr.provenance,
                positive_anchor=[float(x) for x in p],
                negative_anchor=[float(x) for x in n],
            )
        )
    header = ArtifactHeader(
        format=REGISTRY_FORMAT, version=REGISTRY_VERSION, inputs=dict(inputs or {})
    )
    registry = AttributeRegistry(
        header=header,
        distortions=ids,
        attrs_per_distortion=attrs_per_distortion,
        anchor_provenance=anchors.provenance,
        dim=anchors.dim,
        attributes=attributes,
    )
    logger.info(
        f"Registry: {len(ids)} distortions x {attrs_per_distortion} attributes, "
        f"{anchors.provenance.value} anchors, digest {registry.digest[:12]}"
    )
    return registry


def build_registry_from_files(
    source_path: Path | str | None,
    distortions: Sequence[str] | None = None,
    embeddings: Path | str | None = None,
    dim: int = 64,
) -> AttributeRegistry:
    source = read_registry_source(source_path)
    anchors = read_embedding_file(embeddings) if embeddings else None
    inputs = {"source": sha256_json(source.model_dump(mode="json"))}
    if anchors is not None and anchors.dim != dim:
        logger.info(f"Imported anchors have dim {anchors.dim}; ignoring requested dim {dim}")
    return build_registry(source, distortions, anchors, dim, inputs=inputs)


def write_registry(registry: AttributeRegistry, path: Path | str) -> str:
    """Write the registry JSON; returns the registry digest."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(registry.model_dump(mode="json"), indent=1) + "\n", encoding="utf-8")
    return registry.digest


def read_registry(path: Path | str) -> AttributeRegistry:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"registry {path} not found") from None
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", line=e.lineno, path=path) from None
    try:
        registry = AttributeRegistry.model_validate(raw)
    except ValidationError as e:
        err = e.errors()[0]
        loc = ".".join(str(p) for p in err["loc"])
        raise ParseError(f"{loc}: {err['msg']}", path=path) from None
    registry.header.require(REGISTRY_FORMAT, REGISTRY_VERSION, path)
    return registry


def check_encoder_dim(registry: AttributeRegistry, embed_dim: int):
    if registry.dim != embed_dim:
        raise ConfigError(
            f"registry anchors have dimension {registry.dim}, encoder embeds to {embed_dim}"
        )
