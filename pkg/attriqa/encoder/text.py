"""Text-side anchors E_T.

Anchors are either imported from an embedding file computed elsewhere, or
produced by a deterministic hashing embedder for toy runs. The two are never
mixed in one anchor set.
"""

import hashlib
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping

import numpy as np

from attriqa.diffcore.checkpoint import read_tensors, write_tensors
from attriqa.errors import ConfigError, DataError
from attriqa.util.artifacts import ArtifactHeader

logger = logging.getLogger(__name__)

EMBEDDINGS_FORMAT = "attriqa-embeddings"
EMBEDDINGS_VERSION = 1

NEGATIONS = {"not", "no", "never"}
_TOKEN = re.compile(r"[a-z0-9]+")


class Provenance(str, Enum):
    IMPORTED = "imported"
    TOY_HASH = "toy-hash"


def tokenize(sentence: str) -> list[str]:
    """Lowercase word tokens; words after a negation are marked "not_<word>"."""
    tokens = []
    negated = False
    for tok in _TOKEN.findall(sentence.lower()):
        if tok in NEGATIONS:
            negated = True
            tokens.append(tok)
            continue
        tokens.append(f"not_{tok}" if negated else tok)
    return tokens


def _feature_vector(feature: str, dim: int) -> np.ndarray:
    raw = b""
    counter = 0
    while len(raw) < dim * 8:
        raw += hashlib.blake2b(f"{feature}|{counter}".encode("utf-8"), digest_size=64).digest()
        counter += 1
    words = np.frombuffer(raw[: dim * 8], dtype="<u8")
    return words.astype(np.float64) / 2.0**64 * 2.0 - 1.0


def embed_text_toy(sentence: str, dim: int = 64) -> np.ndarray:
    """Bag of hashed unigram and bigram features, L2-normalized."""
    tokens = tokenize(sentence)
    if not tokens:
        raise ConfigError("cannot embed an empty sentence")
    features = tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
    vec = np.zeros(dim, dtype=np.float64)
    for f in features:
        vec += _feature_vector(f, dim)
    return vec / np.linalg.norm(vec)


@dataclass
class TextAnchorSet:
    provenance: Provenance
    dim: int
    positive: dict[str, np.ndarray] = field(default_factory=dict)
    negative: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.provenance = Provenance(self.provenance)
        if set(self.positive) != set(self.negative):
            raise DataError("every attribute needs both a positive and a negative anchor")
        for key in self.positive:
            for side, vec in (("positive", self.positive[key]), ("negative", self.negative[key])):
                if vec.shape != (self.dim,):
                    raise DataError(f"{side} anchor of {key} has shape {vec.shape}, expected ({self.dim},)")
                if not np.all(np.isfinite(vec)):
                    raise DataError(f"{side} anchor of {key} is not finite")

    def pair(self, attr_id: str) -> tuple[np.ndarray, np.ndarray]:
        try:
            return self.positive[attr_id], self.negative[attr_id]
        except KeyError:
            raise DataError(f"no anchors for attribute {attr_id!r}") from None

    def ids(self) -> list[str]:
        return list(self.positive)


def toy_anchor_set(sentences: Mapping[str, tuple[str, str]], dim: int) -> TextAnchorSet:
    """Anchors for {attr_id: (positive sentence, negative sentence)}."""
    pos = {k: embed_text_toy(p, dim) for k, (p, _) in sentences.items()}
    neg = {k: embed_text_toy(n, dim) for k, (_, n) in sentences.items()}
    return TextAnchorSet(Provenance.TOY_HASH, dim, pos, neg)


def write_embedding_file(anchors: TextAnchorSet, path: Path | str) -> str:
    header = ArtifactHeader(
        format=EMBEDDINGS_FORMAT,
        version=EMBEDDINGS_VERSION,
        meta={"dim": anchors.dim, "attributes": anchors.ids()},
    )
    tensors = {}
    for key in anchors.ids():
        tensors[f"{key}/positive"] = anchors.positive[key]
        tensors[f"{key}/negative"] = anchors.negative[key]
    return write_tensors(path, header, tensors)


def read_embedding_file(path: Path | str) -> TextAnchorSet:
    """Externally computed text embeddings; always tagged as imported."""
    header, tensors = read_tensors(path)
    header.require(EMBEDDINGS_FORMAT, EMBEDDINGS_VERSION, path)
    dim = int(header.meta["dim"])
    pos, neg = {}, {}
    for key in header.meta.get("attributes", []):
        try:
            pos[key] = tensors[f"{key}/positive"].astype(np.float64)
            neg[key] = tensors[f"{key}/negative"].astype(np.float64)
        except KeyError:
            raise DataError(f"{path}: anchors for {key} are incomplete") from None
    logger.info(f"Imported {len(pos)} anchor pairs (dim {dim}) from {path}")
    return TextAnchorSet(Provenance.IMPORTED, dim, pos, neg)
