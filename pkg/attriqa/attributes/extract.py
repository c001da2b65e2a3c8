"""Frozen-model extraction of attribute and distortion probability matrices."""

import copy
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
import torch

from attriqa.attributes.model import DistortionIdentifier
from attriqa.attributes.registry import AttributeRegistry
from attriqa.attributes.training import load_images
from attriqa.datagen.manifest import ManifestRecord
from attriqa.errors import ConfigError
from attriqa.util.artifacts import ArtifactHeader
from attriqa.util.tables import write_matrix

logger = logging.getLogger(__name__)

ATTR_FORMAT = "attriqa-attribute-probs"
DIST_FORMAT = "attriqa-distortion-probs"
MATRIX_VERSION = 1
ATTR_NAME = "attr_probs.csv"
DIST_NAME = "dist_probs.csv"
EXPLANATIONS_NAME = "explanations.jsonl"


@dataclass
class Extraction:
    attributes: pd.DataFrame
    distortions: pd.DataFrame
    weights: np.ndarray


def extract_attribute_probs(
    records: Sequence[ManifestRecord],
    root: Path,
    model: DistortionIdentifier,
    registry: AttributeRegistry,
    batch_size: int = 64,
    workers: int = 1,
) -> Extraction:
    """One row per record, columns in registry order."""
    if model.registry_digest != registry.digest:
        raise ConfigError("model was trained against a different registry")
    if model.anchor_pos.shape[-1] != registry.dim:
        raise ConfigError(
            f"registry dim {registry.dim} does not match model anchors {model.anchor_pos.shape[-1]}"
        )
    # inference runs in float32 on a private copy
    infer = copy.deepcopy(model).to(torch.float32).eval()
    batches = [records[i : i + batch_size] for i in range(0, len(records), batch_size)]

    def run(batch):
        images = load_images(batch, root, infer.encoder.config, torch.float32)
        with torch.no_grad():
            attr, dist = infer(images)
        return (
            attr.reshape(len(batch), -1).numpy().astype(np.float64),
            dist.numpy().astype(np.float64),
        )

    if workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(run, batches))
    else:
        outputs = [run(b) for b in batches]

    ids = [r.record_id for r in records]
    attr = np.concatenate([o[0] for o in outputs]) if outputs else np.zeros((0, len(registry.attributes)))
    dist = np.concatenate([o[1] for o in outputs]) if outputs else np.zeros((0, len(registry.distortions)))
    attributes = pd.DataFrame(attr, columns=registry.column_names())
    attributes.insert(0, "record_id", ids)
    distortions = pd.DataFrame(dist, columns=registry.distortions)
    distortions.insert(0, "record_id", ids)
    logger.info(f"Extracted {attr.shape[1]} attribute probabilities for {len(ids)} records")
    return Extraction(attributes, distortions, model.weights().detach().numpy())


def explain(extraction: Extraction, registry: AttributeRegistry, top: int = 3) -> list[dict]:
    """Per record: distortions by probability, each with its strongest weighted attributes."""
    out = []
    k = registry.attrs_per_distortion
    attr = extraction.attributes.drop(columns="record_id").to_numpy()
    dist = extraction.distortions.drop(columns="record_id").to_numpy()
    for i, rid in enumerate(extraction.attributes["record_id"]):
        ranked = np.argsort(-dist[i], kind="stable")[:top]
        items = []
        for j in ranked:
            probs = attr[i, j * k : (j + 1) * k]
            contrib = probs * extraction.weights[j]
            best = np.argsort(-contrib, kind="stable")[:2]
            attrs = registry.attributes_of(registry.distortions[j])
            items.append(
                {
                    "distortion": registry.distortions[j],
                    "probability": round(float(dist[i, j]), 6),
                    "attributes": [
                        {
                            "id": attrs[a].id,
                            "sentence": attrs[a].positive,
                            "probability": round(float(probs[a]), 6),
                            "weight": round(float(extraction.weights[j, a]), 6),
                        }
                        for a in best
                    ],
                }
            )
        out.append({"record_id": rid, "distortions": items})
    return out


def write_extraction(
    extraction: Extraction,
    registry: AttributeRegistry,
    out_dir: Path,
    inputs: dict[str, str],
) -> dict[str, str]:
    """Write both matrices and the explanations; returns file digests."""
    out_dir = Path(out_dir)
    meta = {"distortions": registry.distortions, "attrs_per_distortion": registry.attrs_per_distortion}
    digests = {
        ATTR_NAME: write_matrix(
            extraction.attributes,
            out_dir / ATTR_NAME,
            ArtifactHeader(format=ATTR_FORMAT, version=MATRIX_VERSION, inputs=inputs, meta=meta),
        ),
        DIST_NAME: write_matrix(
            extraction.distortions,
            out_dir / DIST_NAME,
            ArtifactHeader(format=DIST_FORMAT, version=MATRIX_VERSION, inputs=inputs, meta=meta),
        ),
    }
    with open(out_dir / EXPLANATIONS_NAME, "w", encoding="utf-8", newline="\n") as f:
        for row in explain(extraction, registry):
            f.write(json.dumps(row) + "\n")
    logger.info(f"Probability matrices written to {out_dir}")
    return digests
