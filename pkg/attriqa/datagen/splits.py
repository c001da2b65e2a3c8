import logging
from typing import Sequence

from attriqa.datagen.manifest import ManifestRecord
from attriqa.datagen.rng import named_stream
from attriqa.errors import ConfigError

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
DEFAULT_FRACTIONS = (0.8, 0.1, 0.1)


def split_sources(
    source_ids: Sequence[str], fractions=DEFAULT_FRACTIONS, seed: int = 0
) -> dict[str, set[str]]:
    """Assign whole sources to train/val/test so variants never leak across splits."""
    if len(fractions) != 3 or any(f < 0 for f in fractions) or sum(fractions) <= 0:
        raise ConfigError(f"invalid split fractions {fractions}")
    ids = sorted(set(source_ids))
    order = named_stream(seed, "split").permutation(len(ids))
    total = sum(fractions)
    n = len(ids)
    n_val = int(round(n * fractions[1] / total))
    n_test = int(round(n * fractions[2] / total))
    if n >= 3:
        n_val = max(n_val, 1) if fractions[1] > 0 else 0
        n_test = max(n_test, 1) if fractions[2] > 0 else 0
    n_train = n - n_val - n_test
    shuffled = [ids[i] for i in order]
    return {
        "train": set(shuffled[:n_train]),
        "val": set(shuffled[n_train : n_train + n_val]),
        "test": set(shuffled[n_train + n_val :]),
    }


def split_by_source(
    records: Sequence[ManifestRecord], fractions=DEFAULT_FRACTIONS, seed: int = 0
) -> dict[str, list[ManifestRecord]]:
    groups = split_sources([r.source_id for r in records], fractions, seed)
    out = {name: [r for r in records if r.source_id in groups[name]] for name in SPLITS}
    logger.debug(
        "Split sizes: " + ", ".join(f"{k}={len(v)}" for k, v in out.items())
    )
    return out


def select_split(
    records: Sequence[ManifestRecord], split: str, fractions=DEFAULT_FRACTIONS, seed: int = 0
) -> list[ManifestRecord]:
    if split == "all":
        return list(records)
    if split not in SPLITS:
        raise ConfigError(f"unknown split {split!r}; use one of all, {', '.join(SPLITS)}")
    return split_by_source(records, fractions, seed)[split]
