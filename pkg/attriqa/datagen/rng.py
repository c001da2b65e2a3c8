"""Counter-based random streams keyed by (master_seed, source_id, variant_index).

Each record owns an independent Philox stream, so results do not depend on
which worker produced a record or in what order records completed.
"""

import hashlib

import numpy as np

MASK_64 = (1 << 64) - 1


def stream_key(master_seed: int, *parts) -> int:
    text = ":".join([str(master_seed & MASK_64), *map(str, parts)])
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=16).digest()
    return int.from_bytes(digest, "little")


def record_stream(master_seed: int, source_id: str, variant_index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(key=stream_key(master_seed, source_id, variant_index))
    )


def named_stream(master_seed: int, name: str) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=stream_key(master_seed, name)))
