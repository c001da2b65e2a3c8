import logging
from typing import Iterable, Sequence

import numpy as np

from attriqa.errors import ConfigError, DuplicateDistortion, KernelNumericalError
from attriqa.imaging.image import Image
from attriqa.imaging.kernels import KERNELS
from attriqa.imaging.schedule import DistortionType, StrengthLevel

logger = logging.getLogger(__name__)

DistortionStep = tuple[DistortionType, StrengthLevel]


def apply_distortion(
    img: Image,
    d: DistortionType,
    s: StrengthLevel,
    rng: np.random.Generator | None = None,
) -> Image:
    """Apply one kernel at one strength level; level 0 is the identity."""
    if not s.applied:
        return Image(img.data)
    if d.stochastic and rng is None:
        raise ConfigError(f"{d.id} is stochastic and needs a random stream")
    kernel = KERNELS[d.id]
    out = kernel(img.data, d.parameter_at(s.strength), rng)
    if out.shape != img.shape:
        raise KernelNumericalError(
            f"{d.id} changed the image shape {img.shape} -> {out.shape}"
        )
    if not np.all(np.isfinite(out)):
        raise KernelNumericalError(
            f"{d.id} at level {s.level} produced non-finite values"
        )
    return Image(np.clip(out, 0.0, 1.0))


def apply_sequence(
    img: Image,
    specs: Sequence[DistortionStep],
    rng: np.random.Generator | None = None,
) -> Image:
    """Apply kernels left to right. Order matters and is part of the ground truth."""
    if not specs:
        raise ConfigError("distortion sequence is empty")
    check_distinct(d.id for d, _ in specs)
    out = img
    for d, s in specs:
        out = apply_distortion(out, d, s, rng)
    return out


def check_distinct(ids: Iterable[str]):
    seen = set()
    for i in ids:
        if i in seen:
            raise DuplicateDistortion(f"distortion {i!r} appears more than once")
        seen.add(i)
