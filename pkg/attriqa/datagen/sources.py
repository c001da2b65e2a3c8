"""Procedural pristine sources for desk-scale datasets."""

import logging
import math
from pathlib import Path

import numpy as np

from attriqa.datagen.rng import named_stream
from attriqa.imaging.image import Image, save_png

logger = logging.getLogger(__name__)


SOURCE_STD = 0.12


def synthesize_texture(rng: np.random.Generator, size: int = 64, channels: int = 3) -> Image:
    """Gratings plus sharp-edged shapes over a mid-gray base.

    Each channel's deviation from its base is rescaled to SOURCE_STD, so all
    sources share one contrast. Values stay inside [0.05, 0.95] so
    brightness and impulse kernels have room to act.
    """
    yy, xx = np.mgrid[0:size, 0:size] / float(size)
    base = rng.uniform(0.4, 0.6, channels)
    detail = np.zeros((size, size, channels))

    for _ in range(int(rng.integers(2, 5))):
        freq = rng.uniform(2.0, 10.0)
        theta = rng.uniform(0.0, math.pi)
        phase = rng.uniform(0.0, 2 * math.pi)
        amp = rng.uniform(0.02, 0.06)
        tint = rng.uniform(0.5, 1.0, channels)
        wave = np.sin(2 * math.pi * freq * (xx * math.cos(theta) + yy * math.sin(theta)) + phase)
        detail += amp * wave[:, :, None] * tint

    for _ in range(int(rng.integers(4, 8))):
        cy, cx = rng.uniform(0.1, 0.9, 2)
        r = rng.uniform(0.06, 0.25)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        shade = sign * rng.uniform(0.1, 0.3) * rng.uniform(0.7, 1.0, channels)
        if rng.random() < 0.5:
            mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= r**2
        else:
            mask = (np.abs(yy - cy) <= r) & (np.abs(xx - cx) <= r * rng.uniform(0.3, 1.0))
        detail[mask] += shade

    detail -= detail.mean(axis=(0, 1))
    std = np.maximum(detail.std(axis=(0, 1)), 1e-6)
    img = base + detail * (SOURCE_STD / std)
    return Image(np.clip(img, 0.05, 0.95))


def synthesize_sources(
    count: int, out_dir: Path | str, seed: int = 0, size: int = 64, channels: int = 3
) -> list[Path]:
    out_dir = Path(out_dir)
    paths = []
    for i in range(count):
        rng = named_stream(seed, f"source-{i}")
        path = out_dir / f"src{i:05d}.png"
        save_png(synthesize_texture(rng, size, channels), path)
        paths.append(path)
    logger.info(f"Synthesized {count} {size}x{size} sources in {out_dir}")
    return paths
