"""Heat-colored saliency outputs."""

import logging
from pathlib import Path

import numpy as np
import pandas as pd
from matplotlib.colors import LinearSegmentedColormap

from attriqa.errors import ConfigError, ShapeError
from attriqa.imaging.image import Image, save_png
from attriqa.saliency.maps import SaliencyMap

logger = logging.getLogger(__name__)

# black -> dark red -> orange -> pale yellow; red rises strictly
HEAT = LinearSegmentedColormap.from_list(
    "attriqa_heat",
    [(0.0, 0.0, 0.0), (0.6, 0.1, 0.0), (0.85, 0.5, 0.0), (1.0, 1.0, 0.6)],
    N=1024,
)


def heat_colors(values: np.ndarray) -> np.ndarray:
    """Map [0, 1] values to RGB in [0, 1]."""
    return np.asarray(HEAT(np.clip(values, 0.0, 1.0)), dtype=np.float64)[..., :3]


def render_heatmap(smap: SaliencyMap, path: Path | str) -> Path:
    return save_png(Image(heat_colors(smap.values)), path)


def render_overlay(img: Image, smap: SaliencyMap, path: Path | str, alpha: float = 0.6) -> Path:
    """Blend the heat colors over the image, weighted per pixel by alpha * saliency."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"overlay alpha must lie in [0, 1], got {alpha}")
    if smap.shape != (img.height, img.width):
        raise ShapeError("saliency map does not cover the image", smap.shape, img.shape)
    base = img.to_rgb().data
    weight = (alpha * smap.values)[..., None]
    out = base * (1.0 - weight) + heat_colors(smap.values) * weight
    if not smap.values.any():
        out = img.data
    return save_png(Image(np.clip(out, 0.0, 1.0)), path)


def write_map_csv(smap: SaliencyMap, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(smap.values).to_csv(path, index=False, header=False, float_format="%.8g")
    return path
