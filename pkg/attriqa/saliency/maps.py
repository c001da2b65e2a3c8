"""Input-gradient saliency for a distortion probability."""

import logging
from dataclasses import dataclass

import numpy as np
import torch
from scipy import ndimage
from torch import Tensor

from attriqa.attributes.model import DistortionIdentifier
from attriqa.encoder.vit import crop_resize, image_tensor
from attriqa.errors import UnknownDistortion
from attriqa.imaging.image import Image

logger = logging.getLogger(__name__)


@dataclass
class SaliencyMap:
    values: np.ndarray
    distortion: str
    record_id: str = ""
    zero_gradient: bool = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def distortion_probability_fn(model: DistortionIdentifier, distortion: str):
    """x (C, H, W) -> P(d|x), differentiable with respect to the pixels."""
    if distortion not in model.distortions:
        raise UnknownDistortion(f"distortion {distortion!r} is not in the model's registry")
    j = model.distortions.index(distortion)
    size = model.encoder.config.image_size

    def fn(x: Tensor) -> Tensor:
        _, dist = model(crop_resize(x, size).unsqueeze(0))
        return dist[0, j]

    return fn


def input_gradient(img: Image, distortion: str, model: DistortionIdentifier) -> np.ndarray:
    """dP(d|I)/dI shaped (C, H, W)."""
    fn = distortion_probability_fn(model, distortion)
    dtype = next(model.parameters()).dtype
    x = image_tensor(img, model.encoder.config.channels, dtype).clone().requires_grad_(True)
    model.eval()
    with torch.enable_grad():
        (grad,) = torch.autograd.grad(fn(x), x)
    return grad.detach().numpy()


def saliency_map(
    img: Image,
    distortion: str,
    model: DistortionIdentifier,
    sigma: float | None = 1.0,
    record_id: str = "",
) -> SaliencyMap:
    """|dP(d|I)/dpixel|, max over channels, optionally smoothed, scaled to max 1."""
    raw = np.abs(input_gradient(img, distortion, model)).max(axis=0)
    if sigma:
        raw = ndimage.gaussian_filter(raw, sigma=sigma, mode="reflect")
    peak = float(raw.max())
    if peak <= 0.0 or not np.isfinite(peak):
        logger.warning(f"Zero gradient for {distortion} on {record_id or 'image'}; map is empty")
        return SaliencyMap(np.zeros(raw.shape), distortion, record_id, zero_gradient=True)
    return SaliencyMap(raw / peak, distortion, record_id)
