"""Attribute probabilities, distortion aggregation, loss and caption inference."""

import logging

import numpy as np
import torch
from torch import Tensor, nn

from attriqa.attributes.registry import AttributeRegistry, check_encoder_dim
from attriqa.diffcore import ops
from attriqa.diffcore.params import ParamGroup
from attriqa.encoder.vit import TuneMode, VisionEncoder, trainable_params
from attriqa.errors import InvariantError, NumericalError, ShapeError

logger = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-9


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return torch.as_tensor(np.asarray(x, dtype=np.float64))


def attribute_prob(e_img, anchor_pos, anchor_neg) -> Tensor:
    """P(a|I) = exp(z+) / (exp(z+) + exp(z-)), evaluated as sigmoid(z+ - z-).

    Works on the last axis, so batches of embeddings and stacks of anchors
    broadcast against each other.
    """
    e_img, anchor_pos, anchor_neg = _as_tensor(e_img), _as_tensor(anchor_pos), _as_tensor(anchor_neg)
    if not (e_img.shape[-1] == anchor_pos.shape[-1] == anchor_neg.shape[-1]):
        raise ShapeError("embedding and anchors differ in width", e_img.shape, anchor_pos.shape)
    z_pos = (anchor_pos * e_img).sum(-1)
    z_neg = (anchor_neg * e_img).sum(-1)
    if not (torch.isfinite(z_pos).all() and torch.isfinite(z_neg).all()):
        raise NumericalError("non-finite anchor dot product")
    return ops.sigmoid(z_pos - z_neg)


def check_simplex(weights, tol: float = SIMPLEX_TOL):
    w = _as_tensor(weights).detach()
    if w.dtype != torch.float64:
        tol = max(tol, 1e-5)
    if (w < 0).any() or ((w.sum(-1) - 1.0).abs() > tol).any():
        raise InvariantError(f"attribute weights left the simplex: {w.tolist()}")


def distortion_prob(attr_probs, weights) -> Tensor:
    """P(d|I) = sum_a w_ad P(a|I): a convex combination along the last axis."""
    attr_probs, weights = _as_tensor(attr_probs), _as_tensor(weights)
    if attr_probs.shape[-1] != weights.shape[-1]:
        raise ShapeError("one weight per attribute expected", attr_probs.shape, weights.shape)
    check_simplex(weights)
    return (attr_probs * weights).sum(-1)


def distortion_loss(predictions, targets) -> Tensor:
    """Soft-label binary cross-entropy, averaged over every (image, distortion) cell."""
    predictions, targets = _as_tensor(predictions), _as_tensor(targets)
    if predictions.shape != targets.shape:
        raise ShapeError("predictions and targets differ", predictions.shape, targets.shape)
    p = ops.clamp_probability(predictions)
    t = targets.to(p.dtype)
    return -(t * torch.log(p) + (1.0 - t) * torch.log(1.0 - p)).mean()


def infer_best_caption(e_img, candidates) -> int:
    """argmax_k <E_T(c_k), E_I(I)>; ties go to the lowest index."""
    e = np.asarray(_as_tensor(e_img).detach(), dtype=np.float64)
    c = np.atleast_2d(np.asarray(_as_tensor(candidates).detach(), dtype=np.float64))
    if c.shape[0] == 0:
        raise ShapeError("no candidate captions", c.shape)
    if c.shape[1] != e.shape[-1]:
        raise ShapeError("caption width differs from the embedding", c.shape, e.shape)
    return int(np.argmax(c @ e))


class DistortionIdentifier(nn.Module):
    """Image encoder plus frozen text anchors and learnable attribute weights."""

    def __init__(
        self,
        encoder: VisionEncoder,
        registry: AttributeRegistry,
        normalize: bool = False,
        temperature: float = 0.07,
    ):
        super().__init__()
        check_encoder_dim(registry, encoder.config.embed_dim)
        self.encoder = encoder
        self.distortions = list(registry.distortions)
        self.registry_digest = registry.digest
        self.normalize = normalize
        self.temperature = temperature
        dtype = next(encoder.parameters()).dtype
        pos, neg = registry.anchor_tensors(dtype)
        self.register_buffer("anchor_pos", pos, persistent=False)
        self.register_buffer("anchor_neg", neg, persistent=False)
        # w = softmax(theta) starts uniform
        self.theta = nn.Parameter(
            torch.zeros(len(registry.distortions), registry.attrs_per_distortion, dtype=dtype)
        )

    def weights(self) -> Tensor:
        return ops.softmax(self.theta, dim=-1)

    def embed(self, images: Tensor) -> Tensor:
        return self.encoder(images)

    def attribute_probs_from_embedding(self, emb: Tensor) -> Tensor:
        """(B, d) embeddings to (B, |D|, attrs) attribute probabilities."""
        pos, neg = self.anchor_pos, self.anchor_neg
        if self.normalize:
            emb = ops.l2_normalize(emb) / self.temperature
            pos, neg = ops.l2_normalize(pos), ops.l2_normalize(neg)
        return attribute_prob(emb[:, None, None, :], pos, neg)

    def forward(self, images: Tensor) -> tuple[Tensor, Tensor]:
        attr = self.attribute_probs_from_embedding(self.embed(images))
        return attr, distortion_prob(attr, self.weights())

    def param_groups(self, mode: TuneMode | str) -> list[ParamGroup]:
        """Encoder groups for the tuning mode plus the attribute weights; anchors are buffers."""
        groups = trainable_params(self.encoder, mode)
        groups.append(ParamGroup("weights", {"theta": self.theta}, trainable=True))
        return groups
