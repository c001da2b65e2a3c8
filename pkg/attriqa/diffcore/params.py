import logging
from dataclasses import dataclass, field

import torch
from torch import Tensor, nn

from attriqa.errors import GraphStateError, NumericalError, ShapeError

logger = logging.getLogger(__name__)


@dataclass
class ParamGroup:
    """Named parameter tensors that are trained (or frozen) together."""

    name: str
    params: dict[str, nn.Parameter] = field(default_factory=dict)
    trainable: bool = True

    def __post_init__(self):
        self.apply_trainable()

    def apply_trainable(self):
        for p in self.params.values():
            p.requires_grad_(self.trainable)

    def numel(self) -> int:
        return sum(p.numel() for p in self.params.values())

    def gradients(self) -> dict[str, Tensor]:
        """Gradient buffers shaped like their parameters; frozen groups report zeros."""
        out = {}
        for key, p in self.params.items():
            g = p.grad if (self.trainable and p.grad is not None) else None
            if g is None:
                g = torch.zeros_like(p)
            if g.shape != p.shape:
                raise ShapeError(f"gradient of {self.name}.{key} has the wrong shape", g.shape, p.shape)
            out[key] = g.detach().clone()
        return out

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def assert_finite(self):
        for key, p in self.params.items():
            if not torch.isfinite(p).all():
                raise NumericalError(f"parameter {self.name}.{key} holds NaN or Inf")


def backward(loss: Tensor, groups: list[ParamGroup] | None = None) -> dict[str, dict[str, Tensor]]:
    """Reverse-mode pass from a scalar loss recorded in the current step."""
    if loss.dim() != 0:
        raise ShapeError("backward needs a scalar loss", loss.shape)
    if loss.grad_fn is None:
        raise GraphStateError("no forward graph recorded for this loss")
    try:
        loss.backward()
    except RuntimeError as e:
        raise GraphStateError(f"forward graph already consumed: {e}") from e
    return {g.name: g.gradients() for g in groups or []}


def trainable_parameters(groups: list[ParamGroup]) -> list[nn.Parameter]:
    params = []
    for g in groups:
        if g.trainable:
            params.extend(g.params.values())
    return params


def check_finite(groups: list[ParamGroup]):
    for g in groups:
        g.assert_finite()
