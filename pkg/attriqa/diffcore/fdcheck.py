"""Central finite-difference verification of reverse-mode gradients."""

import logging
from typing import Callable, Iterable, Protocol

import numpy as np
import torch
from pydantic import BaseModel
from torch import Tensor

from attriqa.diffcore.params import ParamGroup
from attriqa.errors import ConfigError

logger = logging.getLogger(__name__)


class HasParamGroups(Protocol):
    def param_groups(self) -> list[ParamGroup]: ...


class GroupCheck(BaseModel):
    group: str
    trainable: bool
    coordinates: int
    max_rel_error: float
    max_abs_error: float
    max_abs_grad: float
    passed: bool


class FDReport(BaseModel):
    h: float
    tolerance: float
    atol: float
    groups: list[GroupCheck]

    @property
    def passed(self) -> bool:
        return all(g.passed for g in self.groups)

    @property
    def max_rel_error(self) -> float:
        return max((g.max_rel_error for g in self.groups), default=0.0)

    def group(self, name: str) -> GroupCheck:
        for g in self.groups:
            if g.group == name:
                return g
        raise KeyError(name)


def relative_error(g_ad: np.ndarray, g_fd: np.ndarray) -> np.ndarray:
    return np.abs(g_ad - g_fd) / np.maximum(1e-8, np.abs(g_ad) + np.abs(g_fd))


def _groups(model) -> list[ParamGroup]:
    if hasattr(model, "param_groups"):
        return list(model.param_groups())
    return list(model)


def _coordinates(tensors: list[Tensor], samples: int, rng) -> list[tuple[int, int]]:
    sizes = [t.numel() for t in tensors]
    total = sum(sizes)
    picks = np.sort(rng.choice(total, size=min(samples, total), replace=False))
    offsets = np.cumsum([0] + sizes)
    out = []
    for flat in picks:
        ti = int(np.searchsorted(offsets, flat, side="right") - 1)
        out.append((ti, int(flat - offsets[ti])))
    return out


def _central_difference(loss_fn, t: Tensor, index: int, h: float) -> float:
    # row-major position, valid for any stride layout
    pos = tuple(int(i) for i in np.unravel_index(index, tuple(t.shape)))
    original = t.data[pos].item()
    with torch.no_grad():
        t.data[pos] = original + h
        plus = float(loss_fn())
        t.data[pos] = original - h
        minus = float(loss_fn())
        t.data[pos] = original
    return (plus - minus) / (2.0 * h)


def fd_check(
    model: HasParamGroups | Iterable[ParamGroup],
    loss_fn: Callable[[], Tensor],
    h: float = 1e-5,
    tolerance: float = 1e-4,
    samples: int = 200,
    atol: float = 1e-9,
    seed: int = 0,
) -> FDReport:
    """Compare autodiff gradients to central differences on sampled coordinates.

    A coordinate passes when its relative error is within `tolerance` or its
    absolute error is within `atol` (coordinates whose true gradient is zero
    only ever show finite-difference rounding noise).
    """
    groups = _groups(model)
    for g in groups:
        for key, p in g.params.items():
            if p.dtype != torch.float64:
                raise ConfigError(f"fd_check needs float64 parameters, {g.name}.{key} is {p.dtype}")

    for g in groups:
        g.zero_grad()
    loss = loss_fn()
    trainable = [p for g in groups if g.trainable for p in g.params.values()]
    if trainable and loss.requires_grad:
        grads = torch.autograd.grad(loss, trainable, allow_unused=True)
        for p, gr in zip(trainable, grads):
            p.grad = gr if gr is not None else torch.zeros_like(p)

    rng = np.random.default_rng(seed)
    results = []
    for g in groups:
        tensors = list(g.params.values())
        analytic = [gr.reshape(-1) for gr in g.gradients().values()]
        coords = _coordinates(tensors, samples, rng)
        ad = np.array([analytic[ti][ci].item() for ti, ci in coords])
        if g.trainable:
            fd = np.array([_central_difference(loss_fn, tensors[ti], ci, h) for ti, ci in coords])
            rel = relative_error(ad, fd)
            abs_err = np.abs(ad - fd)
            ok = bool(np.all((rel <= tolerance) | (abs_err <= atol)))
        else:
            rel = abs_err = np.zeros(len(coords))
            ok = bool(np.all(ad == 0.0))
        results.append(
            GroupCheck(
                group=g.name,
                trainable=g.trainable,
                coordinates=len(coords),
                max_rel_error=float(rel.max(initial=0.0)),
                max_abs_error=float(abs_err.max(initial=0.0)),
                max_abs_grad=float(np.abs(ad).max(initial=0.0)),
                passed=ok,
            )
        )
        logger.debug(f"fd_check {g.name}: max rel {results[-1].max_rel_error:.3e}")
    return FDReport(h=h, tolerance=tolerance, atol=atol, groups=results)


def fd_check_input(
    fn: Callable[[Tensor], Tensor],
    x: Tensor,
    h: float = 1e-5,
    tolerance: float = 1e-4,
    samples: int = 200,
    atol: float = 1e-9,
    seed: int = 0,
) -> FDReport:
    """Same check for the gradient of a scalar function with respect to its input."""
    leaf = torch.nn.Parameter(x.detach().to(torch.float64).clone(memory_format=torch.contiguous_format))
    group = ParamGroup("input", {"x": leaf})
    return fd_check([group], lambda: fn(leaf), h, tolerance, samples, atol, seed)
