"""Forward ops on torch tensors with explicit shape checks.

Gradients come from torch's reverse mode; these wrappers fix the numerical
conventions (stable softmax, biased layernorm variance, inverted dropout)
and raise ShapeError naming both shapes instead of a generic RuntimeError.
"""

import math

import torch
import torch.nn.functional as F
from torch import Tensor

from attriqa.errors import ConfigError, ShapeError

LOG_CLAMP = 1e-12


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.dim() < 1 or b.dim() < 1 or a.shape[-1] != b.shape[-2 if b.dim() > 1 else 0]:
        raise ShapeError("matmul inner dimensions differ", a.shape, b.shape)
    return a @ b


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        torch.broadcast_shapes(a.shape, b.shape)
    except RuntimeError:
        raise ShapeError("add operands do not broadcast", a.shape, b.shape) from None
    return a + b


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """x @ weight.T + bias, weight shaped (out, in)."""
    if x.shape[-1] != weight.shape[-1]:
        raise ShapeError("linear input width differs from weight", x.shape, weight.shape)
    y = x @ weight.transpose(-1, -2)
    if bias is not None:
        y = add(y, bias)
    return y


def layernorm(
    x: Tensor, weight: Tensor | None = None, bias: Tensor | None = None, eps: float = 1e-5
) -> Tensor:
    mean = x.mean(dim=-1, keepdim=True)
    var = ((x - mean) ** 2).mean(dim=-1, keepdim=True)
    y = (x - mean) / torch.sqrt(var + eps)
    if weight is not None:
        if weight.shape[-1] != x.shape[-1]:
            raise ShapeError("layernorm affine width differs", x.shape, weight.shape)
        y = y * weight
    if bias is not None:
        y = y + bias
    return y


def softmax(x: Tensor, dim: int = -1) -> Tensor:
    shifted = x - x.max(dim=dim, keepdim=True).values.detach()
    e = torch.exp(shifted)
    return e / e.sum(dim=dim, keepdim=True)


def log_softmax(x: Tensor, dim: int = -1) -> Tensor:
    shifted = x - x.max(dim=dim, keepdim=True).values.detach()
    return shifted - torch.log(torch.exp(shifted).sum(dim=dim, keepdim=True))


def softmax_cross_entropy(logits: Tensor, target: Tensor) -> Tensor:
    """Mean over rows of -sum(target * log softmax(logits))."""
    if logits.shape != target.shape:
        raise ShapeError("logits and target differ", logits.shape, target.shape)
    return -(target * log_softmax(logits, dim=-1)).sum(dim=-1).mean()


def sigmoid(x: Tensor) -> Tensor:
    return torch.sigmoid(x)


def selu(x: Tensor) -> Tensor:
    return F.selu(x)


def gelu(x: Tensor) -> Tensor:
    return F.gelu(x)


def l2_normalize(x: Tensor, dim: int = -1, eps: float = 1e-12) -> Tensor:
    return x / x.norm(dim=dim, keepdim=True).clamp_min(eps)


def dropout(
    x: Tensor, p: float, training: bool, generator: torch.Generator | None = None
) -> Tensor:
    """Inverted dropout: identity in eval mode, mean-preserving in training."""
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    keep = torch.rand(x.shape, generator=generator, dtype=x.dtype, device=x.device) >= p
    return x * keep.to(x.dtype) / (1.0 - p)


def concat_tokens(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate along the token axis (-2); b may omit the batch axis."""
    if b.dim() == a.dim() - 1:
        b = b.unsqueeze(0).expand(a.shape[0], *b.shape)
    if a.dim() != b.dim() or a.shape[:-2] != b.shape[:-2] or a.shape[-1] != b.shape[-1]:
        raise ShapeError("token sequences are not concatenable", a.shape, b.shape)
    return torch.cat([a, b], dim=-2)


def slice_tokens(x: Tensor, start: int, stop: int) -> Tensor:
    if not 0 <= start <= stop <= x.shape[-2]:
        raise ShapeError(f"token slice [{start}:{stop}] out of range", x.shape)
    return x[..., start:stop, :]


def multi_head_attention(
    x: Tensor,
    w_qkv: Tensor,
    b_qkv: Tensor,
    w_out: Tensor,
    b_out: Tensor,
    heads: int,
) -> Tensor:
    """Self-attention over (..., T, D) tokens; w_qkv is (3D, D), w_out is (D, D)."""
    *lead, t, d = x.shape
    if d % heads != 0:
        raise ShapeError(f"width {d} not divisible by {heads} heads", x.shape)
    if w_qkv.shape != (3 * d, d):
        raise ShapeError("qkv projection does not match token width", x.shape, w_qkv.shape)
    hd = d // heads
    qkv = linear(x, w_qkv, b_qkv)
    q, k, v = qkv.split(d, dim=-1)

    def heads_first(z):
        return z.reshape(*lead, t, heads, hd).transpose(-3, -2)

    q, k, v = heads_first(q), heads_first(k), heads_first(v)
    scores = softmax(matmul(q, k.transpose(-1, -2)) / math.sqrt(hd), dim=-1)
    y = matmul(scores, v).transpose(-3, -2).reshape(*lead, t, d)
    return linear(y, w_out, b_out)


def mlp_block(x: Tensor, w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor) -> Tensor:
    return linear(gelu(linear(x, w1, b1)), w2, b2)


def clamp_probability(p: Tensor, eps: float = LOG_CLAMP) -> Tensor:
    return p.clamp(eps, 1.0 - eps)
