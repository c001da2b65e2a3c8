"""A small vision transformer E_I with shallow and deep prompt tuning."""

import logging
from enum import Enum
from typing import Callable, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict, Field, model_validator
from torch import Tensor, nn

from attriqa.diffcore import ops
from attriqa.diffcore.params import ParamGroup
from attriqa.errors import ConfigError, ShapeError
from attriqa.imaging.image import Image

logger = logging.getLogger(__name__)


class PromptMode(str, Enum):
    NONE = "none"
    SHALLOW = "shallow"
    DEEP = "deep"


class TuneMode(str, Enum):
    SHALLOW = "shallow"
    DEEP = "deep"
    FULL = "full"


class VitConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    image_size: int = Field(default=64, ge=16)
    channels: int = Field(default=3, ge=1)
    patch_size: int = Field(default=8, ge=1)
    d_model: int = Field(default=64, ge=1)
    layers: int = Field(default=4, ge=1)
    heads: int = Field(default=4, ge=1)
    embed_dim: int = Field(default=64, ge=1)
    mlp_ratio: int = Field(default=2, ge=1)
    prompt_mode: PromptMode = PromptMode.NONE
    prompt_len: int = Field(default=0, ge=0)
    init_seed: int = 0

    @model_validator(mode="after")
    def _consistent(self):
        if self.d_model % self.heads != 0:
            raise ValueError(f"d_model {self.d_model} not divisible by heads {self.heads}")
        if self.image_size % self.patch_size != 0:
            raise ValueError(
                f"image_size {self.image_size} not divisible by patch_size {self.patch_size}"
            )
        return self

    @property
    def grid(self) -> int:
        return self.image_size // self.patch_size

    @property
    def num_tokens(self) -> int:
        """H: patch tokens plus the class token."""
        return self.grid**2 + 1


class TransformerBlock(nn.Module):
    """Pre-norm block: multi-head attention and MLP, each with a residual."""

    def __init__(self, d_model: int, heads: int, hidden: int):
        super().__init__()
        self.heads = heads
        self.ln1_w = nn.Parameter(torch.ones(d_model))
        self.ln1_b = nn.Parameter(torch.zeros(d_model))
        self.qkv_w = nn.Parameter(torch.empty(3 * d_model, d_model))
        self.qkv_b = nn.Parameter(torch.zeros(3 * d_model))
        self.out_w = nn.Parameter(torch.empty(d_model, d_model))
        self.out_b = nn.Parameter(torch.zeros(d_model))
        self.ln2_w = nn.Parameter(torch.ones(d_model))
        self.ln2_b = nn.Parameter(torch.zeros(d_model))
        self.fc1_w = nn.Parameter(torch.empty(hidden, d_model))
        self.fc1_b = nn.Parameter(torch.zeros(hidden))
        self.fc2_w = nn.Parameter(torch.empty(d_model, hidden))
        self.fc2_b = nn.Parameter(torch.zeros(d_model))

    def forward(self, x: Tensor) -> Tensor:
        h = ops.layernorm(x, self.ln1_w, self.ln1_b)
        x = x + ops.multi_head_attention(
            h, self.qkv_w, self.qkv_b, self.out_w, self.out_b, self.heads
        )
        h = ops.layernorm(x, self.ln2_w, self.ln2_b)
        return x + ops.mlp_block(h, self.fc1_w, self.fc1_b, self.fc2_w, self.fc2_b)


def insert_shallow_prompts(tokens: Tensor, prompts: Tensor | None) -> Tensor:
    """[x, p_1..p_K]: prompts appended after the H image tokens."""
    if prompts is None or prompts.shape[0] == 0:
        return tokens
    return ops.concat_tokens(tokens, prompts)


def deep_prompt_forward(
    tokens: Tensor,
    per_layer_prompts: Tensor | Sequence[Tensor],
    layers: Sequence[Callable[[Tensor], Tensor]],
) -> Tensor:
    """x^(l) = [y^(l-1), p^(l)];  y^(l) = Transformer^(l)(x^(l))[1:H]."""
    if len(per_layer_prompts) != len(layers):
        raise ConfigError(
            f"deep prompts need one prompt tensor per layer: "
            f"{len(per_layer_prompts)} given, {len(layers)} layers"
        )
    h = tokens.shape[-2]
    y = tokens
    for prompts, layer in zip(per_layer_prompts, layers):
        x = insert_shallow_prompts(y, prompts)
        y = ops.slice_tokens(layer(x), 0, h)
    return y


class VisionEncoder(nn.Module):
    def __init__(self, config: VitConfig):
        super().__init__()
        self.config = config
        c = config
        patch_dim = c.patch_size * c.patch_size * c.channels
        self.patch_w = nn.Parameter(torch.empty(c.d_model, patch_dim))
        self.patch_b = nn.Parameter(torch.zeros(c.d_model))
        self.cls_token = nn.Parameter(torch.empty(c.d_model))
        self.pos_embed = nn.Parameter(torch.empty(c.num_tokens, c.d_model))
        self.blocks = nn.ModuleList(
            TransformerBlock(c.d_model, c.heads, c.d_model * c.mlp_ratio) for _ in range(c.layers)
        )
        self.lnf_w = nn.Parameter(torch.ones(c.d_model))
        self.lnf_b = nn.Parameter(torch.zeros(c.d_model))
        self.proj = nn.Parameter(torch.empty(c.embed_dim, c.d_model))

        self.shallow_prompts = None
        self.deep_prompts = None
        if c.prompt_mode == PromptMode.SHALLOW:
            self.shallow_prompts = nn.Parameter(torch.empty(c.prompt_len, c.d_model))
        elif c.prompt_mode == PromptMode.DEEP:
            self.deep_prompts = nn.Parameter(torch.empty(c.layers, c.prompt_len, c.d_model))
        self.reset_parameters()

    def reset_parameters(self):
        gen = torch.Generator().manual_seed(self.config.init_seed)
        for name, p in self.named_parameters():
            if name.endswith(("_b", "ln1_w", "ln2_w", "lnf_w")):
                continue
            with torch.no_grad():
                p.copy_(torch.randn(p.shape, generator=gen, dtype=p.dtype) * 0.02)
        with torch.no_grad():
            self.proj.copy_(
                torch.randn(self.proj.shape, generator=gen, dtype=self.proj.dtype)
                / self.config.d_model**0.5
            )

    def patchify(self, images: Tensor) -> Tensor:
        """(B, C, H, W) -> (B, N, p*p*C), patches in row-major order."""
        b, ch, h, w = images.shape
        p = self.config.patch_size
        if ch != self.config.channels or h % p or w % p:
            raise ShapeError(
                f"images must have {self.config.channels} channels and sides divisible "
                f"by patch size {p}",
                images.shape,
            )
        x = images.reshape(b, ch, h // p, p, w // p, p)
        x = x.permute(0, 2, 4, 3, 5, 1)
        return x.reshape(b, (h // p) * (w // p), p * p * ch)

    def _positions(self, gh: int, gw: int) -> Tensor:
        g = self.config.grid
        pos = self.pos_embed[1:]
        if (gh, gw) == (g, g):
            return pos
        grid = pos.reshape(1, g, g, -1).permute(0, 3, 1, 2)
        grid = F.interpolate(grid, size=(gh, gw), mode="bilinear", align_corners=False)
        return grid.permute(0, 2, 3, 1).reshape(gh * gw, -1)

    def tokens(self, images: Tensor) -> Tensor:
        """Patch tokens plus positions, class token first: (B, H, d_model)."""
        p = self.config.patch_size
        gh, gw = images.shape[-2] // p, images.shape[-1] // p
        x = ops.linear(self.patchify(images), self.patch_w, self.patch_b)
        x = x + self._positions(gh, gw)
        cls = (self.cls_token + self.pos_embed[0]).expand(x.shape[0], 1, -1)
        return torch.cat([cls, x], dim=1)

    def forward(self, images: Tensor) -> Tensor:
        x = self.tokens(images)
        mode = self.config.prompt_mode
        if mode == PromptMode.DEEP:
            x = deep_prompt_forward(x, self.deep_prompts, list(self.blocks))
        else:
            if mode == PromptMode.SHALLOW:
                x = insert_shallow_prompts(x, self.shallow_prompts)
            for block in self.blocks:
                x = block(x)
        cls = ops.layernorm(x[:, 0], self.lnf_w, self.lnf_b)
        return ops.linear(cls, self.proj)

    def prompt_parameters(self) -> dict[str, nn.Parameter]:
        if self.shallow_prompts is not None:
            return {"shallow_prompts": self.shallow_prompts}
        if self.deep_prompts is not None:
            return {"deep_prompts": self.deep_prompts}
        return {}


def trainable_params(encoder: VisionEncoder, mode: TuneMode | str) -> list[ParamGroup]:
    """Split encoder tensors into the prompt group and the weight group for a tuning mode."""
    mode = TuneMode(mode)
    prompts = encoder.prompt_parameters()
    weights = {
        name: p for name, p in encoder.named_parameters() if name not in prompts
    }
    if mode != TuneMode.FULL and encoder.config.prompt_mode.value != mode.value:
        raise ConfigError(
            f"{mode.value} prompt tuning needs an encoder built with "
            f"prompt_mode={mode.value}, got {encoder.config.prompt_mode.value}"
        )
    groups = [ParamGroup("encoder", weights, trainable=mode == TuneMode.FULL)]
    if prompts:
        groups.append(ParamGroup("prompts", prompts, trainable=True))
    return groups


def image_tensor(img: Image, channels: int, dtype=torch.float64) -> Tensor:
    """(C, H, W) tensor with the channel count the encoder expects."""
    data = img.data
    if channels == 3 and img.channels == 1:
        data = data.repeat(3, axis=2)
    elif channels == 1 and img.channels == 3:
        data = data.mean(axis=2, keepdims=True)
    return torch.from_numpy(np.array(data, dtype=np.float64)).to(dtype).permute(2, 0, 1)


def prepare_images(images: Sequence[Image], config: VitConfig, dtype=torch.float64) -> Tensor:
    """Center-crop to square and resize to the configured side: (B, C, S, S)."""
    return torch.stack(
        [crop_resize(image_tensor(img, config.channels, dtype), config.image_size) for img in images]
    )


def crop_resize(t: Tensor, size: int) -> Tensor:
    """Differentiable center crop + bilinear resize of a (C, H, W) tensor."""
    _, h, w = t.shape
    side = min(h, w)
    top, left = (h - side) // 2, (w - side) // 2
    t = t[:, top : top + side, left : left + side]
    if side == size:
        return t
    return F.interpolate(
        t.unsqueeze(0), size=(size, size), mode="bilinear", align_corners=False, antialias=True
    ).squeeze(0)


def encode_image(img: Image, encoder: VisionEncoder) -> Tensor:
    """E_I(I) with no gradient state. Sides must be multiples of the patch size."""
    dtype = next(encoder.parameters()).dtype
    with torch.no_grad():
        return encoder(image_tensor(img, encoder.config.channels, dtype).unsqueeze(0))[0]
