from pathlib import Path

import torch

from attriqa.encoder.vit import VitConfig

REPO_ROOT = Path(__file__).resolve().parent.parent


def tiny_vit(**kwargs) -> VitConfig:
    params = dict(
        image_size=16, patch_size=8, d_model=16, layers=2, heads=2, embed_dim=16, init_seed=5
    )
    params.update(kwargs)
    return VitConfig(**params)


def random_images(n: int, size: int = 16, seed: int = 0) -> torch.Tensor:
    gen = torch.Generator().manual_seed(seed)
    return torch.rand(n, 3, size, size, generator=gen, dtype=torch.float64)
