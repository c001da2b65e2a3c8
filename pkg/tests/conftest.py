import os

import numpy as np
import pytest

from attriqa.attributes.registry import build_registry, read_registry_source
from attriqa.config.settings import settings
from attriqa.datagen.generator import GeneratorConfig, generate
from attriqa.datagen.sources import synthesize_sources, synthesize_texture


def pytest_collection_modifyitems(config, items):
    if os.environ.get("ATTRIQA_RUN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="set ATTRIQA_RUN_SLOW=1 to run desk-scale checks")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(autouse=True)
def isolated_ledger(tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "db_path", tmp_path / "ledger.db")
    monkeypatch.setattr(settings, "data_root", tmp_path)


@pytest.fixture
def texture():
    return synthesize_texture(np.random.default_rng(3), 64)


@pytest.fixture
def registry():
    source = read_registry_source()
    return build_registry(source, ["gaussian_blur", "impulse_noise"], dim=16)


@pytest.fixture
def dataset(tmp_path):
    """Four 32x32 sources, four variants each, two distortions."""
    sources = synthesize_sources(4, tmp_path / "sources", seed=11, size=32)
    config = GeneratorConfig(
        master_seed=11,
        repeats=4,
        distortions=["gaussian_blur", "impulse_noise"],
        sources=sources,
        synthetic_scores=True,
    )
    return generate(config, tmp_path / "data")
