import numpy as np
import pytest
import torch

from attriqa.attributes.model import DistortionIdentifier
from attriqa.diffcore.fdcheck import fd_check_input
from attriqa.encoder.vit import VisionEncoder, image_tensor
from attriqa.errors import ConfigError, ShapeError, UnknownDistortion
from attriqa.imaging.image import Image, load_png, to_uint8
from attriqa.saliency.maps import SaliencyMap, distortion_probability_fn, saliency_map
from attriqa.saliency.overlay import heat_colors, render_heatmap, render_overlay, write_map_csv
from helpers import tiny_vit


@pytest.fixture
def model(registry):
    encoder = VisionEncoder(tiny_vit()).to(torch.float64)
    return DistortionIdentifier(encoder, registry).eval()


@pytest.fixture
def image():
    return Image(np.random.default_rng(5).uniform(0.1, 0.9, (24, 40, 3)))


def test_map_covers_the_input(model, image):
    smap = saliency_map(image, "gaussian_blur", model, record_id="x#0")
    assert smap.shape == (24, 40)
    assert smap.values.min() >= 0.0
    assert smap.values.max() == 1.0
    assert not smap.zero_gradient
    again = saliency_map(image, "gaussian_blur", model, record_id="x#0")
    np.testing.assert_array_equal(smap.values, again.values)


def test_zero_projection_gives_flagged_empty_map(model, image):
    with torch.no_grad():
        model.encoder.proj.zero_()
    smap = saliency_map(image, "impulse_noise", model)
    assert smap.zero_gradient
    assert not smap.values.any()
    assert smap.shape == (24, 40)


def test_unknown_distortion(model, image):
    with pytest.raises(UnknownDistortion):
        saliency_map(image, "pixelate", model)


def test_input_gradient_matches_finite_differences(model):
    img = Image(np.random.default_rng(6).uniform(0.1, 0.9, (16, 16, 3)))
    fn = distortion_probability_fn(model, "gaussian_blur")
    report = fd_check_input(fn, image_tensor(img, 3), samples=80)
    assert report.passed


def test_heat_colormap_red_rises():
    red = heat_colors(np.linspace(0.0, 1.0, 50))[:, 0]
    assert np.all(np.diff(red) > 0)
    np.testing.assert_allclose(heat_colors(np.array([0.0])), [[0.0, 0.0, 0.0]])


def test_overlay_with_empty_map_is_the_input(tmp_path, image):
    empty = SaliencyMap(np.zeros((24, 40)), "gaussian_blur", zero_gradient=True)
    path = render_overlay(image, empty, tmp_path / "o.png")
    np.testing.assert_array_equal(to_uint8(load_png(path)), to_uint8(image))


def test_outputs_round_trip_dimensions(tmp_path, model, image):
    smap = saliency_map(image, "gaussian_blur", model)
    assert load_png(render_heatmap(smap, tmp_path / "m.png")).shape == (24, 40, 3)
    assert load_png(render_overlay(image, smap, tmp_path / "o.png")).shape == (24, 40, 3)
    rows = (write_map_csv(smap, tmp_path / "m.csv")).read_text().splitlines()
    assert len(rows) == 24 and len(rows[0].split(",")) == 40


def test_overlay_argument_checks(tmp_path, image):
    smap = SaliencyMap(np.zeros((10, 10)), "gaussian_blur")
    with pytest.raises(ShapeError):
        render_overlay(image, smap, tmp_path / "o.png")
    with pytest.raises(ConfigError):
        render_overlay(image, SaliencyMap(np.zeros((24, 40)), "x"), tmp_path / "o.png", alpha=1.5)
