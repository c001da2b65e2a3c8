import numpy as np
import pytest
from scipy import ndimage

from attriqa.errors import ConfigError, DataError, DuplicateDistortion, UnknownDistortion
from attriqa.imaging.bank import apply_distortion, apply_sequence
from attriqa.imaging.image import Image, load_png, save_png, to_uint8
from attriqa.imaging.schedule import (
    StrengthLevel,
    parse_distortion,
    schedule_rows,
    supported_distortions,
)
from attriqa.render.builder import schedule_document


def test_table_has_ten_distortions_in_order():
    ids = [d.id for d in supported_distortions()]
    assert len(ids) == 10
    assert ids[0] == "gaussian_blur"
    assert len(set(ids)) == 10
    assert parse_distortion("Gaussian-Blur").id == "gaussian_blur"


def test_unknown_distortion():
    with pytest.raises(UnknownDistortion):
        parse_distortion("vignetting")


def test_gaussian_schedule_endpoint():
    assert parse_distortion("gaussian_blur").parameter_at(1.0) == 5.0
    assert parse_distortion("impulse_noise").parameter_at(0.6) == pytest.approx(0.24)


def test_strength_level_bounds():
    assert StrengthLevel(3).strength == 0.6
    with pytest.raises(ConfigError):
        StrengthLevel(6)


def test_image_validation():
    with pytest.raises(DataError):
        Image(np.zeros((8, 8, 3)))
    with pytest.raises(DataError):
        Image(np.full((16, 16, 3), 1.5))
    with pytest.raises(DataError):
        Image(np.full((16, 16, 2), 0.5))


def dense_gaussian(data, sigma):
    radius = int(np.ceil(3 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k1 = np.exp(-(x**2) / (2 * sigma**2))
    k1 /= k1.sum()
    kernel = np.outer(k1, k1)
    # numpy "symmetric" repeats the edge sample, the same rule as scipy "reflect"
    padded = np.pad(data, ((radius, radius), (radius, radius), (0, 0)), mode="symmetric")
    h, w = data.shape[:2]
    out = np.zeros_like(data)
    for dy in range(2 * radius + 1):
        for dx in range(2 * radius + 1):
            out += kernel[dy, dx] * padded[dy : dy + h, dx : dx + w]
    return out


def test_gaussian_blur_matches_dense_convolution(texture):
    out = apply_distortion(texture, parse_distortion("gaussian_blur"), StrengthLevel(5))
    np.testing.assert_allclose(out.data, dense_gaussian(texture.data, 5.0), rtol=0, atol=1e-12)


def test_level_zero_is_identity(texture):
    rng = np.random.default_rng(0)
    for d in supported_distortions():
        assert apply_distortion(texture, d, StrengthLevel(0), rng) == texture


@pytest.mark.parametrize("d", supported_distortions(), ids=lambda d: d.id)
def test_outputs_stay_in_range(texture, d):
    for level in range(1, 6):
        out = apply_distortion(texture, d, StrengthLevel(level), np.random.default_rng(level))
        assert out.shape == texture.shape
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0


def test_stochastic_kernels_are_deterministic(texture):
    for name in ("white_gaussian_noise", "impulse_noise"):
        d = parse_distortion(name)
        a = apply_distortion(texture, d, StrengthLevel(4), np.random.default_rng(42))
        b = apply_distortion(texture, d, StrengthLevel(4), np.random.default_rng(42))
        assert a == b


def test_stochastic_kernel_needs_stream(texture):
    with pytest.raises(ConfigError):
        apply_distortion(texture, parse_distortion("impulse_noise"), StrengthLevel(2))


def test_impulse_replacement_fraction(texture):
    out = apply_distortion(
        texture, parse_distortion("impulse_noise"), StrengthLevel(3), np.random.default_rng(9)
    )
    changed = np.any(out.data != texture.data, axis=2)
    assert abs(changed.mean() - 0.24) <= 0.02
    replaced = out.data[changed]
    assert np.all((replaced == 0.0) | (replaced == 1.0))


def test_impulse_hamming_fraction_rises_with_level(texture):
    d = parse_distortion("impulse_noise")

    def changed_fraction(level, seed):
        out = apply_distortion(texture, d, StrengthLevel(level), np.random.default_rng(seed))
        return np.any(out.data != texture.data, axis=2).mean()

    means = [np.mean([changed_fraction(k, seed) for seed in range(12)]) for k in range(6)]
    assert means[0] == 0.0
    assert all(a < b for a, b in zip(means, means[1:]))


def laplacian_energy(img):
    gray = img.data.mean(axis=2)
    return float(np.sum(ndimage.laplace(gray) ** 2))


def test_blur_energy_falls_with_level(texture):
    d = parse_distortion("gaussian_blur")
    energies = [laplacian_energy(apply_distortion(texture, d, StrengthLevel(k))) for k in range(6)]
    assert all(a >= b for a, b in zip(energies, energies[1:]))
    assert energies[-1] < energies[0]


def test_pixelate_top_level_blocks(texture):
    out = apply_distortion(texture, parse_distortion("pixelate"), StrengthLevel(5))
    block = out.data[:16, :16]
    np.testing.assert_allclose(block, np.broadcast_to(block[0, 0], block.shape), atol=1e-12)


def test_saturation_is_noop_on_gray():
    gray = Image(np.linspace(0.1, 0.9, 32 * 32).reshape(32, 32, 1))
    out = apply_distortion(gray, parse_distortion("color_saturation_scale"), StrengthLevel(5))
    assert out == gray


def test_order_of_application_matters(texture):
    blur = (parse_distortion("gaussian_blur"), StrengthLevel(3))
    noise = (parse_distortion("impulse_noise"), StrengthLevel(3))
    a = apply_sequence(texture, [blur, noise], np.random.default_rng(1))
    b = apply_sequence(texture, [noise, blur], np.random.default_rng(1))
    assert a != b


def test_sequence_rejects_repeats(texture):
    blur = (parse_distortion("gaussian_blur"), StrengthLevel(2))
    with pytest.raises(DuplicateDistortion):
        apply_sequence(texture, [blur, blur])


def test_png_round_trip(tmp_path, texture):
    path = save_png(texture, tmp_path / "t.png")
    back = load_png(path)
    assert back.shape == texture.shape
    np.testing.assert_array_equal(to_uint8(back), to_uint8(texture))


def test_unreadable_png(tmp_path):
    path = tmp_path / "broken.png"
    path.write_bytes(b"not a png")
    with pytest.raises(DataError):
        load_png(path)


def test_schedule_rows_cover_levels():
    rows = schedule_rows(5)
    assert [r["id"] for r in rows] == [d.id for d in supported_distortions()]
    assert rows[0]["values"] == [1.0, 2.0, 3.0, 4.0, 5.0]


def test_schedule_document_lists_every_kernel():
    text = schedule_document(5)
    for d in supported_distortions():
        assert f"`{d.id}`" in text
    assert "5·s" in text
