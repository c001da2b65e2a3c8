import numpy as np
import pytest
import torch

from attriqa.encoder.text import (
    Provenance,
    embed_text_toy,
    read_embedding_file,
    tokenize,
    toy_anchor_set,
    write_embedding_file,
)
from attriqa.encoder.vit import (
    PromptMode,
    VisionEncoder,
    VitConfig,
    crop_resize,
    deep_prompt_forward,
    encode_image,
    insert_shallow_prompts,
    prepare_images,
    trainable_params,
)
from attriqa.errors import ConfigError, DataError, ShapeError
from attriqa.imaging.image import Image
from helpers import random_images, tiny_vit


def test_default_token_count():
    config = VitConfig()
    assert config.num_tokens == 65
    encoder = VisionEncoder(config).to(torch.float64)
    assert encoder.tokens(random_images(2, 64)).shape == (2, 65, 64)


def test_shallow_prompts_append_after_image_tokens():
    tokens = torch.randn(2, 65, 64, dtype=torch.float64)
    prompts = torch.randn(100, 64, dtype=torch.float64)
    out = insert_shallow_prompts(tokens, prompts)
    assert out.shape == (2, 165, 64)
    assert torch.equal(out[:, :65], tokens)
    assert torch.equal(out[1, 65:], prompts)


@pytest.mark.parametrize("prompt_len", [1, 3, 10])
def test_deep_prompts_keep_token_count(prompt_len):
    encoder = VisionEncoder(tiny_vit(prompt_mode="deep", prompt_len=prompt_len)).to(torch.float64)
    tokens = encoder.tokens(random_images(2))
    out = deep_prompt_forward(tokens, encoder.deep_prompts, list(encoder.blocks))
    assert out.shape == tokens.shape
    with pytest.raises(ConfigError):
        deep_prompt_forward(tokens, encoder.deep_prompts[:1], list(encoder.blocks))


def test_deep_embedding_shape_ignores_prompt_len():
    images = random_images(2)
    shapes = {
        tuple(VisionEncoder(tiny_vit(prompt_mode="deep", prompt_len=k)).to(torch.float64)(images).shape)
        for k in (1, 2, 7)
    }
    assert shapes == {(2, 16)}


def test_empty_shallow_prompts_match_prompt_free():
    plain = VisionEncoder(tiny_vit()).to(torch.float64)
    shallow = VisionEncoder(tiny_vit(prompt_mode="shallow", prompt_len=0)).to(torch.float64)
    shallow.load_state_dict(plain.state_dict(), strict=False)
    images = random_images(3)
    assert torch.equal(plain(images), shallow(images))


@pytest.mark.parametrize("mode", ["shallow", "deep"])
def test_zero_prompts_without_attention_output_match_prompt_free(mode):
    plain = VisionEncoder(tiny_vit()).to(torch.float64)
    prompted = VisionEncoder(tiny_vit(prompt_mode=mode, prompt_len=4)).to(torch.float64)
    prompted.load_state_dict(plain.state_dict(), strict=False)
    with torch.no_grad():
        for p in prompted.prompt_parameters().values():
            p.zero_()
        for encoder in (plain, prompted):
            for block in encoder.blocks:
                block.out_w.zero_()
                block.out_b.zero_()
    images = random_images(2)
    np.testing.assert_allclose(prompted(images).detach().numpy(), plain(images).detach().numpy(), atol=1e-12)


def test_trainable_groups_per_mode():
    shallow = VisionEncoder(VitConfig(prompt_mode="shallow", prompt_len=100))
    groups = {g.name: g for g in trainable_params(shallow, "shallow")}
    assert groups["prompts"].numel() == 6400
    assert groups["prompts"].trainable and not groups["encoder"].trainable
    full = {g.name: g for g in trainable_params(VisionEncoder(VitConfig()), "full")}
    assert full["encoder"].trainable and "prompts" not in full
    with pytest.raises(ConfigError):
        trainable_params(VisionEncoder(VitConfig()), "deep")


def test_deep_prompt_parameter_count():
    deep = VisionEncoder(VitConfig(prompt_mode=PromptMode.DEEP, prompt_len=10))
    groups = {g.name: g for g in trainable_params(deep, "deep")}
    assert groups["prompts"].numel() == 4 * 10 * 64


def test_encode_image_is_deterministic():
    encoder = VisionEncoder(tiny_vit()).to(torch.float64)
    img = Image(np.random.default_rng(0).random((16, 16, 3)))
    a, b = encode_image(img, encoder), encode_image(img, encoder)
    assert a.shape == (16,)
    assert torch.equal(a, b)
    gray = Image(np.random.default_rng(0).random((16, 16, 1)))
    assert encode_image(gray, encoder).shape == (16,)


def test_encode_image_needs_patch_multiples():
    encoder = VisionEncoder(tiny_vit()).to(torch.float64)
    with pytest.raises(ShapeError):
        encode_image(Image(np.full((20, 20, 3), 0.5)), encoder)


def test_non_square_grids_interpolate_positions():
    encoder = VisionEncoder(tiny_vit()).to(torch.float64)
    img = Image(np.random.default_rng(1).random((16, 32, 3)))
    assert torch.isfinite(encode_image(img, encoder)).all()


def test_crop_resize_centers_and_scales():
    t = torch.rand(3, 24, 40, dtype=torch.float64)
    out = crop_resize(t, 16)
    assert out.shape == (3, 16, 16)
    same = crop_resize(t[:, :, 8:32], 24)
    assert torch.equal(same, t[:, :, 8:32])
    batch = prepare_images([Image(np.full((24, 40, 3), 0.25))], tiny_vit())
    np.testing.assert_allclose(batch.numpy(), 0.25, atol=1e-12)


def test_vit_config_checks():
    with pytest.raises(ValueError):
        VitConfig(d_model=10, heads=4)
    with pytest.raises(ValueError):
        VitConfig(image_size=60, patch_size=8)


def test_tokenize_marks_negated_words():
    assert tokenize("There is not a blur.") == ["there", "is", "not", "not_a", "not_blur"]


def test_toy_embeddings():
    a = embed_text_toy("There is a softening of details in the photo.", 32)
    b = embed_text_toy("There is a softening of details in the photo.", 32)
    c = embed_text_toy("There is not a softening of details in the photo.", 32)
    assert a.shape == (32,)
    np.testing.assert_array_equal(a, b)
    assert np.linalg.norm(a) == pytest.approx(1.0)
    assert float(a @ c) < 0.999
    with pytest.raises(ConfigError):
        embed_text_toy("...")


def test_embedding_file_round_trip(tmp_path):
    anchors = toy_anchor_set({"x.0": ("There is a x.", "There is not a x.")}, 8)
    write_embedding_file(anchors, tmp_path / "e.atq")
    back = read_embedding_file(tmp_path / "e.atq")
    assert back.provenance == Provenance.IMPORTED
    assert back.ids() == ["x.0"]
    np.testing.assert_array_equal(back.positive["x.0"], anchors.positive["x.0"])
    with pytest.raises(DataError):
        back.pair("y.0")
