import pytest
import torch

from basemodel import BaseModel, build_base, denoiser_forward, sinusoidal_embedding
from check import DimensionError, ProtocolError
from synthdata import PATTERN_NAMES


def _latents(base, generator):
    return torch.randn(base.frames, base.channels, base.latent_size, base.latent_size, generator=generator)


def test_forward_keeps_latent_shape(base, generator):
    x = _latents(base, generator)
    with torch.no_grad():
        assert base(x, 50).shape == x.shape


def test_forward_checks_shape(base):
    with pytest.raises(DimensionError, match="x_t"):
        base(torch.zeros(base.frames + 1, base.channels, base.latent_size, base.latent_size), 5)


def test_mask_stream_takes_no_biases(base, generator):
    with pytest.raises(ProtocolError):
        base(_latents(base, generator), 5, biases=object(), stream="mask")


def test_construction_is_seeded(tiny_config):
    a = build_base(tiny_config, PATTERN_NAMES)
    b = build_base(tiny_config, PATTERN_NAMES)
    c = build_base(tiny_config, PATTERN_NAMES, seed=1)
    assert a.parameter_hash() == b.parameter_hash()
    assert a.parameter_hash() != c.parameter_hash()


def test_construction_leaves_global_rng_alone(tiny_config):
    torch.manual_seed(77)
    expected = torch.rand(3)
    torch.manual_seed(77)
    build_base(tiny_config, PATTERN_NAMES)
    assert torch.equal(torch.rand(3), expected)


def test_description_rebuilds_same_model(base):
    rebuilt = BaseModel.from_description(base.describe())
    assert rebuilt.parameter_hash() == base.parameter_hash()


def test_prompt_table(base):
    assert base.prompts.shape == (len(PATTERN_NAMES) + 1, base.prompt_length, base.token_dim)
    assert torch.equal(base.prompt(None), base.prompts[0])
    assert torch.equal(base.prompt("translate_right"), base.prompts[1])
    assert torch.equal(base.prompt(3), base.prompts[3])
    assert torch.equal(base.prompt("moonwalk"), base.null_prompt())


def test_freeze_stops_gradients(tiny_config):
    base = build_base(tiny_config, PATTERN_NAMES).freeze()
    assert not any(p.requires_grad for p in base.parameters())


def test_denoiser_forward_without_adapters_is_base(base, generator):
    x = _latents(base, generator)
    with torch.no_grad():
        assert torch.equal(denoiser_forward(base, x, 30), base(x, 30))


def test_prompt_changes_prediction(base, generator):
    x = _latents(base, generator)
    with torch.no_grad():
        assert not torch.allclose(base(x, 30, base.prompt("bounce")), base(x, 30))


def test_sinusoidal_embedding():
    e = sinusoidal_embedding(0, 8)
    assert e.shape == (8,)
    assert not torch.equal(sinusoidal_embedding(10, 8), e)
