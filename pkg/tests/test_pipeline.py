from dataclasses import replace

import pytest
import torch

from adaptermanager import attach
from check import ConfigError, DimensionError, ProtocolError
from masks import JointTensor
from pipeline import GenerationConfig, Sampler, animate
from synthdata import MotionPattern, render_pattern


@pytest.fixture
def settings(tiny_config):
    return GenerationConfig.from_config(tiny_config)


@pytest.fixture
def clip(base):
    size = base.latent_size * base.vae.patch_size
    return render_pattern(MotionPattern.named("fall_dots"), 0, base.frames, size, size)


def test_only_unit_guidance_is_supported():
    with pytest.raises(ConfigError) as info:
        GenerationConfig(cfg_scale=7.5)
    assert info.value.key == "cfg_scale"
    with pytest.raises(ConfigError):
        GenerationConfig(ddim_steps=0)


def test_generation_config_from_config(tiny_config, settings):
    assert settings.ddim_steps == tiny_config["ddim_steps"]
    assert settings.mask_step_set() == frozenset(range(tiny_config["ddim_steps"]))
    assert settings.schedule().T == tiny_config["diffusion_steps"]


def test_animate_plain_adapter(base, miva_adapter, settings, clip):
    video, _ = clip
    result = animate(video[0], attach(base, miva_adapter), settings)
    assert result.video.shape == (base.frames, 3, 16, 16)
    assert result.latents.shape == (base.frames, base.channels, base.latent_size, base.latent_size)
    assert result.masks == []
    assert result.timings["mask_computations"] == 0
    assert result.timings["steps"] == settings.ddim_steps
    assert bool(torch.isfinite(result.video).all())

    reconstruction = base.vae.decode(base.vae.encode(video[0]))
    assert torch.allclose(result.video[0], reconstruction, atol=1e-6)


def test_animate_is_deterministic(base, miva_adapter, settings, clip):
    video, _ = clip
    first = animate(video[0], attach(base, miva_adapter), settings).video
    second = animate(video[0], attach(base, miva_adapter), settings).video
    assert torch.equal(first, second)


def test_animate_seed_changes_output(base, miva_adapter, settings, clip):
    video, _ = clip
    one = animate(video[0], attach(base, miva_adapter), settings).video
    two = animate(video[0], attach(base, miva_adapter), replace(settings, seed=settings.seed + 1)).video
    assert not torch.equal(one[1:], two[1:])


def test_animate_masked_adapter(base, mmiva_adapter, settings, clip):
    video, masks = clip
    result = animate(video[0], attach(base, mmiva_adapter), settings, [masks[0]])
    assert result.video.shape == (base.frames, 3, 16, 16)
    assert len(result.masks) == 1
    generated = result.masks[0]
    assert generated.maps.shape == (base.frames, 1, 16, 16)
    assert torch.equal(generated.maps[0], masks[0])
    assert result.timings["mask_computations"] == settings.ddim_steps


def test_mask_steps_subset_reuses_cached_biases(base, mmiva_adapter, settings, clip):
    video, masks = clip
    settings = replace(settings, mask_steps="0:10:5")
    result = animate(video[0], attach(base, mmiva_adapter), settings, [masks[0]])
    assert result.timings["mask_computations"] == 2
    assert bool(torch.isfinite(result.video).all())


def test_mask_count_must_match(base, miva_adapter, mmiva_adapter, settings, clip):
    video, masks = clip
    with pytest.raises(ProtocolError):
        animate(video[0], attach(base, mmiva_adapter), settings)
    with pytest.raises(ProtocolError):
        animate(video[0], attach(base, miva_adapter), settings, [masks[0]])


def test_mask_shape_must_match_image(base, mmiva_adapter, settings, clip):
    video, _ = clip
    with pytest.raises(DimensionError):
        animate(video[0], attach(base, mmiva_adapter), settings, [torch.zeros(1, 8, 8)])


def test_image_must_fit_the_base(base, miva_adapter, settings):
    with pytest.raises(DimensionError):
        animate(torch.zeros(3, 32, 32), attach(base, miva_adapter), settings)
    with pytest.raises(DimensionError):
        animate(torch.zeros(1, 3, 16, 16), attach(base, miva_adapter), settings)


def test_single_adapter_reduction(base, miva_adapter, settings, clip, perturbed):
    video, _ = clip
    adapter = perturbed(miva_adapter, seed=3)
    direct = animate(video[0], attach(base, adapter), settings).video
    composed = animate(video[0], attach(base, [adapter], [1.0]), settings).video
    assert float((direct - composed).abs().max()) <= 1e-5


def test_masked_step_needs_cached_biases(base, mmiva_adapter, settings, clip):
    video, masks = clip
    schedule = settings.schedule()
    sampler = Sampler(attach(base, mmiva_adapter), schedule, mask_step_set=frozenset({0}))
    latent = base.vae.encode(video)
    joint = JointTensor(latent, [], latent[0], [], [])
    with pytest.raises(ProtocolError):
        sampler.masked_denoise_step(joint, 1)
