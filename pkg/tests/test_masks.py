import math

import pytest
import torch

from autoencoder import PatchAutoencoder
from check import DimensionError, NumericError, ScheduleError
from masks import (
    AttentionMaskBias,
    DropoutSchedule,
    JointTensor,
    MaskSequence,
    attention_mask_entry,
    build_attention_bias,
    dropout_prob,
    label_mask_entry,
    one_step_predict_mask,
    parse_mask_steps,
)
from schedule import forward_diffuse


def test_mask_entry_values():
    assert attention_mask_entry(1.0, 1.0, 1e-6) == pytest.approx(9.999995e-7, abs=1e-4)
    assert attention_mask_entry(1.0, 0.0, 1e-6) == pytest.approx(-13.8155, abs=1e-4)
    assert attention_mask_entry(0.5, 0.5, 1e-6) == pytest.approx(-0.69314, abs=1e-4)
    assert attention_mask_entry(0.0, 0.0, 1e-6) == attention_mask_entry(1.0, 1.0, 1e-6)


def test_mask_entry_is_symmetric_and_bounded():
    s = torch.rand(50, generator=torch.Generator().manual_seed(0))
    q = torch.rand(50, generator=torch.Generator().manual_seed(1))
    a = attention_mask_entry(s, q)
    assert torch.equal(a, attention_mask_entry(q, s))
    assert bool((a <= math.log(1 + 1e-6) + 1e-7).all())
    assert bool((a >= math.log(1e-6) - 1e-7).all())


def test_mask_entry_clamps_with_warning(capsys):
    assert attention_mask_entry(1.5, 1.0) == attention_mask_entry(1.0, 1.0)
    assert "clamped" in capsys.readouterr().out
    with pytest.raises(NumericError):
        attention_mask_entry(0.5, 0.5, 0.0)


def test_label_entry():
    out = label_mask_entry(torch.tensor([0, 1, 2]), torch.tensor([0, 2, 2]), 1e-6)
    assert float(out[0]) == pytest.approx(math.log(1 + 1e-6), abs=1e-6)
    assert float(out[1]) == pytest.approx(math.log(1e-6), rel=1e-5)


def test_mask_sequence_validation(capsys):
    with pytest.raises(DimensionError):
        MaskSequence(torch.zeros(4, 2, 8, 8))
    with pytest.raises(NumericError):
        MaskSequence(torch.full((1, 1, 2, 2), math.nan))
    S = MaskSequence(torch.full((2, 1, 2, 2), 1.2))
    assert float(S.maps.max()) == 1.0
    assert "clamped" in capsys.readouterr().out


def test_all_ones_mask_gives_near_zero_bias():
    S = MaskSequence(torch.ones(3, 1, 16, 16))
    bias = build_attention_bias(S, 4, 4)
    assert bias.same.shape == (3, 16, 16)
    assert float(bias.dense().abs().max()) <= 1e-5


def test_binary_mask_separates_subject_from_background():
    maps = torch.zeros(2, 1, 4, 4)
    maps[:, :, :2] = 1.0
    bias = build_attention_bias(MaskSequence(maps), 4, 4)
    # Token 0 is subject, token 15 background.
    assert float(bias.same[0, 0, 1]) == pytest.approx(math.log(1 + 1e-6), abs=1e-6)
    assert float(bias.same[0, 0, 15]) == pytest.approx(math.log(1e-6), rel=1e-5)
    assert bias.frames == 2


def test_bias_blocks_reference_frames():
    maps = torch.zeros(3, 1, 2, 2)
    maps[0, 0, 0, 0] = 1.0
    maps[2, 0, 1, 1] = 1.0
    bias = build_attention_bias(MaskSequence(maps), 2, 2)
    dense = bias.dense()
    n = 4
    assert torch.equal(bias.first[2], dense[2 * n : 3 * n, 0:n])
    assert torch.equal(bias.prev[2], dense[2 * n : 3 * n, n : 2 * n])
    assert torch.equal(bias.prev[0], dense[0:n, 0:n])


def test_bias_source_must_fit_grid():
    with pytest.raises(DimensionError):
        AttentionMaskBias(torch.zeros(2, 5), 2, 2, 1e-6)


def test_resize_to_token_grid():
    S = MaskSequence(torch.ones(2, 1, 16, 16))
    assert S.resized(4, 4).shape == (2, 4, 4)
    with pytest.raises(DimensionError):
        S.resized(0, 4)


def test_half_plane_downsampling_gives_half_confidence_edge():
    maps = torch.zeros(1, 1, 8, 8)
    maps[:, :, :3] = 1.0
    resized = MaskSequence(maps).resized(4, 4)
    assert torch.equal(resized[0, :, 0], torch.tensor([1.0, 0.5, 0.0, 0.0]))
    bias = build_attention_bias(MaskSequence(maps), 4, 4)
    # Tokens 4..7 form the interpolated edge row.
    edge = float(bias.same[0, 4, 5])
    assert edge == pytest.approx(float(attention_mask_entry(torch.tensor(0.5), torch.tensor(0.5))), abs=1e-6)
    assert edge == pytest.approx(-0.693, abs=1e-3)


def test_dropout_schedule_endpoints():
    assert dropout_prob(0, 2000) == 1.0
    assert dropout_prob(2000, 2000) == 0.0
    assert dropout_prob(1000, 2000) == 0.5
    schedule = DropoutSchedule(10)
    assert all(schedule(t) >= schedule(t + 1) for t in range(10))
    with pytest.raises(NumericError):
        dropout_prob(11, 10)
    with pytest.raises(NumericError):
        DropoutSchedule(0)


def test_one_step_prediction_recovers_clean_mask(schedule):
    vae = PatchAutoencoder(4, 8)
    maps = torch.zeros(4, 1, 16, 16)
    maps[:, :, 4:12, 4:12] = 1.0
    s0 = vae.encode_mask(maps)
    eps = torch.randn(s0.shape, generator=torch.Generator().manual_seed(0))
    s_t = forward_diffuse(s0, 51, eps, schedule)
    S = one_step_predict_mask(s_t, 51, eps, schedule, vae)
    assert torch.allclose(S.maps, maps, atol=1e-4)


def test_joint_tensor_pins_first_frames():
    joint = JointTensor(torch.zeros(3, 2), [torch.zeros(3, 2)], torch.ones(2), [torch.full((2,), 2.0)], [5])
    pinned = joint.pinned()
    assert torch.equal(pinned.video[0], torch.ones(2))
    assert torch.equal(pinned.masks[0][0], torch.full((2,), 2.0))
    assert float(joint.video.abs().sum()) == 0.0
    assert pinned.mask_step == [5]


def test_parse_mask_steps():
    assert parse_mask_steps("0:40:5", 50) == frozenset(range(0, 40, 5))
    assert parse_mask_steps("0,3,7", 10) == frozenset({0, 3, 7})
    assert parse_mask_steps("all", 4) == frozenset(range(4))
    # Slices clip like Python slices.
    assert parse_mask_steps("0:40:5", 10) == frozenset({0, 5})
    for bad in ("0,10", "x", "1:2:3:4", "5:5", "-1"):
        with pytest.raises(ScheduleError):
            parse_mask_steps(bad, 10)
