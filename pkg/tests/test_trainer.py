import pytest
import torch

from adapter import MivaAdapter
from check import DimensionError, ProtocolError, TrainingError
from schedule import linear_schedule
from synthdata import MotionPattern, MotionPatternDataset, camera_dataset, pattern_dataset, render_pattern
from trainer import (
    TrainConfig,
    _Draws,
    adapter_gradient_check,
    denoise_loss,
    gradient_check,
    pretrain_base,
    train_miva,
    train_mmiva,
    train_step_mmiva,
)


@pytest.fixture
def train_config(tiny_config):
    return TrainConfig.from_config(tiny_config)


@pytest.fixture
def dataset(base):
    return pattern_dataset("translate_right", clips=8, frames=base.frames, size=16, seed=1)


def test_denoise_loss_skips_first_frame():
    eps_true = torch.ones(3, 2, 4, 4)
    eps_true[0] = 100.0
    eps_hat = torch.zeros(3, 2, 4, 4)
    assert float(denoise_loss(eps_hat, eps_true)) == pytest.approx(1.0)
    assert float(denoise_loss(eps_hat, eps_true, exclude_first_frame=False)) > 1000.0


def test_denoise_loss_shapes():
    with pytest.raises(DimensionError):
        denoise_loss(torch.zeros(3, 2), torch.zeros(3, 3))
    with pytest.raises(DimensionError):
        denoise_loss(torch.zeros(1, 2), torch.zeros(1, 2))


def test_train_config_checks():
    with pytest.raises(TrainingError):
        TrainConfig(iters=-1)
    with pytest.raises(TrainingError):
        TrainConfig(lr=float("nan"))


def test_train_miva_leaves_base_untouched(base, ranks, dataset, train_config):
    before = base.parameter_hash()
    adapter = train_miva(dataset, base, train_config, ranks)
    assert base.parameter_hash() == before
    assert adapter.base_hash == before
    assert len(adapter.loss_curve) == train_config.iters
    assert all(torch.isfinite(torch.tensor(adapter.loss_curve)))
    assert adapter.pattern == "translate_right"
    assert not adapter.masked


def test_train_miva_is_seeded(base, ranks, dataset, train_config):
    first = train_miva(dataset, base, train_config, ranks)
    second = train_miva(dataset, base, train_config, ranks)
    assert first.loss_curve == second.loss_curve


def test_train_miva_moves_adapter(base, ranks, dataset, tiny_config):
    config = TrainConfig.from_config(tiny_config)
    adapter = train_miva(dataset, base, TrainConfig(lr=1e-2, iters=2, diffusion_steps=config.diffusion_steps), ranks)
    fresh = MivaAdapter(base, ranks, False, seed=0)
    moved = any(not torch.equal(a, b) for a, b in zip(adapter.parameters(), fresh.parameters()))
    assert moved


def test_empty_dataset(base, ranks, train_config):
    with pytest.raises(TrainingError):
        train_miva(MotionPatternDataset(), base, train_config, ranks)


def test_masked_training_needs_masks(base, ranks, train_config):
    clips = camera_dataset("pan_right", scenes=1, count=2, frames=base.frames, size=16)
    assert not clips.has_masks
    with pytest.raises(TrainingError):
        train_mmiva(clips, base, train_config, ranks)


def test_train_mmiva_logs_branches(base, ranks, train_config):
    clips = pattern_dataset("fall_dots", clips=8, frames=base.frames, size=16)
    adapter = train_mmiva(clips, base, train_config, ranks)
    assert adapter.masked
    assert len(adapter.branch_log) == train_config.iters
    assert set(adapter.branch_log) <= {"ground_truth", "predicted"}
    assert adapter.branch_log[0] == "ground_truth"


def test_masked_step_without_masks(base, mmiva_adapter, train_config):
    video, _ = render_pattern(MotionPattern.named("fall_dots"), 0, base.frames, 16, 16)
    with pytest.raises(ProtocolError):
        train_step_mmiva(base, mmiva_adapter, video, None, 0, 4, train_config.schedule(), _Draws(0))


def test_pretrain_base(tiny_config):
    clips = pattern_dataset("fall_dots", clips=8, frames=4, size=16).merged(
        pattern_dataset("bounce", clips=8, frames=4, size=16)
    )
    config = TrainConfig.from_config(tiny_config, base=True)
    base, losses = pretrain_base(clips, tiny_config, config)
    assert len(losses) == config.iters
    assert not any(p.requires_grad for p in base.parameters())
    assert not base.training


def test_gradient_check_on_a_cubic():
    w = torch.tensor([0.5, -1.0, 2.0], dtype=torch.float64, requires_grad=True)
    report = gradient_check({"w": w}, lambda: (w**3).sum(), h=1e-5)
    assert report["w"] < 1e-8
    assert torch.equal(w.detach(), torch.tensor([0.5, -1.0, 2.0], dtype=torch.float64))


def test_adapter_gradients_match_finite_differences(base, miva_adapter, mmiva_adapter):
    schedule = linear_schedule(100, 1e-4, 0.02, 10)
    video, masks = render_pattern(MotionPattern.named("fall_dots"), 0, base.frames, 16, 16)
    for adapter, clip_masks in ((miva_adapter, None), (mmiva_adapter, masks)):
        report = adapter_gradient_check(base, adapter, video, clip_masks, t=50, schedule=schedule, samples=3)
        assert report
        assert max(report.values()) <= 1e-4, report
