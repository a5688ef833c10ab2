import pytest
import torch

from check import DimensionError, NumericError
from preprocess import (
    PreprocessConfig,
    adain_final,
    dct3,
    dct_matrix,
    idct3,
    lowpass_filter,
    mix_spectra,
    preprocess,
    shared_noise,
)
from schedule import linear_schedule


def test_shared_noise_degenerate_cases(generator):
    eps = torch.randn(4, 2, 3, 3, generator=generator)
    assert torch.equal(shared_noise(eps, 0.0), eps)
    assert torch.equal(shared_noise(eps, 1.0), eps[:1].expand_as(eps))
    mixed = shared_noise(eps, 0.25)
    assert torch.equal(mixed[0], eps[0])
    assert torch.allclose(mixed[2], 0.25 * eps[0] + 0.75 * eps[2])


def test_shared_noise_errors():
    with pytest.raises(NumericError):
        shared_noise(torch.zeros(3, 1), 1.5)
    with pytest.raises(DimensionError):
        shared_noise(torch.zeros(1, 1), 0.5)


def test_dct_matrix_is_orthonormal():
    matrix = dct_matrix(7)
    assert torch.allclose(matrix @ matrix.T, torch.eye(7, dtype=torch.float64), atol=1e-12)


def test_dct3_round_trip(generator):
    x = torch.randn(8, 3, 16, 16, generator=generator, dtype=torch.float64)
    assert float((idct3(dct3(x)) - x).abs().max()) <= 1e-6
    with pytest.raises(DimensionError):
        dct3(torch.zeros(3, 3))


def test_dct3_of_constant_is_a_single_coefficient():
    X = dct3(torch.ones(4, 1, 4, 4, dtype=torch.float64))
    assert float(X[0, 0, 0, 0]) == pytest.approx(8.0)
    X[0, 0, 0, 0] = 0.0
    assert float(X.abs().max()) < 1e-12


def test_lowpass_filter_box():
    L = lowpass_filter(8, 16, 16, 0.25)
    assert L.shape == (8, 1, 16, 16)
    assert float(L.sum()) == 2 * 4 * 4
    assert float(L[1, 0, 3, 3]) == 1.0 and float(L[2, 0, 0, 0]) == 0.0
    assert float(lowpass_filter(4, 4, 4, 1.0).min()) == 1.0
    with pytest.raises(NumericError):
        lowpass_filter(4, 4, 4, 0.0)


def test_mix_spectra_extremes(generator):
    X = torch.randn(2, 1, 2, 2, generator=generator)
    E = torch.randn(2, 1, 2, 2, generator=generator)
    assert torch.equal(mix_spectra(X, E, torch.ones(2, 1, 2, 2)), X)
    assert torch.equal(mix_spectra(X, E, torch.zeros(2, 1, 2, 2)), E)


def test_preprocess_pins_first_frame(generator):
    schedule = linear_schedule(100, 1e-4, 0.02, 10)
    image = torch.randn(8, 4, 4, generator=generator, dtype=torch.float64)
    out = preprocess(image, 4, PreprocessConfig(0.2, 0.25), schedule, generator)
    assert out.shape == (4, 8, 4, 4)
    assert torch.equal(out[0], image)


def test_preprocess_full_pass_band_is_diffused_image():
    schedule = linear_schedule(100, 1e-4, 0.02, 10)
    image = torch.randn(8, 4, 4, generator=torch.Generator().manual_seed(0), dtype=torch.float64)
    out = preprocess(image, 4, PreprocessConfig(0.3, 1.0), schedule, torch.Generator().manual_seed(5))

    eps = torch.randn((4, 8, 4, 4), generator=torch.Generator().manual_seed(5), dtype=torch.float64)
    t = schedule.terminal_step
    x_T = float(schedule.alpha[t]) * image + float(schedule.sigma[t]) * eps[0]
    assert torch.allclose(out[1:], x_T.expand(3, 8, 4, 4), atol=1e-10)


def test_preprocess_is_seeded():
    schedule = linear_schedule(100, 1e-4, 0.02, 10)
    image = torch.zeros(8, 4, 4)
    a = preprocess(image, 4, PreprocessConfig(), schedule, torch.Generator().manual_seed(1))
    b = preprocess(image, 4, PreprocessConfig(), schedule, torch.Generator().manual_seed(1))
    assert torch.equal(a, b)


def test_config_ranges():
    with pytest.raises(NumericError):
        PreprocessConfig(alpha_shared=-0.1)
    with pytest.raises(NumericError):
        PreprocessConfig(lowpass_ratio=0.0)


def test_adain_matches_reference_statistics(generator):
    frames = torch.rand(3, 3, 8, 8, generator=generator) * 0.2
    reference = torch.rand(3, 8, 8, generator=generator)
    out = adain_final(frames, reference)
    std, mean = torch.std_mean(out.flatten(2), dim=2, unbiased=False)
    ref_std, ref_mean = torch.std_mean(reference.flatten(1), dim=1, unbiased=False)
    assert torch.allclose(mean, ref_mean.expand_as(mean), atol=1e-5)
    assert torch.allclose(std, ref_std.expand_as(std), atol=1e-5)


def test_adain_leaves_flat_channels(generator, capsys):
    frames = torch.rand(2, 3, 4, 4, generator=generator)
    frames[:, 1] = 0.5
    out = adain_final(frames, torch.rand(3, 4, 4, generator=generator))
    assert torch.equal(out[:, 1], frames[:, 1])
    assert "zero-variance" in capsys.readouterr().out
    with pytest.raises(DimensionError):
        adain_final(frames, torch.rand(2, 4, 4))
