################################
# Miva Desk I2V Adapter Suite  #
# preprocess.py                #
# Copyright 2026               #
# The Miva Desk Authors        #
################################

# **********
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to
# deal in the Software without restriction, including without limitation the
# rights to use, copy, modify, merge, publish, distribute, sublicense, and/or
# sell copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in
# all copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING
# FROM, OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS
# IN THE SOFTWARE.
# **********

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import torch

from check import DimensionError, NumericError
from logmanager import LOG
from schedule import NoiseSchedule


@dataclass(frozen=True)
class PreprocessConfig:
    """Initial-latent settings.

    Attributes:
        alpha_shared: Shared-noise coefficient α in [0, 1].
        lowpass_ratio: ρ in (0, 1], the fraction of lowest DCT indices kept per axis.
        terminal_step: Diffusion step the initial latent sits at; the schedule's last DDIM step if None.
    """

    alpha_shared: float = 0.2
    lowpass_ratio: float = 0.25
    terminal_step: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.alpha_shared <= 1.0:
            raise NumericError("preprocess: alpha_shared {0} outside [0, 1]".format(self.alpha_shared))
        if not 0.0 < self.lowpass_ratio <= 1.0:
            raise NumericError("preprocess: lowpass_ratio {0} outside (0, 1]".format(self.lowpass_ratio))


def shared_noise(eps: torch.Tensor, alpha: float) -> torch.Tensor:
    """ε̃¹ = ε¹ and ε̃ⁱ = α·ε¹ + (1−α)·εⁱ for the later frames. eps is (F, ...)."""
    if not 0.0 <= alpha <= 1.0:
        raise NumericError("shared noise: alpha {0} outside [0, 1]".format(alpha))
    if eps.shape[0] < 2:
        raise DimensionError("shared noise: need at least 2 frames, got {0}".format(eps.shape[0]))
    out = alpha * eps[:1] + (1.0 - alpha) * eps
    out[0] = eps[0]
    return out


def dct_matrix(n: int, dtype: torch.dtype = torch.float64) -> torch.Tensor:
    """Orthonormal DCT-II matrix: row k is the k-th cosine basis vector over n samples."""
    k = torch.arange(n, dtype=torch.float64)[:, None]
    i = torch.arange(n, dtype=torch.float64)[None, :]
    matrix = torch.cos(math.pi * (2 * i + 1) * k / (2 * n)) * math.sqrt(2.0 / n)
    matrix[0] = matrix[0] / math.sqrt(2.0)
    return matrix.to(dtype)


def _matrices(x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    frames, _, rows, cols = x.shape
    return dct_matrix(frames, x.dtype), dct_matrix(rows, x.dtype), dct_matrix(cols, x.dtype)


def dct3(x: torch.Tensor) -> torch.Tensor:
    """3-D orthonormal DCT-II over (frame, height, width) of (F, C, H, W), channel by channel."""
    if x.dim() != 4:
        raise DimensionError("dct3: expected (F, C, H, W), got {0}".format(tuple(x.shape)))
    a, b, c = _matrices(x)
    return torch.einsum("if,jh,kw,fchw->icjk", a, b, c, x)


def idct3(X: torch.Tensor) -> torch.Tensor:
    """Inverse of dct3."""
    if X.dim() != 4:
        raise DimensionError("idct3: expected (F, C, H, W), got {0}".format(tuple(X.shape)))
    a, b, c = _matrices(X)
    return torch.einsum("if,jh,kw,icjk->fchw", a, b, c, X)


def lowpass_filter(frames: int, rows: int, cols: int, ratio: float, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Box low-pass filter (F, 1, H, W): 1 on the lowest ⌈ρ·n⌉ indices of every axis, 0 elsewhere."""
    if not 0.0 < ratio <= 1.0:
        raise NumericError("low-pass filter: ratio {0} outside (0, 1]".format(ratio))
    keep = [torch.arange(n) < math.ceil(ratio * n) for n in (frames, rows, cols)]
    box = keep[0][:, None, None] & keep[1][None, :, None] & keep[2][None, None, :]
    return box.to(dtype)[:, None]


def mix_spectra(X_T: torch.Tensor, E: torch.Tensor, L: torch.Tensor) -> torch.Tensor:
    """X_T⊙L + E⊙(1−L)."""
    return X_T * L + E * (1.0 - L)


def preprocess(
    image_latent: torch.Tensor,
    frames: int,
    config: PreprocessConfig,
    schedule: NoiseSchedule,
    generator: torch.Generator,
) -> torch.Tensor:
    """Initial latent video for sampling: shared noise, forward diffusion of the image, and DCT-domain mixing.

    The diffused image x_T = α_T·x^I + σ_T·ε¹ fills every frame. Its low frequencies are kept and the high
    frequencies come from the shared noise. Frame 1 is then set to x^I itself.

    Args:
        image_latent: Encoded input image x^I, (C, h, w).
        frames: F.
        config: α and ρ.
        schedule: Noise schedule.
        generator: Source of the F noise draws.

    Returns:
        (F, C, h, w) latents.
    """
    t = schedule.terminal_step if config.terminal_step is None else schedule.check_step(config.terminal_step)
    alpha_t, sigma_t = float(schedule.alpha[t]), float(schedule.sigma[t])

    eps = torch.randn((frames,) + tuple(image_latent.shape), generator=generator, dtype=image_latent.dtype)
    eps_tilde = shared_noise(eps, config.alpha_shared)
    x_T = (alpha_t * image_latent + sigma_t * eps[0]).expand(frames, *image_latent.shape)

    L = lowpass_filter(frames, image_latent.shape[-2], image_latent.shape[-1], config.lowpass_ratio, image_latent.dtype)
    out = idct3(mix_spectra(dct3(x_T), dct3(eps_tilde), L))
    out[0] = image_latent
    return out


def adain_final(frames: torch.Tensor, reference: torch.Tensor, eps: float = 1e-8) -> torch.Tensor:
    """Match every frame's per-channel mean and standard deviation to the reference image.

    Statistics are over spatial positions, with population standard deviation. A channel with zero variance is left
    as it is, with a warning.

    Args:
        frames: (F, C, H, W).
        reference: (C, H, W).
    """
    if frames.dim() != 4 or reference.dim() != 3 or frames.shape[1] != reference.shape[0]:
        raise DimensionError(
            "adain: frames {0} and reference {1} do not fit".format(tuple(frames.shape), tuple(reference.shape))
        )
    ref_std, ref_mean = torch.std_mean(reference.flatten(1), dim=1, unbiased=False)
    std, mean = torch.std_mean(frames.flatten(2), dim=2, unbiased=False)

    flat = std <= eps
    if bool(flat.any()):
        LOG.msg("WARNING", "Preprocess", "adain_final", "zero-variance channels left unchanged", int(flat.sum()))
    scale = torch.where(flat, torch.ones_like(std), ref_std[None] / std.clamp_min(eps))
    shift = torch.where(flat, torch.zeros_like(mean), ref_mean[None] - mean * scale)
    return frames * scale[:, :, None, None] + shift[:, :, None, None]
