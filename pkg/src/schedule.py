################################
# Miva Desk I2V Adapter Suite  #
# schedule.py                  #
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

from typing import List, Sequence, Tuple

import numpy as np
import torch

from check import DimensionError, ScheduleError


class NoiseSchedule:
    """Variance-preserving noise schedule with a DDIM sub-schedule.

    Index t runs over 0..T-1. Step 0 is the clean signal (α=1, σ=0); sampling ends there.

    Attributes:
        alpha: α_t for every step, float64.
        sigma: σ_t for every step, float64.
        ddim_steps: Strictly increasing steps visited by the sampler.
    """

    def __init__(self, alpha: Sequence[float], sigma: Sequence[float], ddim_steps: Sequence[int]):
        self.alpha = np.asarray(alpha, dtype=np.float64)
        self.sigma = np.asarray(sigma, dtype=np.float64)
        self.ddim_steps = [int(s) for s in ddim_steps]

        if self.alpha.shape != self.sigma.shape or self.alpha.ndim != 1 or len(self.alpha) < 2:
            raise ScheduleError("schedule: alpha and sigma must be matching 1-D arrays of at least 2 steps")
        if np.max(np.abs(self.alpha ** 2 + self.sigma ** 2 - 1.0)) > 1e-9:
            raise ScheduleError("schedule: not variance preserving")
        if np.any(self.alpha <= 0) or np.any(self.alpha > 1) or np.any(self.sigma < 0) or np.any(self.sigma >= 1):
            raise ScheduleError("schedule: alpha must lie in (0,1] and sigma in [0,1)")
        if np.any(np.diff(self.alpha) >= 0):
            raise ScheduleError("schedule: alpha must decrease with t")
        if not self.ddim_steps or any(b <= a for a, b in zip(self.ddim_steps, self.ddim_steps[1:])):
            raise ScheduleError("schedule: DDIM steps must be a nonempty strictly increasing list")
        if self.ddim_steps[0] < 1 or self.ddim_steps[-1] >= self.T:
            raise ScheduleError("schedule: DDIM steps must lie in [1, {0})".format(self.T))

    @property
    def T(self) -> int:
        return len(self.alpha)

    def check_step(self, t: int) -> int:
        if not 0 <= int(t) < self.T:
            raise ScheduleError("step {0} outside [0, {1})".format(t, self.T))
        return int(t)

    def sampling_steps(self) -> List[Tuple[int, int, int]]:
        """(DDIM index, t, t_prev) triples in sampling order. Index 0 is the noisiest step."""
        descending = self.ddim_steps[::-1]
        return [(k, t, descending[k + 1] if k + 1 < len(descending) else 0) for k, t in enumerate(descending)]

    @property
    def terminal_step(self) -> int:
        """The step sampling starts from."""
        return self.ddim_steps[-1]


def linear_schedule(
    diffusion_steps: int = 1000, beta_start: float = 1e-4, beta_end: float = 0.02, ddim_steps: int = 50
) -> NoiseSchedule:
    """Linear-β schedule mapped to (α_t, σ_t), with uniformly spaced DDIM steps 1, 1+s, 1+2s, ...

    Args:
        diffusion_steps: T.
        beta_start: β at step 1.
        beta_end: β at step T-1.
        ddim_steps: Number of sampling steps.
    """
    if ddim_steps < 1 or ddim_steps > diffusion_steps - 1:
        raise ScheduleError("schedule: cannot fit {0} DDIM steps in {1} steps".format(ddim_steps, diffusion_steps))
    betas = np.linspace(beta_start, beta_end, diffusion_steps - 1, dtype=np.float64)
    alphas_cumprod = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
    alpha = np.sqrt(alphas_cumprod)
    sigma = np.sqrt(1.0 - alphas_cumprod)

    stride = diffusion_steps // ddim_steps
    steps = [1 + k * stride for k in range(ddim_steps)]
    return NoiseSchedule(alpha, sigma, steps)


def forward_diffuse(x0: torch.Tensor, t: int, eps: torch.Tensor, schedule: NoiseSchedule) -> torch.Tensor:
    """α_t·x0 + σ_t·eps."""
    if eps.shape != x0.shape:
        raise DimensionError("forward_diffuse: eps {0} != x0 {1}".format(tuple(eps.shape), tuple(x0.shape)))
    t = schedule.check_step(t)
    return float(schedule.alpha[t]) * x0 + float(schedule.sigma[t]) * eps


def predict_clean(x_t: torch.Tensor, t: int, eps_hat: torch.Tensor, schedule: NoiseSchedule) -> torch.Tensor:
    """One-step estimate of the clean signal, (x_t − σ_t·eps_hat)/α_t."""
    if eps_hat.shape != x_t.shape:
        raise DimensionError("predict_clean: eps_hat {0} != x_t {1}".format(tuple(eps_hat.shape), tuple(x_t.shape)))
    t = schedule.check_step(t)
    if schedule.alpha[t] == 0:
        raise ScheduleError("predict_clean: singular step {0}, alpha is 0".format(t))
    return (x_t - float(schedule.sigma[t]) * eps_hat) / float(schedule.alpha[t])


def ddim_step(
    x_t: torch.Tensor, t: int, t_prev: int, eps_hat: torch.Tensor, schedule: NoiseSchedule
) -> torch.Tensor:
    """Deterministic DDIM update (η=0) from step t to step t_prev."""
    t, t_prev = schedule.check_step(t), schedule.check_step(t_prev)
    if t <= t_prev:
        raise ScheduleError("ddim_step: t={0} must exceed t_prev={1}".format(t, t_prev))
    x0_hat = predict_clean(x_t, t, eps_hat, schedule)
    return float(schedule.alpha[t_prev]) * x0_hat + float(schedule.sigma[t_prev]) * eps_hat
