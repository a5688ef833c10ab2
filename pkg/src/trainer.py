################################
# Miva Desk I2V Adapter Suite  #
# trainer.py                   #
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

import copy
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np
import torch
from tqdm import tqdm

from adapter import MivaAdapter, parameter_group
from basemodel import BaseModel, build_base
from check import DimensionError, ProtocolError, TrainingError
from composition import AdapterStack, build_bias_set
from logmanager import LOG
from masks import MaskSequence, dropout_prob, one_step_predict_mask
from schedule import NoiseSchedule, forward_diffuse, linear_schedule
from synthdata import PATTERN_NAMES, MotionPatternDataset


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and loop settings. Minibatches hold one clip.

    Attributes:
        lr: Adam learning rate, fixed for the whole run.
        iters: Iterations t_max.
        seed: Seeds clip windows, diffusion steps, and noise.
        betas: Adam (β₁, β₂).
        diffusion_steps, beta_start, beta_end: The training noise schedule.
        epsilon_mask: ε of the attention biases in masked training.
        prompt_dropout: Probability of the null prompt in base pretraining.
        base_anchor_prob: Probability of pinning frame 1 clean in base pretraining.
    """

    lr: float = 1e-5
    iters: int = 2000
    seed: int = 0
    betas: Tuple[float, float] = (0.9, 0.999)
    diffusion_steps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    epsilon_mask: float = 1e-6
    prompt_dropout: float = 0.1
    base_anchor_prob: float = 0.0

    def __post_init__(self):
        if self.iters < 0:
            raise TrainingError("train config: iterations must be non-negative, got {0}".format(self.iters))
        if self.lr < 0 or not math.isfinite(self.lr):
            raise TrainingError("train config: bad learning rate {0}".format(self.lr))

    @classmethod
    def from_config(cls, config: Mapping[str, Any], base: bool = False) -> "TrainConfig":
        return cls(
            lr=config["base_lr"] if base else config["lr"],
            iters=config["base_iters"] if base else config["iters"],
            seed=config["seed"],
            diffusion_steps=config["diffusion_steps"],
            beta_start=config["beta_start"],
            beta_end=config["beta_end"],
            epsilon_mask=config["epsilon_mask"],
            prompt_dropout=config["prompt_dropout"],
            base_anchor_prob=config["base_anchor_prob"],
        )

    def schedule(self) -> NoiseSchedule:
        return linear_schedule(self.diffusion_steps, self.beta_start, self.beta_end, 1)


def denoise_loss(eps_hat: torch.Tensor, eps_true: torch.Tensor, exclude_first_frame: bool = True) -> torch.Tensor:
    """Mean squared error over frames, frame 1 excluded by default. Frames are the leading axis.

    Raises:
        DimensionError: If shapes differ or there are fewer than 2 frames.
    """
    if eps_hat.shape != eps_true.shape:
        raise DimensionError("loss: {0} != {1}".format(tuple(eps_hat.shape), tuple(eps_true.shape)))
    if eps_hat.shape[0] < 2:
        raise DimensionError("loss: need at least 2 frames, got {0}".format(eps_hat.shape[0]))
    start = 1 if exclude_first_frame else 0
    return ((eps_hat[start:] - eps_true[start:]) ** 2).mean()


class _Draws:
    """Random draws of a training run, in a fixed order: numpy for windows and branches, torch for steps and noise."""

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)
        self.generator = torch.Generator().manual_seed(seed)

    def step(self, schedule: NoiseSchedule) -> int:
        return int(torch.randint(1, schedule.T, (1,), generator=self.generator))

    def noise(self, like: torch.Tensor) -> torch.Tensor:
        return torch.randn(like.shape, generator=self.generator, dtype=like.dtype)


def _check_finite(loss: torch.Tensor, iteration: int, t: int, what: str) -> None:
    if not torch.isfinite(loss):
        raise TrainingError("{0}: loss is {1} at iteration {2}, t={3}".format(what, float(loss), iteration, t))


def train_step_miva(
    base: BaseModel, stack: AdapterStack, video: torch.Tensor, schedule: NoiseSchedule, draws: _Draws
) -> Tuple[torch.Tensor, int]:
    """Denoising loss of one clip window with frame 1 pinned clean. Returns (loss, t)."""
    x0 = base.vae.encode(video)
    t = draws.step(schedule)
    eps = draws.noise(x0)
    x_t = forward_diffuse(x0, t, eps, schedule)
    x_t[0] = x0[0]
    eps_hat = base(x_t, t, None, stack)
    return denoise_loss(eps_hat, eps), t


def train_step_mmiva(
    base: BaseModel,
    adapter: MivaAdapter,
    video: torch.Tensor,
    masks: Optional[torch.Tensor],
    t_train: int,
    t_max: int,
    schedule: NoiseSchedule,
    draws: _Draws,
    epsilon_mask: float = 1e-6,
) -> Tuple[torch.Tensor, str, int]:
    """Joint video and mask denoising loss of one clip window.

    With probability ½(1 + cos(π·t_train/t_max)) the ground-truth masks build the attention biases; otherwise the
    one-step prediction of the mask stream does, with frame 1 set to the ground truth. The predicted masks do not pass
    gradients into the biases.

    Returns:
        (loss, "ground_truth" or "predicted", t).

    Raises:
        ProtocolError: If the window has no masks.
    """
    if masks is None:
        raise ProtocolError("masked training step: the clip has no ground-truth masks")
    p = dropout_prob(t_train, t_max) if t_max > 0 else 1.0
    use_truth = bool(draws.rng.random() < p)

    x0 = base.vae.encode(video)
    s0 = base.vae.encode_mask(masks)
    t = draws.step(schedule)
    eps_x, eps_s = draws.noise(x0), draws.noise(s0)
    x_t = forward_diffuse(x0, t, eps_x, schedule)
    s_t = forward_diffuse(s0, t, eps_s, schedule)
    x_t[0], s_t[0] = x0[0], s0[0]

    stack = AdapterStack.single(adapter)
    eps_s_hat = base(s_t, t, None, stack, None, "mask")
    if use_truth:
        S = MaskSequence(masks)
    else:
        S = one_step_predict_mask(s_t.detach(), t, eps_s_hat.detach(), schedule, base.vae)
        S.maps[0] = masks[0]
    biases = build_bias_set(stack, [S], base.latent_size, base.latent_size, epsilon_mask)
    eps_x_hat = base(x_t, t, None, stack, biases)

    loss = denoise_loss(torch.cat([eps_x_hat, eps_s_hat], dim=1), torch.cat([eps_x, eps_s], dim=1))
    return loss, "ground_truth" if use_truth else "predicted", t


def _train_adapter(
    dataset: MotionPatternDataset,
    base: BaseModel,
    config: TrainConfig,
    ranks: Dict[str, int],
    masked: bool,
    pattern: Optional[str],
    record: Optional[Dict[str, Any]],
    progress: bool,
) -> MivaAdapter:
    if not len(dataset):
        raise TrainingError("train: empty dataset")
    if masked and not dataset.has_masks:
        raise TrainingError("train: masked adapters need a dataset with subject masks")
    base.freeze()
    before = base.parameter_hash()
    pattern = pattern if pattern is not None else ",".join(dataset.patterns)
    adapter = MivaAdapter(base, ranks, masked, pattern, config.seed, record)
    schedule = config.schedule()
    draws = _Draws(config.seed)
    stack = AdapterStack.single(adapter)
    optimizer = torch.optim.Adam(adapter.parameters(), lr=config.lr, betas=config.betas)

    adapter.train()
    for iteration in tqdm(range(config.iters), desc="train " + adapter.kind, disable=not progress):
        LOG.count = iteration
        video, masks, _ = dataset.sample_window(draws.rng, base.frames)
        if masked:
            loss, branch, t = train_step_mmiva(
                base, adapter, video, masks, iteration, config.iters, schedule, draws, config.epsilon_mask
            )
            adapter.branch_log.append(branch)
        else:
            loss, t = train_step_miva(base, stack, video, schedule, draws)
        _check_finite(loss, iteration, t, "train " + adapter.kind)

        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        adapter.loss_curve.append(float(loss))
        LOG.info("Trainer", adapter.kind, "loss", "{0:.6f}".format(float(loss)), "t={0}".format(t))
    adapter.eval()

    if base.parameter_hash() != before:
        raise TrainingError("train: base parameters changed during adapter training")
    return adapter


def train_miva(
    dataset: MotionPatternDataset,
    base: BaseModel,
    config: TrainConfig,
    ranks: Dict[str, int],
    pattern: Optional[str] = None,
    record: Optional[Dict[str, Any]] = None,
    progress: bool = False,
) -> MivaAdapter:
    """Train a plain adapter on a few-shot dataset. The base stays frozen.

    Each iteration takes a random F-frame window of a random clip, a random step t in [1, T), and fresh noise, and
    steps Adam on the adapter parameters only.

    Args:
        dataset: Training clips.
        base: The frozen base.
        config: Loop settings.
        ranks: Adapter ranks.
        pattern: Name to record; the dataset's pattern names if omitted.
        record: Config to embed in the adapter.
        progress: Whether to show a progress bar.

    Raises:
        TrainingError: On an empty dataset or a non-finite loss.
    """
    return _train_adapter(dataset, base, config, ranks, False, pattern, record, progress)


def train_mmiva(
    dataset: MotionPatternDataset,
    base: BaseModel,
    config: TrainConfig,
    ranks: Dict[str, int],
    pattern: Optional[str] = None,
    record: Optional[Dict[str, Any]] = None,
    progress: bool = False,
) -> MivaAdapter:
    """Train a masked adapter on clips with subject masks; see train_miva.

    The adapter's branch_log records, per iteration, whether ground-truth or predicted masks built the biases.

    Raises:
        TrainingError: If the dataset lacks masks, is empty, or the loss goes non-finite.
    """
    return _train_adapter(dataset, base, config, ranks, True, pattern, record, progress)


def pretrain_base(
    dataset: MotionPatternDataset, model_config: Mapping[str, Any], config: TrainConfig, progress: bool = False
) -> Tuple[BaseModel, List[float]]:
    """Train the toy base model from scratch on several patterns, then freeze it.

    Each clip window is conditioned on its pattern's prompt, replaced by the null prompt with probability
    prompt_dropout. With probability base_anchor_prob frame 1 is pinned clean and left out of the loss; otherwise the
    loss covers all frames.

    Returns:
        The frozen base and its loss curve.
    """
    if not len(dataset):
        raise TrainingError("pretrain: empty dataset")
    if len(dataset.patterns) < 2:
        LOG.msg("WARNING", "Trainer", "pretrain_base", "a single pattern gives narrow motion priors", dataset.patterns)
    base = build_base(model_config, PATTERN_NAMES, config.seed)
    schedule = config.schedule()
    draws = _Draws(config.seed)
    optimizer = torch.optim.Adam(base.parameters(), lr=config.lr, betas=config.betas)
    losses = []

    base.train()
    for iteration in tqdm(range(config.iters), desc="pretrain base", disable=not progress):
        LOG.count = iteration
        video, _, pattern = dataset.sample_window(draws.rng, base.frames)
        dropped = bool(draws.rng.random() < config.prompt_dropout)
        anchored = bool(draws.rng.random() < config.base_anchor_prob)
        c = base.null_prompt() if dropped else base.prompt(pattern)

        x0 = base.vae.encode(video)
        t = draws.step(schedule)
        eps = draws.noise(x0)
        x_t = forward_diffuse(x0, t, eps, schedule)
        if anchored:
            x_t[0] = x0[0]
        loss = denoise_loss(base(x_t, t, c), eps, exclude_first_frame=anchored)
        _check_finite(loss, iteration, t, "pretrain")

        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        losses.append(float(loss))
        LOG.info("Trainer", "base", "loss", "{0:.6f}".format(float(loss)), "t={0}".format(t))
    return base.freeze().eval(), losses


def gradient_check(
    parameters: Mapping[str, torch.Tensor],
    loss_fn: Callable[[], torch.Tensor],
    h: float = 1e-4,
    samples: int = 6,
    seed: int = 0,
    group: Callable[[str], str] = lambda name: name,
    floor: float = 1e-8,
) -> Dict[str, float]:
    """Compare autograd gradients with central finite differences.

    For every parameter, up to `samples` coordinates are perturbed by ±h. Errors are reported per group as
    ‖g_analytic − g_numeric‖ / max(‖g_analytic‖ + ‖g_numeric‖, floor) over the sampled coordinates.

    Args:
        parameters: Name to parameter tensor (requires_grad).
        loss_fn: Recomputes the scalar loss from the current parameter values.
        h: Perturbation.
        samples: Coordinates per parameter.
        seed: Picks the coordinates.
        group: Maps a parameter name to its report group.
        floor: Lower bound of the error denominator.

    Returns:
        Group name to relative error.
    """
    names = list(parameters)
    tensors = [parameters[name] for name in names]
    for p in tensors:
        p.grad = None
    loss = loss_fn()
    analytic = torch.autograd.grad(loss, tensors, allow_unused=True)

    rng = np.random.default_rng(seed)
    pairs = {}  # type: Dict[str, List[Tuple[float, float]]]
    with torch.no_grad():
        for name, p, g in zip(names, tensors, analytic):
            g = torch.zeros_like(p) if g is None else g
            flat, grad = p.view(-1), g.reshape(-1)
            picks = rng.choice(flat.numel(), size=min(samples, flat.numel()), replace=False)
            for i in picks:
                original = float(flat[i])
                flat[i] = original + h
                plus = float(loss_fn())
                flat[i] = original - h
                minus = float(loss_fn())
                flat[i] = original
                pairs.setdefault(group(name), []).append((float(grad[i]), (plus - minus) / (2 * h)))

    report = {}
    for key, values in pairs.items():
        a = np.array([v[0] for v in values])
        n = np.array([v[1] for v in values])
        report[key] = float(np.linalg.norm(a - n) / max(np.linalg.norm(a) + np.linalg.norm(n), floor))
    return report


def adapter_gradient_check(
    base: BaseModel,
    adapter: MivaAdapter,
    video: torch.Tensor,
    masks: Optional[torch.Tensor] = None,
    t: int = 500,
    h: float = 1e-4,
    seed: int = 0,
    schedule: Optional[NoiseSchedule] = None,
    samples: int = 6,
) -> Dict[str, float]:
    """Finite-difference check of every adapter parameter group on the training loss, in float64.

    Works on copies: the adapter's weights are randomized first so that no group sits at a zero-gradient start, and
    masked adapters are checked on the joint loss with ground-truth biases.

    Returns:
        Group name (cfa, phi, ca.A, ca.B, tsa, mask_stream) to relative error.
    """
    schedule = schedule or linear_schedule()
    base = copy.deepcopy(base).double()
    adapter = copy.deepcopy(adapter).double()
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for p in adapter.parameters():
            p.copy_(0.3 * torch.randn(p.shape, generator=generator, dtype=p.dtype))
    adapter.requires_grad_(True)

    video = video.double()
    x0 = base.vae.encode(video)
    eps = torch.randn(x0.shape, generator=generator, dtype=x0.dtype)
    x_t = forward_diffuse(x0, t, eps, schedule)
    x_t[0] = x0[0]
    stack = AdapterStack.single(adapter)

    if adapter.masked:
        if masks is None:
            raise ProtocolError("gradient check: masked adapters need masks")
        masks = masks.double()
        s0 = base.vae.encode_mask(masks)
        eps_s = torch.randn(s0.shape, generator=generator, dtype=s0.dtype)
        s_t = forward_diffuse(s0, t, eps_s, schedule)
        s_t[0] = s0[0]
        biases = build_bias_set(stack, [MaskSequence(masks)], base.latent_size, base.latent_size)

        def loss_fn() -> torch.Tensor:
            eps_hat = torch.cat([base(x_t, t, None, stack, biases), base(s_t, t, None, stack, None, "mask")], dim=1)
            return denoise_loss(eps_hat, torch.cat([eps, eps_s], dim=1))

    else:

        def loss_fn() -> torch.Tensor:
            return denoise_loss(base(x_t, t, None, stack), eps)

    parameters = dict(adapter.named_parameters())
    return gradient_check(parameters, loss_fn, h, samples, seed, parameter_group)
