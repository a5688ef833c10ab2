################################
# Miva Desk I2V Adapter Suite  #
# pipeline.py                  #
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

import time
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Sequence

import torch
from tqdm import tqdm

from adaptermanager import AdaptedModel
from check import ConfigError, DimensionError, ProtocolError
from composition import AdapterStack, BiasSet, build_bias_set
from logmanager import LOG
from masks import JointTensor, MaskSequence, one_step_predict_mask, parse_mask_steps
from maskcache import MaskCache
from preprocess import PreprocessConfig, adain_final, preprocess
from schedule import NoiseSchedule, ddim_step, forward_diffuse, linear_schedule


@dataclass(frozen=True)
class GenerationConfig:
    """Sampling settings.

    Attributes:
        ddim_steps: Number of DDIM steps.
        cfg_scale: Classifier-free guidance scale; only 1 is supported.
        seed: Seeds the initial noise.
        mask_steps: DDIM indices at which masks are regenerated.
        epsilon_mask: ε of the attention biases.
        adain: Whether to match frame statistics to the input image after the last step.
        diffusion_steps, beta_start, beta_end: The noise schedule.
        preprocess: Initial-latent settings.
    """

    ddim_steps: int = 50
    cfg_scale: float = 1.0
    seed: int = 0
    mask_steps: str = "0:40:5"
    epsilon_mask: float = 1e-6
    adain: bool = True
    diffusion_steps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)

    def __post_init__(self):
        if self.cfg_scale != 1.0:
            raise ConfigError("cfg_scale", "only a guidance scale of 1 is supported")
        if self.ddim_steps < 1:
            raise ConfigError("ddim_steps", "need at least one step")

    @classmethod
    def from_config(cls, config: Mapping[str, Any]) -> "GenerationConfig":
        return cls(
            ddim_steps=config["ddim_steps"],
            seed=config["seed"],
            mask_steps=config["mask_steps"],
            epsilon_mask=config["epsilon_mask"],
            adain=config["adain"],
            diffusion_steps=config["diffusion_steps"],
            beta_start=config["beta_start"],
            beta_end=config["beta_end"],
            preprocess=PreprocessConfig(config["alpha_shared"], config["lowpass_ratio"]),
        )

    def schedule(self) -> NoiseSchedule:
        return linear_schedule(self.diffusion_steps, self.beta_start, self.beta_end, self.ddim_steps)

    def mask_step_set(self) -> FrozenSet[int]:
        return parse_mask_steps(self.mask_steps, self.ddim_steps)


@dataclass
class AnimationResult:
    """What one animate call produces.

    Attributes:
        video: Pixel frames (F, 3, H, W); frame 1 is the autoencoder reconstruction of the input.
        latents: Final latents (F, C, h, w), before post-processing.
        masks: Generated subject masks, one per masked adapter in stacking order.
        timings: Wall seconds of the video and mask streams, the mask computation count, and the step count.
    """

    video: torch.Tensor
    latents: torch.Tensor
    masks: List[MaskSequence] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)


class Sampler:
    """DDIM sampling with an adapted model, frame 1 pinned in every stream.

    Attributes:
        model: The adapted model.
        schedule: Noise schedule.
        prompt: Prompt tokens for every forward.
        mask_step_set: DDIM indices at which masks are regenerated.
        cache: Biases of the current run.
    """

    def __init__(
        self,
        model: AdaptedModel,
        schedule: NoiseSchedule,
        prompt: Optional[torch.Tensor] = None,
        mask_step_set: FrozenSet[int] = frozenset(),
        epsilon_mask: float = 1e-6,
        input_masks: Sequence[Optional[MaskSequence]] = (),
    ):
        self.model = model
        self.schedule = schedule
        self.prompt = prompt
        self.mask_step_set = mask_step_set
        self.epsilon_mask = epsilon_mask
        self.input_masks = list(input_masks)
        self.cache = MaskCache()
        self.steps = schedule.sampling_steps()
        self.video_seconds = 0.0
        self.mask_seconds = 0.0

    def __video_forward(self, x: torch.Tensor, t: int, biases: Optional[BiasSet]) -> torch.Tensor:
        start = time.perf_counter()
        eps_hat = self.model(x, t, self.prompt, biases)
        self.video_seconds += time.perf_counter() - start
        return eps_hat

    def denoise_step(
        self, x: torch.Tensor, anchor: torch.Tensor, k: int, biases: Optional[BiasSet] = None
    ) -> torch.Tensor:
        """Advance video latents by DDIM iteration k and re-pin frame 1 to the anchor."""
        _, t, t_prev = self.steps[k]
        x = ddim_step(x, t, t_prev, self.__video_forward(x, t, biases), self.schedule)
        x[0] = anchor
        return x

    def __next_generation_step(self, k: int) -> int:
        later = [s for s in self.mask_step_set if s > k]
        return self.steps[min(later)][1] if later else 0

    def __generate_masks(self, joint: JointTensor, k: int) -> JointTensor:
        """Run every mask stream at a generation step, rebuild the biases, and jump each mask latent ahead."""
        stack = self.model.stack
        base = self.model.base
        _, t, _ = self.steps[k]
        t_next = self.__next_generation_step(k)

        start = time.perf_counter()
        predicted = list(self.input_masks)
        masks, mask_step = [], []
        for n, j in enumerate(stack.masked_indices):
            s_t = joint.masks[n]
            if joint.mask_step[n] != t:
                raise ProtocolError(
                    "masked step: mask latent {0} sits at t={1}, not {2}".format(n, joint.mask_step[n], t)
                )
            eps_hat = base(s_t, t, self.prompt, AdapterStack.single(stack.adapters[j]), None, "mask")
            S = one_step_predict_mask(s_t, t, eps_hat, self.schedule, base.vae)
            S.maps[0] = self.input_masks[j].maps[0]
            predicted[j] = S
            s_next = ddim_step(s_t, t, t_next, eps_hat, self.schedule)
            s_next[0] = joint.mask_anchors[n]
            masks.append(s_next)
            mask_step.append(t_next)

        biases = build_bias_set(stack, predicted, base.latent_size, base.latent_size, self.epsilon_mask)
        self.mask_seconds += time.perf_counter() - start
        self.cache.upload("video", biases, k)
        self.cache.upload("masks", [predicted[j] for j in stack.masked_indices], k)
        self.cache.record(k)
        return JointTensor(joint.video, masks, joint.video_anchor, joint.mask_anchors, mask_step)

    def masked_denoise_step(self, joint: JointTensor, k: int) -> JointTensor:
        """One DDIM iteration of the joint video and mask streams.

        At a generation step the mask streams run, their one-step mask predictions become the attention biases, and
        the cache is refreshed. At any other step the cached biases are reused.

        Raises:
            ProtocolError: If the cache is empty at a non-generation step.
        """
        if k in self.mask_step_set:
            joint = self.__generate_masks(joint, k)
        biases = self.cache.download("video", k)
        video = self.denoise_step(joint.video, joint.video_anchor, k, biases)
        return JointTensor(video, joint.masks, joint.video_anchor, joint.mask_anchors, joint.mask_step)

    def run(self, joint: JointTensor, progress: bool = False) -> JointTensor:
        """Sample from the terminal step down to step 0."""
        for k, _, _ in tqdm(self.steps, desc="sampling", disable=not progress):
            if self.model.masked:
                joint = self.masked_denoise_step(joint, k)
            else:
                video = self.denoise_step(joint.video, joint.video_anchor, k)
                joint = JointTensor(video, video_anchor=joint.video_anchor)
        return joint


def animate(
    image: torch.Tensor,
    model: AdaptedModel,
    config: GenerationConfig,
    subject_masks: Sequence[torch.Tensor] = (),
    prompt: Optional[torch.Tensor] = None,
    progress: bool = False,
) -> AnimationResult:
    """Animate one image with the attached adapters.

    Args:
        image: (3, H, W) pixels in [0, 1]; H and W divisible by the patch size.
        model: The adapted model.
        config: Sampling settings.
        subject_masks: One (1, H, W) subject mask per masked adapter, in stacking order.
        prompt: Prompt tokens; the null prompt if omitted.
        progress: Whether to show a progress bar.

    Raises:
        ProtocolError: If the mask count does not match the masked adapters.
    """
    base = model.base
    vae = base.vae
    frames = base.frames
    if image.dim() != 3:
        raise DimensionError("animate: expected a (3, H, W) image, got {0}".format(tuple(image.shape)))
    masked = model.stack.masked_indices if model.masked else []
    if len(subject_masks) != len(masked):
        raise ProtocolError(
            "animate: {0} subject masks for {1} masked adapters".format(len(subject_masks), len(masked))
        )

    schedule = config.schedule()
    step_set = config.mask_step_set() if masked else frozenset()
    generator = torch.Generator().manual_seed(config.seed)

    with torch.no_grad():
        image_latent = vae.encode(image)
        if image_latent.shape[-1] != base.latent_size or image_latent.shape[-2] != base.latent_size:
            raise DimensionError(
                "animate: image {0} does not give a {1}×{1} latent".format(tuple(image.shape), base.latent_size)
            )
        video = preprocess(image_latent, frames, config.preprocess, schedule, generator)

        input_masks = [None] * (len(model.stack) if model.stack else 0)  # type: List[Optional[MaskSequence]]
        anchors, latents = [], []
        T = schedule.terminal_step
        for mask, j in zip(subject_masks, masked):
            if tuple(mask.shape) != (1,) + tuple(image.shape[-2:]):
                raise DimensionError(
                    "animate: mask {0} does not fit image {1}".format(tuple(mask.shape), tuple(image.shape))
                )
            input_masks[j] = MaskSequence(mask[None].expand(frames, *mask.shape).clone())
            anchor = vae.encode_mask(mask)
            noise = torch.randn((frames,) + tuple(anchor.shape), generator=generator)
            anchors.append(anchor)
            latents.append(forward_diffuse(anchor.expand(frames, *anchor.shape), T, noise, schedule))

        sampler = Sampler(model, schedule, prompt, step_set, config.epsilon_mask, input_masks)
        joint = JointTensor(video, latents, image_latent, anchors, [T] * len(latents)).pinned()
        joint = sampler.run(joint, progress)

        pixels = vae.decode(joint.video)
        if config.adain and frames > 1:
            pixels[1:] = adain_final(pixels[1:], image)

        generated = []
        for latent, j in zip(joint.masks, masked):
            S = MaskSequence(vae.decode_mask(latent), warn=False)
            S.maps[0] = input_masks[j].maps[0]
            generated.append(S)

    timings = {
        "video_seconds": sampler.video_seconds,
        "mask_seconds": sampler.mask_seconds,
        "mask_computations": len(sampler.cache.computations),
        "steps": len(schedule.sampling_steps()),
    }
    LOG.info("Pipeline", "animate", "timings", timings)
    return AnimationResult(pixels, joint.video, generated, timings)
