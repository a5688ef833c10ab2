################################
# Miva Desk I2V Adapter Suite  #
# masks.py                     #
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
from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Union

import torch
from einops import rearrange
from torch.nn import functional as F

from autoencoder import PatchAutoencoder
from check import DimensionError, NumericError, ScheduleError
from logmanager import LOG
from schedule import NoiseSchedule, predict_clean

Number = Union[float, torch.Tensor]


class MaskSequence:
    """Per-frame subject confidence maps.

    Attributes:
        maps: (F, 1, H, W) with entries in [0, 1].
    """

    def __init__(self, maps: torch.Tensor, warn: bool = True):
        """MaskSequence class initializer.

        Args:
            maps: (F, 1, H, W) confidences. Entries outside [0, 1] are clamped.
            warn: Whether clamping is reported as a warning rather than an info message.
        """
        if maps.dim() != 4 or maps.shape[1] != 1:
            raise DimensionError("mask sequence: expected (F, 1, H, W), got {0}".format(tuple(maps.shape)))
        if not bool(torch.isfinite(maps).all()):
            raise NumericError("mask sequence: non-finite confidences")
        if bool((maps < 0).any()) or bool((maps > 1).any()):
            report = LOG.msg if warn else LOG.info
            report("WARNING", "Masks", "MaskSequence", "confidences outside [0, 1] clamped")
            maps = maps.clamp(0.0, 1.0)
        self.maps = maps

    @property
    def frames(self) -> int:
        return self.maps.shape[0]

    def resized(self, rows: int, cols: int) -> torch.Tensor:
        """Confidences bilinearly resized to rows×cols, shape (F, rows, cols)."""
        if rows < 1 or cols < 1:
            raise DimensionError("mask sequence: zero-area target {0}×{1}".format(rows, cols))
        if tuple(self.maps.shape[-2:]) == (rows, cols):
            return self.maps[:, 0].clone()
        return F.interpolate(self.maps, size=(rows, cols), mode="bilinear", align_corners=False)[:, 0]


def attention_mask_entry(s_p: Number, s_q: Number, eps: float = 1e-6) -> Number:
    """log(s_p·s_q + (1−s_p)(1−s_q) + ε), elementwise.

    Confidences outside [0, 1] are clamped with a warning.
    """
    if eps <= 0:
        raise NumericError("attention mask entry: epsilon must be positive, got {0}".format(eps))
    if not torch.is_tensor(s_p) and not torch.is_tensor(s_q):
        if not (0 <= s_p <= 1 and 0 <= s_q <= 1):
            LOG.msg("WARNING", "Masks", "attention_mask_entry", "confidence outside [0, 1] clamped", (s_p, s_q))
            s_p, s_q = min(max(s_p, 0.0), 1.0), min(max(s_q, 0.0), 1.0)
        return math.log(s_p * s_q + (1 - s_p) * (1 - s_q) + eps)

    s_p, s_q = torch.as_tensor(s_p), torch.as_tensor(s_q)
    if bool((s_p < 0).any() or (s_p > 1).any() or (s_q < 0).any() or (s_q > 1).any()):
        LOG.msg("WARNING", "Masks", "attention_mask_entry", "confidences outside [0, 1] clamped")
        s_p, s_q = s_p.clamp(0.0, 1.0), s_q.clamp(0.0, 1.0)
    return torch.log(s_p * s_q + (1 - s_p) * (1 - s_q) + eps)


def label_mask_entry(l_p: torch.Tensor, l_q: torch.Tensor, eps: float = 1e-6) -> torch.Tensor:
    """log(1[l_p = l_q] + ε), elementwise."""
    return torch.log((l_p == l_q).to(torch.float32) + eps)


class AttentionMaskBias:
    """Attention biases for the video stream, in the blocks the attention sites use.

    The full bias over (frame, position) token pairs is never stored; SA needs pairs within a frame, the CFA layers
    need pairs between a frame and frame 1 or its predecessor.

    Attributes:
        same: (F, N, N), frame i to frame i.
        first: (F, N, N), frame i to frame 1.
        prev: (F, N, N), frame i to frame i−1 (frame 1 to itself).
        rows, cols: Token grid of the site.
        eps: ε.
    """

    def __init__(self, source: torch.Tensor, rows: int, cols: int, eps: float, labels: bool = False):
        """AttentionMaskBias class initializer.

        Args:
            source: (F, N) per-token confidences, or integer labels when `labels` is set.
            rows, cols: Token grid, N = rows·cols.
            eps: ε.
            labels: Whether source holds unified labels instead of confidences.
        """
        if source.dim() != 2 or source.shape[1] != rows * cols:
            raise DimensionError(
                "attention bias: source {0} does not fit {1}×{2}".format(tuple(source.shape), rows, cols)
            )
        self.source = source
        self.rows, self.cols = rows, cols
        self.eps = eps
        self.labels = labels

        prev_ref = torch.cat([source[:1], source[:-1]], dim=0)
        self.same = self.pair(source[:, :, None], source[:, None, :])
        self.first = self.pair(source[:, :, None], source[:1, None, :].expand_as(source[:, None, :]))
        self.prev = self.pair(source[:, :, None], prev_ref[:, None, :])

    def pair(self, a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
        if self.labels:
            return label_mask_entry(a, b, self.eps)
        return attention_mask_entry(a, b, self.eps)

    def dense(self) -> torch.Tensor:
        """The full (F·N) × (F·N) bias over every pair of video tokens."""
        flat = self.source.reshape(-1)
        return self.pair(flat[:, None], flat[None, :])

    @property
    def frames(self) -> int:
        return self.source.shape[0]


def build_attention_bias(S: MaskSequence, target_rows: int, target_cols: int, eps: float = 1e-6) -> AttentionMaskBias:
    """Resize S to an attention site's token grid, then apply the mask entry to every token pair in scope."""
    resized = S.resized(target_rows, target_cols)
    return AttentionMaskBias(rearrange(resized, "f h w -> f (h w)"), target_rows, target_cols, eps)


def one_step_predict_mask(
    s_t: torch.Tensor, t: int, eps_hat: torch.Tensor, schedule: NoiseSchedule, vae: PatchAutoencoder
) -> MaskSequence:
    """Decode the one-step clean estimate of a mask latent, clamped to [0, 1].

    Args:
        s_t: Mask latents (F, C, h, w) at step t.
        t: Diffusion step.
        eps_hat: Predicted noise for s_t.
        schedule: Noise schedule.
        vae: Autoencoder to decode with.
    """
    clean = predict_clean(s_t, t, eps_hat, schedule)
    return MaskSequence(vae.decode_mask(clean), warn=False)


def dropout_prob(t_train: int, t_max: int) -> float:
    """Probability of using ground-truth masks at a training iteration: ½(1 + cos(π·t_train/t_max))."""
    if t_max <= 0:
        raise NumericError("dropout schedule: t_max must be positive, got {0}".format(t_max))
    if not 0 <= t_train <= t_max:
        raise NumericError("dropout schedule: iteration {0} outside [0, {1}]".format(t_train, t_max))
    return 0.5 * (1.0 + math.cos(math.pi * t_train / t_max))


class DropoutSchedule:
    """Cosine decay of the ground-truth mask probability over t_max iterations."""

    def __init__(self, t_max: int):
        if t_max <= 0:
            raise NumericError("dropout schedule: t_max must be positive, got {0}".format(t_max))
        self.t_max = t_max

    def __call__(self, t_train: int) -> float:
        return dropout_prob(t_train, self.t_max)


@dataclass
class JointTensor:
    """Video latents and the mask latents of each masked adapter, denoised together.

    Frame 1 of every stream is the encoded input (image or subject mask) and never changes.

    Attributes:
        video: (F, C, h, w)
        masks: One (F, C, h, w) mask latent per masked adapter, in stacking order.
        video_anchor: (C, h, w) encoded input image.
        mask_anchors: (C, h, w) encoded subject masks.
        mask_step: Diffusion step each mask latent currently sits at.
    """

    video: torch.Tensor
    masks: List[torch.Tensor] = field(default_factory=list)
    video_anchor: Optional[torch.Tensor] = None
    mask_anchors: List[torch.Tensor] = field(default_factory=list)
    mask_step: List[int] = field(default_factory=list)

    def pinned(self) -> "JointTensor":
        """Copy with frame 1 of every stream reset to its anchor."""
        video = self.video.clone()
        if self.video_anchor is not None:
            video[0] = self.video_anchor
        masks = []
        for latent, anchor in zip(self.masks, self.mask_anchors):
            latent = latent.clone()
            latent[0] = anchor
            masks.append(latent)
        return JointTensor(video, masks, self.video_anchor, list(self.mask_anchors), list(self.mask_step))


def parse_mask_steps(text: str, ddim_steps: int) -> FrozenSet[int]:
    """Parse a mask-generation step set over DDIM indices.

    Accepts "start:stop:step", a comma list "0,5,10", or "all". A slice is clipped to the DDIM steps like a Python
    slice; a comma list is not.

    Raises:
        ScheduleError: If the text is malformed or names an index outside [0, ddim_steps).
    """
    text = text.strip()
    try:
        if text == "all":
            steps = set(range(ddim_steps))
        elif ":" in text:
            parts = [int(p) if p else None for p in text.split(":")]
            steps = set(range(ddim_steps)[slice(*parts)]) if len(parts) <= 3 else None
        else:
            steps = {int(p) for p in text.split(",")}
    except ValueError:
        raise ScheduleError("mask steps: cannot parse {0!r}".format(text)) from None
    if steps is None or not steps:
        raise ScheduleError("mask steps: {0!r} is empty or malformed".format(text))
    if min(steps) < 0 or max(steps) >= ddim_steps:
        raise ScheduleError("mask steps: {0!r} outside [0, {1})".format(text, ddim_steps))
    return frozenset(steps)
