################################
# Miva Desk I2V Adapter Suite  #
# composition.py               #
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
from typing import Iterator, List, Optional, Sequence, Tuple, TYPE_CHECKING

import torch
from einops import rearrange

from adapter import CFAWeights, cfa
from attention import AttentionParams, self_attention
from check import DimensionError, NumericError, ProtocolError
from masks import AttentionMaskBias, MaskSequence, build_attention_bias

if TYPE_CHECKING:  # Avoid circular import.
    from adapter import MivaAdapter


class CompositionWeights:
    """One weight per attached adapter. List order is stacking order; later adapters sit on top.

    Attributes:
        w: The weights.
    """

    def __init__(self, w: Sequence[float]):
        self.w = [float(x) for x in w]
        if not self.w:
            raise DimensionError("composition weights: need at least one adapter")
        if not all(math.isfinite(x) for x in self.w):
            raise NumericError("composition weights: non-finite weight in {0}".format(self.w))

    @classmethod
    def uniform(cls, n: int) -> "CompositionWeights":
        """wⱼ = 1/n, summing to one."""
        return cls([1.0 / n] * n)

    def __len__(self) -> int:
        return len(self.w)

    def __iter__(self) -> Iterator[float]:
        return iter(self.w)

    def __getitem__(self, j: int) -> float:
        return self.w[j]


class AdapterStack:
    """Adapters attached to one base model, with their composition weights. Immutable.

    A single adapter attached directly is a stack of one with weight 1.
    """

    def __init__(self, adapters: Sequence["MivaAdapter"], weights: Optional[CompositionWeights] = None):
        self.adapters = tuple(adapters)
        self.weights = weights if weights is not None else CompositionWeights.uniform(len(self.adapters))
        if len(self.weights) != len(self.adapters):
            raise DimensionError(
                "adapter stack: {0} weights for {1} adapters".format(len(self.weights), len(self.adapters))
            )

    @classmethod
    def single(cls, adapter: "MivaAdapter") -> "AdapterStack":
        return cls([adapter], CompositionWeights([1.0]))

    def __len__(self) -> int:
        return len(self.adapters)

    def __iter__(self) -> Iterator[Tuple["MivaAdapter", float]]:
        return iter(zip(self.adapters, self.weights))

    @property
    def masked_indices(self) -> List[int]:
        return [j for j, adapter in enumerate(self.adapters) if adapter.masked]


@dataclass
class BiasSet:
    """Attention biases for one video-stream forward.

    Attributes:
        sa: Bias for the base SA of every SA slot (its `same` block is used).
        cfa: One bias per stacked adapter for its CFA layers (`first` and `prev` blocks).
    """

    sa: AttentionMaskBias
    cfa: List[AttentionMaskBias]


def compose_sa(
    f_i: torch.Tensor,
    f_1: torch.Tensor,
    f_prev: torch.Tensor,
    base: AttentionParams,
    adapters: Sequence[Tuple[CFAWeights, CFAWeights, Tuple[torch.Tensor, torch.Tensor]]],
    w: Sequence[float],
    sa_mask: Optional[torch.Tensor] = None,
    cfa_masks: Optional[Sequence[Optional[Tuple[torch.Tensor, torch.Tensor]]]] = None,
) -> torch.Tensor:
    """λ₁·SA(f_i) + Σⱼ wⱼ·[λ₂⁽ʲ⁾·CFA⁽ʲ⁾(f_i, f_1) + λ₃⁽ʲ⁾·CFA⁽ʲ⁾(f_i, f_prev)], with λ₁ = 1.

    Args:
        f_i, f_1, f_prev: Tokens of the attending frames, frame 1, and the previous frames.
        base: Frozen SA projections.
        adapters: Per adapter, its (frame-1 CFA, previous-frame CFA, (λ₂, λ₃)).
        w: Composition weights.
        sa_mask: Optional bias for the base SA.
        cfa_masks: Optional per adapter (frame-1 bias, previous-frame bias).

    Raises:
        DimensionError: If the weight count differs from the adapter count.
    """
    if len(w) != len(adapters):
        raise DimensionError("compose SA: {0} weights for {1} adapters".format(len(w), len(adapters)))
    out = self_attention(f_i, base, sa_mask)
    for j, ((w1, w_prev, lam), weight) in enumerate(zip(adapters, w)):
        first_mask, prev_mask = cfa_masks[j] if cfa_masks and cfa_masks[j] is not None else (None, None)
        out = out + weight * (
            lam[0] * cfa(f_i, f_1, w1, base, first_mask) + lam[1] * cfa(f_i, f_prev, w_prev, base, prev_mask)
        )
    return out


def compose_residuals(
    base_output: torch.Tensor, adapter_residuals: Sequence[torch.Tensor], w: Sequence[float]
) -> torch.Tensor:
    """base_output + Σⱼ wⱼ·residualⱼ."""
    if len(w) != len(adapter_residuals):
        raise DimensionError("compose residuals: {0} weights for {1} residuals".format(len(w), len(adapter_residuals)))
    out = base_output
    for residual, weight in zip(adapter_residuals, w):
        if residual.shape != base_output.shape:
            raise DimensionError(
                "compose residuals: residual {0} != output {1}".format(tuple(residual.shape), tuple(base_output.shape))
            )
        out = out + weight * residual
    return out


@dataclass
class UnifiedMask:
    """Per-cell owner labels: 0 is background, j is the j-th stacked adapter (1-based).

    Attributes:
        labels: (F, H, W) integer labels in [0, n].
        n: Number of adapters.
    """

    labels: torch.Tensor
    n: int


def unified_subject_mask(S_list: Sequence[Optional[MaskSequence]], threshold: float = 0.5) -> UnifiedMask:
    """Label each cell with the adapter of highest confidence, or 0 when no confidence exceeds the threshold.

    Ties go to the largest adapter index. Adapters without a mask (plain MIVAs) never own a cell.

    Raises:
        DimensionError: If the list is empty, all entries are None, or shapes differ.
    """
    present = [S for S in S_list if S is not None]
    if not S_list or not present:
        raise DimensionError("unified mask: no mask sequences")
    shape = present[0].maps.shape
    if any(S.maps.shape != shape for S in present):
        raise DimensionError("unified mask: mask sequences differ in shape")

    stacked = torch.stack(
        [S.maps[:, 0] if S is not None else torch.zeros(shape[0], *shape[2:]) for S in S_list], dim=0
    )
    n = stacked.shape[0]
    best, flipped = torch.flip(stacked, dims=[0]).max(dim=0)
    labels = n - flipped
    labels = torch.where(best > threshold, labels, torch.zeros_like(labels))
    return UnifiedMask(labels.to(torch.long), n)


def unified_attention_bias(S_star: UnifiedMask, eps: float = 1e-6) -> AttentionMaskBias:
    """log(1[S*ᵢ_p = S*ⱼ_q] + ε) over video-token pairs."""
    if bool((S_star.labels < 0).any()) or bool((S_star.labels > S_star.n).any()):
        raise DimensionError("unified bias: labels outside [0, {0}]".format(S_star.n))
    _, rows, cols = S_star.labels.shape
    return AttentionMaskBias(rearrange(S_star.labels, "f h w -> f (h w)"), rows, cols, eps, labels=True)


def background_mask_for_plain_miva(S_star: UnifiedMask) -> MaskSequence:
    """1 where no adapter owns the cell, else 0."""
    return MaskSequence((S_star.labels == 0).to(torch.float32)[:, None])


def build_bias_set(
    stack: AdapterStack, masks: Sequence[Optional[MaskSequence]], rows: int, cols: int, eps: float = 1e-6
) -> Optional[BiasSet]:
    """Route subject masks to the attention sites of a stack.

    With no masked adapter there are no biases. A lone masked adapter uses its own mask everywhere. Otherwise the SA
    sites use the unified bias, each masked adapter's CFA layers use its own mask, and plain adapters' CFA layers use
    the background mask.

    Args:
        stack: The attached adapters.
        masks: One entry per stacked adapter; None for plain adapters.
        rows, cols: Token grid of the attention sites.
        eps: ε.
    """
    if len(masks) != len(stack):
        raise DimensionError("bias set: {0} masks for {1} adapters".format(len(masks), len(stack)))
    masked = stack.masked_indices
    if not masked:
        return None
    for j in masked:
        if masks[j] is None:
            raise ProtocolError("bias set: masked adapter {0} has no mask".format(j))

    if len(stack) == 1:
        bias = build_attention_bias(masks[0], rows, cols, eps)
        return BiasSet(bias, [bias])

    resized = [MaskSequence(masks[j].resized(rows, cols)[:, None]) if j in masked else None for j in range(len(stack))]
    S_star = unified_subject_mask(resized)
    background = background_mask_for_plain_miva(S_star)
    sources = [resized[j] if j in masked else background for j in range(len(stack))]
    cfa_biases = [build_attention_bias(S, rows, cols, eps) for S in sources]
    return BiasSet(unified_attention_bias(S_star, eps), cfa_biases)
