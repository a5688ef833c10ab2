################################
# Miva Desk I2V Adapter Suite  #
# adapter.py                   #
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
from typing import Any, Dict, List, Optional, Tuple, TYPE_CHECKING

import torch
from torch import nn
from torch.nn import functional as F

from attention import AttentionParams, attend, self_attention
from check import DimensionError

if TYPE_CHECKING:  # Avoid circular import.
    from basemodel import BaseModel


class LowRank(nn.Module):
    """A low-rank matrix down·up, with the up factor starting at zero.

    Attributes:
        down: (rows, rank)
        up: (rank, cols)
    """

    def __init__(self, rows: int, rank: int, cols: int, generator: Optional[torch.Generator] = None):
        super().__init__()
        if rank < 1 or rank > min(rows, cols):
            raise DimensionError("low rank: rank {0} not in [1, {1}]".format(rank, min(rows, cols)))
        self.down = nn.Parameter(torch.randn(rows, rank, generator=generator) / math.sqrt(rows))
        self.up = nn.Parameter(torch.zeros(rank, cols))

    def delta(self) -> torch.Tensor:
        return self.down @ self.up


class CFAWeights(nn.Module):
    """Learnable part of one cross-frame attention layer.

    The layer reuses the frozen SA projections W_Q, W_K, W_V of its slot. W_Q gets an additive low-rank update; the
    output projection is a low-rank matrix of its own that starts at zero.
    """

    def __init__(self, dim: int, key_dim: int, rank: int, generator: Optional[torch.Generator] = None):
        super().__init__()
        self.q_delta = LowRank(dim, rank, key_dim, generator)
        self.o_low = LowRank(key_dim, rank, dim, generator)

    @property
    def W_O_low(self) -> torch.Tensor:
        return self.o_low.delta()


class AdaptiveWeightModule(nn.Module):
    """φ: maps the timestep embedding to the two CFA weights (λ₂, λ₃). λ₁ is the constant 1."""

    def __init__(self, time_dim: int):
        super().__init__()
        self.W_phi = nn.Parameter(torch.zeros(time_dim, 2))

    def forward(self, c_t: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        return adaptive_weights(c_t, self)


class ImplicitPromptCA(nn.Module):
    """Cross-attention with the prompt folded into two matrices: σ(f W_Q A) B.

    Built from the frozen CA layer and a prompt c, A = (1/√d_K)(c W_K)ᵀ. B starts at zero, so the layer adds nothing
    until trained.

    Attributes:
        A: (d_K, L)
        B: (L, dim)
    """

    def __init__(self, base: AttentionParams, prompt: torch.Tensor):
        super().__init__()
        if prompt.shape[-1] != base.W_K.shape[0]:
            raise DimensionError(
                "implicit CA: prompt dim {0} != W_K rows {1}".format(prompt.shape[-1], base.W_K.shape[0])
            )
        with torch.no_grad():
            A = (prompt @ base.W_K).T / math.sqrt(base.d_K)
        self.A = nn.Parameter(A.detach().clone())
        self.B = nn.Parameter(torch.zeros(prompt.shape[0], base.W_O.shape[1], dtype=A.dtype))

    @classmethod
    def from_prompt(cls, base: AttentionParams, prompt: torch.Tensor) -> "ImplicitPromptCA":
        """Factorize an explicit prompt completely, B = c W_V W_O. The result equals cross_attention(f, c, base)."""
        layer = cls(base, prompt)
        with torch.no_grad():
            layer.B.copy_(prompt @ base.W_V @ base.W_O)
        return layer

    @property
    def prompt_length(self) -> int:
        return self.A.shape[1]


class TSALoRA(nn.Module):
    """Low-rank updates for the four projections of a temporal self-attention layer."""

    def __init__(self, base: AttentionParams, rank: int, generator: Optional[torch.Generator] = None):
        super().__init__()
        dim, key_dim = base.W_Q.shape
        self.q = LowRank(dim, rank, key_dim, generator)
        self.k = LowRank(base.W_K.shape[0], rank, key_dim, generator)
        self.v = LowRank(base.W_V.shape[0], rank, key_dim, generator)
        self.o = LowRank(key_dim, rank, base.W_O.shape[1], generator)


def adaptive_weights(c_t: torch.Tensor, module: AdaptiveWeightModule) -> Tuple[torch.Tensor, torch.Tensor]:
    """(λ₂, λ₃) = softmax(SiLU(c_t) W_φ).

    Raises:
        DimensionError: If c_t does not match W_φ.
    """
    if c_t.shape[-1] != module.W_phi.shape[0]:
        raise DimensionError("adaptive weights: c_t dim {0} != {1}".format(c_t.shape[-1], module.W_phi.shape[0]))
    lam = torch.softmax(F.silu(c_t) @ module.W_phi, dim=-1)
    return lam[..., 0], lam[..., 1]


def cfa(
    f_i: torch.Tensor,
    f_ref: torch.Tensor,
    w: CFAWeights,
    base: AttentionParams,
    mask: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Cross-frame attention: queries from f_i, keys and values from f_ref, output through W_O_low.

    Args:
        f_i: Tokens of the attending frame(s), (..., N, dim).
        f_ref: Tokens of the reference frame(s), (..., M, dim).
        w: The layer's learnable weights.
        base: The frozen SA projections of the slot.
        mask: Optional attention bias (..., N, M).
    """
    if f_i.shape[-1] != f_ref.shape[-1]:
        raise DimensionError("cfa: token dims {0} and {1} differ".format(f_i.shape[-1], f_ref.shape[-1]))
    return attend(f_i, f_ref, base.W_Q + w.q_delta.delta(), base.W_K, base.W_V, w.W_O_low, mask)


def augmented_sa(
    f_i: torch.Tensor,
    f_1: torch.Tensor,
    f_prev: torch.Tensor,
    base: AttentionParams,
    w1: CFAWeights,
    w_prev: CFAWeights,
    lam: Tuple[torch.Tensor, torch.Tensor],
    sa_mask: Optional[torch.Tensor] = None,
    first_mask: Optional[torch.Tensor] = None,
    prev_mask: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """SA(f_i) + λ₂·CFA(f_i, f_1) + λ₃·CFA(f_i, f_prev)."""
    if not f_i.shape == f_1.shape == f_prev.shape:
        raise DimensionError(
            "augmented SA: frame shapes {0}, {1}, {2} differ".format(
                tuple(f_i.shape), tuple(f_1.shape), tuple(f_prev.shape)
            )
        )
    return (
        self_attention(f_i, base, sa_mask)
        + lam[0] * cfa(f_i, f_1, w1, base, first_mask)
        + lam[1] * cfa(f_i, f_prev, w_prev, base, prev_mask)
    )


def implicit_ca(f: torch.Tensor, layer: ImplicitPromptCA, base: AttentionParams) -> torch.Tensor:
    """σ(f W_Q A) B, σ a softmax over the L prompt slots."""
    if f.shape[-1] != base.W_Q.shape[0]:
        raise DimensionError("implicit CA: token dim {0} != W_Q rows {1}".format(f.shape[-1], base.W_Q.shape[0]))
    return torch.softmax(f @ base.W_Q @ layer.A, dim=-1) @ layer.B


def apply_tsa_lora(
    x: torch.Tensor, base: AttentionParams, lora: TSALoRA, mask: Optional[torch.Tensor] = None
) -> torch.Tensor:
    """Temporal self-attention with every projection W replaced by W + down·up."""
    if lora.q.down.shape[0] != base.W_Q.shape[0] or lora.o.up.shape[1] != base.W_O.shape[1]:
        raise DimensionError("t-SA LoRA: shapes do not match the base layer")
    return attend(
        x,
        x,
        base.W_Q + lora.q.delta(),
        base.W_K + lora.k.delta(),
        base.W_V + lora.v.delta(),
        base.W_O + lora.o.delta(),
        mask,
    )


class AdapterBlock(nn.Module):
    """Adapter weights for one transformer block of the base model.

    Attributes:
        cfa_first: CFA toward frame 1.
        cfa_prev: CFA toward the previous frame.
        phi: Adaptive weighting for the SA slot.
        ca: Implicit-prompt CA.
        tsa: t-SA LoRAs.
        mask_cfa_first, mask_cfa_prev, mask_phi: Mask-stream copies (masked adapters only).
    """

    def __init__(
        self,
        sa: AttentionParams,
        ca: AttentionParams,
        tsa: AttentionParams,
        null_prompt: torch.Tensor,
        time_dim: int,
        ranks: Dict[str, int],
        masked: bool,
        generator: torch.Generator,
    ):
        super().__init__()
        dim, key_dim = sa.W_Q.shape
        self.cfa_first = CFAWeights(dim, key_dim, ranks["cfa"], generator)
        self.cfa_prev = CFAWeights(dim, key_dim, ranks["cfa"], generator)
        self.phi = AdaptiveWeightModule(time_dim)
        self.ca = ImplicitPromptCA(ca, null_prompt)
        self.tsa = TSALoRA(tsa, ranks["tsa"], generator)

        self.masked = masked
        if masked:
            # Each frame/mask CFA pair starts out identical.
            self.mask_cfa_first = copy.deepcopy(self.cfa_first)
            self.mask_cfa_prev = copy.deepcopy(self.cfa_prev)
            self.mask_phi = copy.deepcopy(self.phi)

    def sa_weights(self, stream: str) -> Tuple[CFAWeights, CFAWeights, AdaptiveWeightModule]:
        if stream == "mask":
            if not self.masked:
                raise DimensionError("adapter block: no mask stream on an unmasked adapter")
            return self.mask_cfa_first, self.mask_cfa_prev, self.mask_phi
        return self.cfa_first, self.cfa_prev, self.phi


class MivaAdapter(nn.Module):
    """One modular image-to-video adapter: everything a motion pattern adds to the frozen base.

    Attributes:
        blocks: One AdapterBlock per base transformer block.
        pattern: Name of the motion pattern the adapter encodes.
        ranks: {"cfa", "ca", "tsa"}.
        masked: Whether this is a masked adapter with a mask stream.
        base_hash: Hash of the base model the adapter was built on.
        model: Shape description of that base model.
        config: The configuration the adapter was created or trained with.
        loss_curve: Training losses, one per iteration.
        branch_log: For masked training, which masks built the biases at each iteration.
    """

    def __init__(
        self,
        base: "BaseModel",
        ranks: Dict[str, int],
        masked: bool = False,
        pattern: str = "",
        seed: int = 0,
        config: Optional[Dict[str, Any]] = None,
    ):
        super().__init__()
        if ranks["ca"] != base.prompt_length:
            raise DimensionError(
                "adapter: CA rank {0} must equal the base prompt length {1}".format(ranks["ca"], base.prompt_length)
            )
        generator = torch.Generator().manual_seed(seed)
        null_prompt = base.null_prompt()
        self.blocks = nn.ModuleList(
            [
                AdapterBlock(block.sa, block.ca, block.tsa, null_prompt, base.time_dim, ranks, masked, generator)
                for block in base.blocks
            ]
        )
        self.pattern = pattern
        self.ranks = dict(ranks)
        self.masked = masked
        self.base_hash = base.parameter_hash()
        self.model = base.describe()
        self.config = dict(config or {})
        self.loss_curve = []  # type: List[float]
        self.branch_log = []  # type: List[str]

    @property
    def kind(self) -> str:
        return "mmiva" if self.masked else "miva"

    def parameter_breakdown(self) -> Dict[str, int]:
        """Parameter counts per group."""
        groups = {"cfa": 0, "phi": 0, "ca": 0, "tsa": 0, "mask_stream": 0}
        for name, param in self.named_parameters():
            groups[parameter_group(name).split(".")[0]] += param.numel()
        groups["total"] = sum(groups.values())
        return groups


def parameter_group(name: str) -> str:
    """Group of an adapter parameter name: cfa, phi, ca.A, ca.B, tsa, or mask_stream."""
    field = name.split(".")[2]
    if field.startswith("mask_"):
        return "mask_stream"
    if field.startswith("cfa_"):
        return "cfa"
    if field == "ca":
        return "ca." + name.split(".")[3]
    return field
