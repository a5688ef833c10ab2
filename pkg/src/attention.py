################################
# Miva Desk I2V Adapter Suite  #
# attention.py                 #
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
from typing import Optional

import torch
from torch import nn

from check import CHECK_FINITE, DimensionError, NumericError


def attention(
    Q: torch.Tensor, K: torch.Tensor, V: torch.Tensor, mask: Optional[torch.Tensor] = None
) -> torch.Tensor:
    """Scaled dot-product attention, softmax(QKᵀ/√d_K + mask) V.

    Leading dimensions are batch dimensions and broadcast.

    Args:
        Q: Queries, shape (..., N, d).
        K: Keys, shape (..., M, d).
        V: Values, shape (..., M, d_v).
        mask: Optional additive bias on the logits, broadcastable to (..., N, M). Large negative entries suppress a
            query/key pair.

    Returns:
        Attention output, shape (..., N, d_v). Every row is a convex combination of the rows of V.

    Raises:
        DimensionError: If the shapes do not fit.
        NumericError: If any input is not finite, or the mask holds NaN.
    """
    if Q.shape[-1] != K.shape[-1]:
        raise DimensionError("attention: query dim {0} != key dim {1}".format(Q.shape[-1], K.shape[-1]))
    if K.shape[-2] != V.shape[-2]:
        raise DimensionError("attention: {0} keys but {1} values".format(K.shape[-2], V.shape[-2]))
    if mask is not None and tuple(mask.shape[-2:]) != (Q.shape[-2], K.shape[-2]):
        raise DimensionError(
            "attention: mask shape {0} does not end in ({1}, {2})".format(tuple(mask.shape), Q.shape[-2], K.shape[-2])
        )
    CHECK_FINITE(Q, "attention: Q")
    CHECK_FINITE(K, "attention: K")
    CHECK_FINITE(V, "attention: V")

    logits = torch.matmul(Q, K.transpose(-1, -2)) / math.sqrt(Q.shape[-1])
    if mask is not None:
        if bool(torch.isnan(mask).any()):
            raise NumericError("attention: mask holds NaN")
        logits = logits + mask
    return torch.matmul(torch.softmax(logits, dim=-1), V)


class AttentionParams(nn.Module):
    """The projection matrices of one attention layer.

    Tokens are row vectors: a layer computes Att(f W_Q, c W_K, c W_V) W_O, with c = f for self-attention.

    Attributes:
        W_Q: (dim, key_dim)
        W_K: (context_dim, key_dim)
        W_V: (context_dim, key_dim)
        W_O: (key_dim, dim)
    """

    def __init__(
        self,
        dim: int,
        key_dim: Optional[int] = None,
        context_dim: Optional[int] = None,
        generator: Optional[torch.Generator] = None,
    ):
        super().__init__()
        key_dim = key_dim or dim
        context_dim = context_dim or dim

        def init(rows: int, cols: int) -> nn.Parameter:
            return nn.Parameter(torch.randn(rows, cols, generator=generator) / math.sqrt(rows))

        self.W_Q = init(dim, key_dim)
        self.W_K = init(context_dim, key_dim)
        self.W_V = init(context_dim, key_dim)
        self.W_O = init(key_dim, dim)

    @property
    def d_K(self) -> int:
        return self.W_K.shape[1]

    @property
    def dim(self) -> int:
        return self.W_Q.shape[0]


def attend(
    f: torch.Tensor,
    context: torch.Tensor,
    W_Q: torch.Tensor,
    W_K: torch.Tensor,
    W_V: torch.Tensor,
    W_O: torch.Tensor,
    mask: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Att(f W_Q, context W_K, context W_V) W_O with explicit matrices.

    The adapters call this with modified projections.
    """
    if f.shape[-1] != W_Q.shape[0]:
        raise DimensionError("attend: token dim {0} != W_Q rows {1}".format(f.shape[-1], W_Q.shape[0]))
    if context.shape[-1] != W_K.shape[0]:
        raise DimensionError("attend: context dim {0} != W_K rows {1}".format(context.shape[-1], W_K.shape[0]))
    return torch.matmul(attention(f @ W_Q, context @ W_K, context @ W_V, mask), W_O)


def self_attention(f: torch.Tensor, params: AttentionParams, mask: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Self-attention over the token axis of f, shape (..., N, dim)."""
    return attend(f, f, params.W_Q, params.W_K, params.W_V, params.W_O, mask)


def cross_attention(f: torch.Tensor, c: torch.Tensor, params: AttentionParams) -> torch.Tensor:
    """Cross-attention from tokens f, shape (..., N, dim), to prompt tokens c, shape (L, context_dim)."""
    return attend(f, c, params.W_Q, params.W_K, params.W_V, params.W_O)
