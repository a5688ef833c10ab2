################################
# Miva Desk I2V Adapter Suite  #
# basemodel.py                 #
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

import hashlib
import math
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import torch
from einops import rearrange
from torch import nn
from torch.nn import functional as F

from adapter import apply_tsa_lora, implicit_ca
from attention import AttentionParams, cross_attention, self_attention
from autoencoder import PatchAutoencoder
from check import CHECK_SHAPE, ProtocolError
from composition import AdapterStack, BiasSet, compose_residuals, compose_sa


def sinusoidal_embedding(t: int, dim: int) -> torch.Tensor:
    """Sinusoidal encoding of a diffusion step, shape (dim,)."""
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float32) / half)
    args = float(t) * freqs
    return torch.cat([torch.sin(args), torch.cos(args)])


class TimeEmbedding(nn.Module):
    """Sinusoidal encoding followed by a learned MLP: the c_t every layer and every φ consumes."""

    def __init__(self, dim: int):
        super().__init__()
        self.dim = dim
        self.mlp = nn.Sequential(nn.Linear(dim, 4 * dim), nn.SiLU(), nn.Linear(4 * dim, dim))

    def forward(self, t: int) -> torch.Tensor:
        weight = self.mlp[0].weight
        return self.mlp(sinusoidal_embedding(t, self.dim).to(weight.dtype))


class ResBlock(nn.Module):
    """Per-frame 3×3 convolutional residual block conditioned on c_t."""

    def __init__(self, dim: int, hidden: int, time_dim: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(math.gcd(8, dim), dim)
        self.conv1 = nn.Conv2d(dim, hidden, 3, padding=1)
        self.time = nn.Linear(time_dim, hidden)
        self.norm2 = nn.GroupNorm(math.gcd(8, hidden), hidden)
        self.conv2 = nn.Conv2d(hidden, dim, 3, padding=1)

    def forward(self, x: torch.Tensor, c_t: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.time(F.silu(c_t))[None, :, None, None]
        return x + self.conv2(F.silu(self.norm2(h)))


class TransformerBlock(nn.Module):
    """ResBlock, then SA, CA and t-SA slots and a feed-forward layer, each a pre-norm residual.

    Adapters act on the three attention slots. The slot residuals are exposed separately so a block can be checked
    piece by piece.

    Attributes:
        index: Position of the block; adapters are looked up by it.
    """

    def __init__(self, index: int, dim: int, time_dim: int, frames: int, hidden: int, ff_mult: int):
        super().__init__()
        self.index = index
        self.res = ResBlock(dim, hidden, time_dim)
        self.norm_sa = nn.LayerNorm(dim)
        self.sa = AttentionParams(dim)
        self.norm_ca = nn.LayerNorm(dim)
        self.ca = AttentionParams(dim)
        self.norm_tsa = nn.LayerNorm(dim)
        self.tsa = AttentionParams(dim)
        self.temporal_pos = nn.Parameter(torch.randn(frames, dim) * 0.02)
        self.norm_ff = nn.LayerNorm(dim)
        self.ff = nn.Sequential(nn.Linear(dim, ff_mult * dim), nn.GELU(), nn.Linear(ff_mult * dim, dim))

    def sa_residual(
        self,
        h: torch.Tensor,
        c_t: torch.Tensor,
        stack: Optional[AdapterStack] = None,
        biases: Optional[BiasSet] = None,
        stream: str = "video",
    ) -> torch.Tensor:
        """SA slot output for tokens h of shape (F, N, d)."""
        x = self.norm_sa(h)
        sa_mask = biases.sa.same if biases is not None else None
        if not stack:
            return self_attention(x, self.sa, sa_mask)

        f_1 = x[:1].expand_as(x)
        f_prev = torch.cat([x[:1], x[:-1]], dim=0)
        entries = []
        for adapter, _ in stack:
            w1, w_prev, phi = adapter.blocks[self.index].sa_weights(stream)
            entries.append((w1, w_prev, phi(c_t)))
        cfa_masks = [(b.first, b.prev) for b in biases.cfa] if biases is not None else None
        return compose_sa(x, f_1, f_prev, self.sa, entries, stack.weights, sa_mask, cfa_masks)

    def ca_residual(self, h: torch.Tensor, c: torch.Tensor, stack: Optional[AdapterStack] = None) -> torch.Tensor:
        """CA slot output: base cross-attention to prompt c plus each adapter's implicit-prompt CA."""
        x = self.norm_ca(h)
        out = cross_attention(x, c, self.ca)
        if not stack:
            return out
        residuals = [implicit_ca(x, adapter.blocks[self.index].ca, self.ca) for adapter, _ in stack]
        return compose_residuals(out, residuals, stack.weights)

    def tsa_residual(self, h: torch.Tensor, stack: Optional[AdapterStack] = None) -> torch.Tensor:
        """t-SA slot output: attention over frames at every token position."""
        x = rearrange(self.norm_tsa(h) + self.temporal_pos[:, None, :], "f n d -> n f d")
        out = self_attention(x, self.tsa)
        if stack:
            residuals = [apply_tsa_lora(x, self.tsa, adapter.blocks[self.index].tsa) - out for adapter, _ in stack]
            out = compose_residuals(out, residuals, stack.weights)
        return rearrange(out, "n f d -> f n d")

    def forward(
        self,
        h: torch.Tensor,
        rows: int,
        c_t: torch.Tensor,
        c: torch.Tensor,
        stack: Optional[AdapterStack] = None,
        biases: Optional[BiasSet] = None,
        stream: str = "video",
    ) -> torch.Tensor:
        grid = rearrange(h, "f (h w) d -> f d h w", h=rows)
        h = rearrange(self.res(grid, c_t), "f d h w -> f (h w) d")
        h = h + self.sa_residual(h, c_t, stack, biases, stream)
        h = h + self.ca_residual(h, c, stack)
        h = h + self.tsa_residual(h, stack)
        return h + self.ff(self.norm_ff(h))


class BaseModel(nn.Module):
    """The toy latent video denoiser: the frozen base every adapter attaches to.

    Latent cells are tokens. A prompt table holds one learned prompt per motion pattern, with row 0 the null prompt
    that adapters condition on.

    Attributes:
        vae: The fixed patch autoencoder.
        patterns: Pattern names, in prompt-table order after the null prompt.
        blocks: The transformer blocks.
    """

    def __init__(
        self,
        frames: int = 8,
        channels: int = 8,
        latent_size: int = 16,
        token_dim: int = 32,
        blocks: int = 2,
        prompt_length: int = 4,
        patterns: Sequence[str] = (),
        patch_size: int = 4,
        seed: int = 0,
        ff_mult: int = 8,
        hidden_mult: int = 4,
    ):
        super().__init__()
        self.__description = {
            "frames": frames,
            "channels": channels,
            "latent_size": latent_size,
            "token_dim": token_dim,
            "blocks": blocks,
            "prompt_length": prompt_length,
            "patterns": list(patterns),
            "patch_size": patch_size,
            "seed": seed,
            "ff_mult": ff_mult,
            "hidden_mult": hidden_mult,
        }
        self.frames = frames
        self.channels = channels
        self.latent_size = latent_size
        self.token_dim = token_dim
        self.patterns = list(patterns)

        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            self.vae = PatchAutoencoder(patch_size, channels, seed)
            self.embed = nn.Linear(channels, token_dim)
            self.pos = nn.Parameter(torch.randn(latent_size * latent_size, token_dim) * 0.02)
            self.time = TimeEmbedding(token_dim)
            self.prompts = nn.Parameter(torch.randn(len(self.patterns) + 1, prompt_length, token_dim) * 0.5)
            self.blocks = nn.ModuleList(
                [
                    TransformerBlock(b, token_dim, token_dim, frames, hidden_mult * token_dim, ff_mult)
                    for b in range(blocks)
                ]
            )
            self.norm_out = nn.LayerNorm(token_dim)
            self.unembed = nn.Linear(token_dim, channels)

    @classmethod
    def from_description(cls, description: Dict[str, Any]) -> "BaseModel":
        return cls(**description)

    def describe(self) -> Dict[str, Any]:
        """The constructor arguments, enough to rebuild the same architecture."""
        return dict(self.__description)

    @property
    def time_dim(self) -> int:
        return self.token_dim

    @property
    def prompt_length(self) -> int:
        return self.prompts.shape[1]

    def null_prompt(self) -> torch.Tensor:
        return self.prompts[0]

    def prompt(self, pattern: Union[str, int, None]) -> torch.Tensor:
        """Prompt tokens (L, d) for a pattern name or table index. Unknown names get the null prompt."""
        if pattern is None:
            return self.null_prompt()
        if type(pattern) == int:
            return self.prompts[pattern]
        if pattern in self.patterns:
            return self.prompts[1 + self.patterns.index(pattern)]
        return self.null_prompt()

    def embed_tokens(self, x_t: torch.Tensor) -> torch.Tensor:
        """Latents (F, C, h, w) to tokens (F, N, d)."""
        return self.embed(rearrange(x_t, "f c h w -> f (h w) c")) + self.pos

    def unembed_tokens(self, h: torch.Tensor) -> torch.Tensor:
        """Tokens (F, N, d) to predicted noise (F, C, h, w)."""
        return rearrange(self.unembed(self.norm_out(h)), "f (h w) c -> f c h w", h=self.latent_size)

    def forward(
        self,
        x_t: torch.Tensor,
        t: int,
        c: Optional[torch.Tensor] = None,
        stack: Optional[AdapterStack] = None,
        biases: Optional[BiasSet] = None,
        stream: str = "video",
    ) -> torch.Tensor:
        """Predict the noise in x_t.

        Args:
            x_t: Latents (F, C, h, w) at diffusion step t.
            t: Diffusion step.
            c: Prompt tokens (L, d); the null prompt if omitted.
            stack: Attached adapters, if any.
            biases: Attention biases for the video stream.
            stream: "video" or "mask"; the mask stream uses the adapters' mask-stream CFA layers and takes no biases.

        Returns:
            Predicted noise, same shape as x_t.
        """
        CHECK_SHAPE(x_t, (self.frames, self.channels, self.latent_size, self.latent_size), "x_t")
        if stream == "mask" and biases is not None:
            raise ProtocolError("forward: the mask stream takes no attention biases")
        c = self.null_prompt() if c is None else c
        c_t = self.time(t)
        h = self.embed_tokens(x_t)
        for block in self.blocks:
            h = block(h, self.latent_size, c_t, c, stack, biases, stream)
        return self.unembed_tokens(h)

    def freeze(self) -> "BaseModel":
        """Stop gradients into every base parameter."""
        self.requires_grad_(False)
        return self

    def count_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def parameter_hash(self) -> str:
        """SHA-256 over the state dict, in sorted key order, as little-endian float32."""
        digest = hashlib.sha256()
        state = self.state_dict()
        for key in sorted(state):
            digest.update(key.encode("utf-8"))
            digest.update(np.ascontiguousarray(state[key].detach().cpu().numpy(), dtype="<f4").tobytes())
        return digest.hexdigest()


def denoiser_forward(
    model: BaseModel,
    x_t: torch.Tensor,
    t: int,
    c: Optional[torch.Tensor] = None,
    adapters: Optional[AdapterStack] = None,
) -> torch.Tensor:
    """Predicted noise with an optional adapter set; with none, the frozen base prediction."""
    return model(x_t, t, c, adapters)


def build_base(config: Dict[str, Any], patterns: List[str], seed: Optional[int] = None) -> BaseModel:
    """Construct a base model from config keys."""
    return BaseModel(
        frames=config["frames"],
        channels=config["channels"],
        latent_size=config["image_size"] // config["patch_size"],
        token_dim=config["token_dim"],
        blocks=config["blocks"],
        prompt_length=config["ranks.ca"],
        patterns=patterns,
        patch_size=config["patch_size"],
        seed=config["seed"] if seed is None else seed,
    )
