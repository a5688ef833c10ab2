################################
# Miva Desk I2V Adapter Suite  #
# autoencoder.py               #
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

import numpy as np
import torch
from einops import rearrange
from torch import nn

from check import DimensionError


class PatchAutoencoder(nn.Module):
    """Fixed linear patch autoencoder standing in for a VAE.

    Each p×p pixel patch (3·p² values) maps to `channels` latent values through a matrix with orthonormal rows. The
    first three rows are the normalized per-channel constant patches, so flat colours are reconstructed exactly. The
    rest complete an orthonormal set drawn from a seeded Gaussian. Decoding multiplies by the transpose, which is the
    pseudo-inverse.

    Attributes:
        patch_size: p.
        channels: Latent channels.
        encode_matrix: Buffer of shape (channels, 3·p²).
    """

    PIXEL_CHANNELS = 3

    def __init__(self, patch_size: int = 4, channels: int = 8, seed: int = 0):
        super().__init__()
        width = self.PIXEL_CHANNELS * patch_size * patch_size
        if not self.PIXEL_CHANNELS <= channels <= width:
            raise DimensionError("autoencoder: channels must lie in [3, {0}], got {1}".format(width, channels))
        self.patch_size = patch_size
        self.channels = channels

        constant = np.zeros((self.PIXEL_CHANNELS, width))
        for c in range(self.PIXEL_CHANNELS):
            constant[c, c * patch_size * patch_size : (c + 1) * patch_size * patch_size] = 1.0 / patch_size

        rng = np.random.default_rng(seed)
        extra = rng.standard_normal((width, channels - self.PIXEL_CHANNELS))
        extra -= constant.T @ (constant @ extra)
        q, _ = np.linalg.qr(extra)
        matrix = np.concatenate([constant, q.T], axis=0)

        self.register_buffer("encode_matrix", torch.tensor(matrix, dtype=torch.float32))

    @property
    def decode_matrix(self) -> torch.Tensor:
        return self.encode_matrix.T

    def __check_pixels(self, image: torch.Tensor) -> None:
        if image.shape[-3] != self.PIXEL_CHANNELS:
            raise DimensionError("autoencoder: expected 3 pixel channels, got {0}".format(image.shape[-3]))
        if image.shape[-2] % self.patch_size or image.shape[-1] % self.patch_size:
            raise DimensionError(
                "autoencoder: {0}×{1} image is not divisible by patch size {2}".format(
                    image.shape[-2], image.shape[-1], self.patch_size
                )
            )

    def encode(self, image: torch.Tensor) -> torch.Tensor:
        """Pixels (..., 3, H, W) to latents (..., C, H/p, W/p)."""
        self.__check_pixels(image)
        p = self.patch_size
        patches = rearrange(image, "... c (h p1) (w p2) -> ... h w (c p1 p2)", p1=p, p2=p)
        latent = patches @ self.encode_matrix.to(image.dtype).T
        return rearrange(latent, "... h w k -> ... k h w")

    def decode(self, latent: torch.Tensor) -> torch.Tensor:
        """Latents (..., C, h, w) to pixels (..., 3, h·p, w·p)."""
        if latent.shape[-3] != self.channels:
            raise DimensionError(
                "autoencoder: expected {0} latent channels, got {1}".format(self.channels, latent.shape[-3])
            )
        p = self.patch_size
        patches = rearrange(latent, "... k h w -> ... h w k") @ self.encode_matrix.to(latent.dtype)
        return rearrange(patches, "... h w (c p1 p2) -> ... c (h p1) (w p2)", c=self.PIXEL_CHANNELS, p1=p, p2=p)

    def encode_mask(self, mask: torch.Tensor) -> torch.Tensor:
        """Single-channel masks (..., 1, H, W), replicated to three channels, to latents."""
        return self.encode(mask.expand(*mask.shape[:-3], self.PIXEL_CHANNELS, *mask.shape[-2:]))

    def decode_mask(self, latent: torch.Tensor) -> torch.Tensor:
        """Latents to single-channel masks (..., 1, H, W), averaging the pixel channels. Not clamped."""
        return self.decode(latent).mean(dim=-3, keepdim=True)
