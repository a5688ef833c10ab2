import pytest
import torch

from autoencoder import PatchAutoencoder
from check import DimensionError


def test_encode_matrix_rows_are_orthonormal():
    vae = PatchAutoencoder(4, 8, seed=0)
    product = vae.encode_matrix @ vae.encode_matrix.T
    assert torch.allclose(product, torch.eye(8), atol=1e-5)


def test_flat_colours_reconstruct_exactly():
    vae = PatchAutoencoder(4, 8)
    image = torch.zeros(3, 16, 16)
    image[0], image[1], image[2] = 0.2, 0.5, 0.9
    assert torch.allclose(vae.decode(vae.encode(image)), image, atol=1e-5)


def test_shapes_with_batch_dimensions():
    vae = PatchAutoencoder(4, 8)
    latent = vae.encode(torch.rand(5, 3, 16, 12))
    assert latent.shape == (5, 8, 4, 3)
    assert vae.decode(latent).shape == (5, 3, 16, 12)


def test_patch_aligned_mask_survives():
    vae = PatchAutoencoder(4, 8)
    mask = torch.zeros(1, 16, 16)
    mask[:, 4:12, 8:16] = 1.0
    assert torch.allclose(vae.decode_mask(vae.encode_mask(mask)), mask, atol=1e-5)


def test_dimension_errors():
    with pytest.raises(DimensionError):
        PatchAutoencoder(2, 13)
    vae = PatchAutoencoder(4, 8)
    with pytest.raises(DimensionError, match="divisible"):
        vae.encode(torch.rand(3, 15, 16))
    with pytest.raises(DimensionError, match="pixel channels"):
        vae.encode(torch.rand(4, 16, 16))
    with pytest.raises(DimensionError, match="latent channels"):
        vae.decode(torch.rand(7, 4, 4))
