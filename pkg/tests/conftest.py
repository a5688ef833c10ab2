import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "src"))
os.environ.setdefault("PYGAME_HIDE_SUPPORT_PROMPT", "true")
os.environ.setdefault("SDL_VIDEODRIVER", "dummy")

import pytest
import torch

from adapter import MivaAdapter
from basemodel import build_base
from configmanager import parse_config
from logmanager import LOG
from schedule import linear_schedule
from synthdata import PATTERN_NAMES

# Small enough that a full sampling run takes well under a second.
TINY = {
    "frames": 4,
    "image_size": 16,
    "patch_size": 4,
    "channels": 8,
    "token_dim": 16,
    "blocks": 2,
    "diffusion_steps": 100,
    "ddim_steps": 10,
    "mask_steps": "all",
    "clip_frames": 8,
    "clips": 8,
    "iters": 4,
    "base_iters": 4,
    "ledger": "",
}


@pytest.fixture(autouse=True)
def quiet_log():
    """Every test starts from a default, unhalting log."""
    LOG.verbose = False
    LOG.halt = False
    LOG.count = 0
    LOG.suppress = []
    LOG.suppress_halt = []
    yield
    LOG._terminate()


@pytest.fixture
def tiny_config():
    return parse_config(overrides=TINY, env={})


@pytest.fixture
def ranks(tiny_config):
    return {"cfa": tiny_config["ranks.cfa"], "ca": tiny_config["ranks.ca"], "tsa": tiny_config["ranks.tsa"]}


@pytest.fixture
def base(tiny_config):
    return build_base(tiny_config, PATTERN_NAMES).freeze().eval()


@pytest.fixture
def schedule(tiny_config):
    return linear_schedule(tiny_config["diffusion_steps"], 1e-4, 0.02, tiny_config["ddim_steps"])


@pytest.fixture
def miva_adapter(base, ranks):
    return MivaAdapter(base, ranks, False, "translate_right", seed=1)


@pytest.fixture
def mmiva_adapter(base, ranks):
    return MivaAdapter(base, ranks, True, "fall_dots", seed=2)


@pytest.fixture
def generator():
    return torch.Generator().manual_seed(1234)


def perturb(module, seed=0, scale=0.05):
    """Move every parameter of a module off its initial value, in place."""
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for p in module.parameters():
            p.add_(scale * torch.randn(p.shape, generator=generator, dtype=p.dtype))
    return module


@pytest.fixture
def perturbed():
    return perturb
