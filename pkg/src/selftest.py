################################
# Miva Desk I2V Adapter Suite  #
# selftest.py                  #
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
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Mapping, Optional

import torch
from einops import rearrange

from adapter import ImplicitPromptCA, MivaAdapter, apply_tsa_lora, augmented_sa, implicit_ca
from adaptermanager import attach
from attention import AttentionParams, cross_attention, self_attention
from basemodel import BaseModel, build_base
from composition import compose_residuals, compose_sa
from logmanager import LOG
from masks import attention_mask_entry, dropout_prob
from preprocess import dct3, idct3, shared_noise
from synthdata import PATTERN_NAMES, MotionPattern, render_pattern
from trainer import adapter_gradient_check

TRANSPARENCY_TOLERANCE = 1e-5
CA_TOLERANCE = 1e-5
GRADIENT_TOLERANCE = 1e-4
REDUCTION_TOLERANCE = 1e-6
ZERO_WEIGHT_TOLERANCE = 1e-5
PARAMETER_BUDGET = 0.05


@dataclass
class PropertyResult:
    """Outcome of one property.

    Attributes:
        name: Property name.
        passed: Whether it held.
        detail: The measured quantity, for the report.
        seconds: Wall time.
    """

    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return "{0} {1}: {2} ({3:.1f}s)".format("PASS" if self.passed else "FAIL", self.name, self.detail, self.seconds)


def _ranks(config: Mapping[str, Any]) -> Dict[str, int]:
    return {"cfa": config["ranks.cfa"], "ca": config["ranks.ca"], "tsa": config["ranks.tsa"]}


def _perturbed(adapter: MivaAdapter, generator: torch.Generator, scale: float = 0.05) -> MivaAdapter:
    """A copy of an adapter whose every parameter is moved off its initial value."""
    moved = copy.deepcopy(adapter)
    with torch.no_grad():
        for p in moved.parameters():
            p.add_(scale * torch.randn(p.shape, generator=generator, dtype=p.dtype))
    return moved


def _random_input(base: BaseModel, generator: torch.Generator, steps: int = 1000):
    x = torch.randn(base.frames, base.vae.channels, base.latent_size, base.latent_size, generator=generator)
    t = int(torch.randint(1, steps, (1,), generator=generator))
    return x, t


def init_transparency(base: BaseModel, ranks: Dict[str, int], trials: int = 100, seed: int = 0) -> float:
    """Largest |Δ| between the bare base and the base with a fresh plain or masked adapter attached."""
    generator = torch.Generator().manual_seed(seed)
    worst = 0.0
    with torch.no_grad():
        for masked in (False, True):
            model = attach(base, MivaAdapter(base, ranks, masked, seed=seed))
            for _ in range(trials):
                x, t = _random_input(base, generator)
                worst = max(worst, float((model(x, t) - base(x, t)).abs().max()))
    return worst


def ca_equivalence(dim: int = 32, prompt_length: int = 4, tokens: int = 16, trials: int = 100, seed: int = 0) -> float:
    """Largest |Δ| between cross-attention to a prompt and its fully factorized implicit-prompt form."""
    generator = torch.Generator().manual_seed(seed)
    worst = 0.0
    with torch.no_grad():
        for _ in range(trials):
            params = AttentionParams(dim, generator=generator).double()
            c = torch.randn(prompt_length, dim, generator=generator, dtype=torch.float64)
            f = torch.randn(tokens, dim, generator=generator, dtype=torch.float64)
            layer = ImplicitPromptCA.from_prompt(params, c)
            worst = max(worst, float((implicit_ca(f, layer, params) - cross_attention(f, c, params)).abs().max()))
    return worst


def formula_suite(seed: int = 0) -> List[PropertyResult]:
    """Closed-form values of the mask bias, the dropout schedule, the DCT, and shared noise."""
    results = []
    eps = 1e-6
    expected = [((1.0, 1.0), math.log(1.0 + eps)), ((1.0, 0.0), -13.815510557964274), ((0.5, 0.5), -0.6931451805)]
    for (s_p, s_q), want in expected:
        got = attention_mask_entry(s_p, s_q, eps)
        results.append(
            PropertyResult(
                "mask bias ({0}, {1})".format(s_p, s_q), abs(got - want) <= 1e-4, "{0:.6g} vs {1:.6g}".format(got, want)
            )
        )

    t_max = 1000
    ends = [dropout_prob(0, t_max), dropout_prob(t_max, t_max), dropout_prob(t_max // 2, t_max)]
    results.append(PropertyResult("dropout endpoints", ends == [1.0, 0.0, 0.5], "p = {0}".format(ends)))

    generator = torch.Generator().manual_seed(seed)
    x = torch.randn(8, 4, 16, 16, generator=generator, dtype=torch.float64)
    error = float((idct3(dct3(x)) - x).abs().max())
    results.append(PropertyResult("dct3 round trip", error <= 1e-6, "max |Δ| {0:.3g}".format(error)))

    noise = torch.randn(8, 4, 16, 16, generator=generator)
    plain = torch.equal(shared_noise(noise, 0.0), noise)
    shared = torch.equal(shared_noise(noise, 1.0), noise[:1].expand_as(noise))
    detail = "α=0 {0}, α=1 {1}".format(plain, shared)
    results.append(PropertyResult("shared noise α∈{0, 1}", plain and shared, detail))
    return results


def gradients(base: BaseModel, ranks: Dict[str, int], seed: int = 0) -> Dict[str, float]:
    """Worst finite-difference error per parameter group over a plain and a masked adapter."""
    pattern = MotionPattern.named("translate_right")
    size = base.latent_size * base.vae.patch_size
    video, masks = render_pattern(pattern, seed, base.frames, size, size)
    worst = {}  # type: Dict[str, float]
    for masked in (False, True):
        adapter = MivaAdapter(base, ranks, masked, seed=seed)
        report = adapter_gradient_check(base, adapter, video, masks if masked else None, seed=seed)
        for group, error in report.items():
            worst[group] = max(worst.get(group, 0.0), error)
    return worst


def single_adapter_reduction(base: BaseModel, ranks: Dict[str, int], trials: int = 3, seed: int = 0) -> float:
    """Largest |Δ| between composition of one adapter at weight 1 and that adapter's own layers, in every slot.

    The SA slot compares compose_sa with augmented_sa, the CA slot compose_residuals with the base plus implicit_ca,
    and the t-SA slot compose_residuals with apply_tsa_lora. Runs in float64 on copies of the base blocks.
    """
    generator = torch.Generator().manual_seed(seed)
    adapter = _perturbed(MivaAdapter(base, ranks, seed=seed), generator).double()
    blocks = copy.deepcopy(base.blocks).double()
    c = base.null_prompt().detach().double()
    worst = 0.0
    with torch.no_grad():
        for _ in range(trials):
            for block, extra in zip(blocks, adapter.blocks):
                x = torch.randn(
                    base.frames, base.latent_size * base.latent_size, base.token_dim, generator=generator
                ).double()
                c_t = torch.randn(base.time_dim, generator=generator).double()
                f_1 = x[:1].expand_as(x)
                f_prev = torch.cat([x[:1], x[:-1]], dim=0)
                lam = extra.phi(c_t)

                single = augmented_sa(x, f_1, f_prev, block.sa, extra.cfa_first, extra.cfa_prev, lam)
                composed = compose_sa(x, f_1, f_prev, block.sa, [(extra.cfa_first, extra.cfa_prev, lam)], [1.0])
                worst = max(worst, float((single - composed).abs().max()))

                plain = cross_attention(x, c, block.ca)
                residual = implicit_ca(x, extra.ca, block.ca)
                worst = max(worst, float((plain + residual - compose_residuals(plain, [residual], [1.0])).abs().max()))

                tokens = rearrange(x, "f n d -> n f d")
                plain = self_attention(tokens, block.tsa)
                single = apply_tsa_lora(tokens, block.tsa, extra.tsa)
                composed = compose_residuals(plain, [single - plain], [1.0])
                worst = max(worst, float((single - composed).abs().max()))
    return worst


def zero_weights(base: BaseModel, ranks: Dict[str, int], trials: int = 10, seed: int = 0) -> float:
    """Largest |Δ| between the bare base and two trained-looking adapters composed at weight 0."""
    generator = torch.Generator().manual_seed(seed)
    adapters = [_perturbed(MivaAdapter(base, ranks, seed=seed + j), generator) for j in range(2)]
    model = attach(base, adapters, [0.0, 0.0])
    worst = 0.0
    with torch.no_grad():
        for _ in range(trials):
            x, t = _random_input(base, generator)
            worst = max(worst, float((model(x, t) - base(x, t)).abs().max()))
    return worst


def parameter_budget(base: BaseModel, ranks: Dict[str, int]) -> Dict[str, Dict[str, int]]:
    """Parameter breakdown of a plain and a masked adapter, with the base count."""
    total = base.count_parameters()
    report = {}
    for masked in (False, True):
        adapter = MivaAdapter(base, ranks, masked)
        breakdown = adapter.parameter_breakdown()
        breakdown["base"] = total
        report[adapter.kind] = breakdown
    return report


def budget_result(report: Dict[str, Dict[str, int]]) -> PropertyResult:
    """Every adapter kind in a parameter_budget report must stay within PARAMETER_BUDGET of the base."""
    ratios = {kind: report[kind]["total"] / report[kind]["base"] for kind in report}
    text = "; ".join(
        "{0} {1} of {2} ({3:.2%}) cfa {4} phi {5} ca {6} tsa {7} mask {8}".format(
            kind,
            report[kind]["total"],
            report[kind]["base"],
            ratios[kind],
            report[kind]["cfa"],
            report[kind]["phi"],
            report[kind]["ca"],
            report[kind]["tsa"],
            report[kind]["mask_stream"],
        )
        for kind in sorted(report)
    )
    return PropertyResult("parameter budget", all(r <= PARAMETER_BUDGET for r in ratios.values()), text)


def _timed(name: str, fn: Callable[[], PropertyResult]) -> PropertyResult:
    start = time.perf_counter()
    result = fn()
    result.seconds = time.perf_counter() - start
    LOG.info("SelfTest", name, result.detail)
    return result


def run_selftest(
    config: Mapping[str, Any], base: Optional[BaseModel] = None, trials: int = 100
) -> List[PropertyResult]:
    """Run every property on a base model built from the config (or the one given).

    Args:
        config: Resolved configuration; model shape, ranks, and seed are read from it.
        base: Base model to test against. A freshly initialized one if omitted.
        trials: Random inputs per transparency and CA check.

    Returns:
        One result per property, in a fixed order.
    """
    seed = config["seed"]
    ranks = _ranks(config)
    base = base if base is not None else build_base(config, PATTERN_NAMES).freeze().eval()
    results = []

    def transparency() -> PropertyResult:
        worst = init_transparency(base, ranks, trials, seed)
        return PropertyResult("init transparency", worst <= TRANSPARENCY_TOLERANCE, "max |Δ| {0:.3g}".format(worst))

    def ca() -> PropertyResult:
        worst = ca_equivalence(base.token_dim, base.prompt_length, trials=trials, seed=seed)
        return PropertyResult("CA factorization", worst <= CA_TOLERANCE, "max |Δ| {0:.3g}".format(worst))

    def gradient() -> PropertyResult:
        worst = gradients(base, ranks, seed)
        text = ", ".join("{0} {1:.2g}".format(group, worst[group]) for group in sorted(worst))
        return PropertyResult("gradient check", max(worst.values()) <= GRADIENT_TOLERANCE, text)

    def reduction() -> PropertyResult:
        worst = single_adapter_reduction(base, ranks, seed=seed)
        detail = "max |Δ| {0:.3g}".format(worst)
        return PropertyResult("single-adapter reduction", worst <= REDUCTION_TOLERANCE, detail)

    def zero() -> PropertyResult:
        worst = zero_weights(base, ranks, seed=seed)
        detail = "max |Δ| {0:.3g}".format(worst)
        return PropertyResult("zero-weight composition", worst <= ZERO_WEIGHT_TOLERANCE, detail)

    def budget() -> PropertyResult:
        return budget_result(parameter_budget(base, ranks))

    for name, fn in (("transparency", transparency), ("ca", ca)):
        results.append(_timed(name, fn))
    results.extend(formula_suite(seed))
    for name, fn in (("gradient", gradient), ("reduction", reduction), ("zero", zero), ("budget", budget)):
        results.append(_timed(name, fn))
    return results
