import pytest

from basemodel import build_base
from configmanager import parse_config
import selftest
from selftest import (
    PARAMETER_BUDGET,
    PropertyResult,
    budget_result,
    ca_equivalence,
    formula_suite,
    init_transparency,
    parameter_budget,
    run_selftest,
    single_adapter_reduction,
    zero_weights,
)
from synthdata import PATTERN_NAMES


def test_property_line():
    assert PropertyResult("zero", True, "max |Δ| 0", 1.5).line() == "PASS zero: max |Δ| 0 (1.5s)"
    assert PropertyResult("zero", False, "bad").line().startswith("FAIL zero: bad")


def test_transparency_and_zero_weights(base, ranks):
    assert init_transparency(base, ranks, trials=3) <= 1e-5
    assert zero_weights(base, ranks, trials=3) <= 1e-5


def test_ca_equivalence():
    assert ca_equivalence(dim=16, prompt_length=4, tokens=8, trials=5) <= 1e-10


def test_formula_suite():
    results = formula_suite()
    assert len(results) == 6
    assert all(result.passed for result in results), [r.line() for r in results]


def test_parameter_budget_at_default_size():
    config = parse_config(overrides={"ledger": ""}, env={})
    base = build_base(config, PATTERN_NAMES)
    ranks = {"cfa": config["ranks.cfa"], "ca": config["ranks.ca"], "tsa": config["ranks.tsa"]}
    report = parameter_budget(base, ranks)
    assert set(report) == {"miva", "mmiva"}
    assert report["miva"]["total"] / report["miva"]["base"] <= PARAMETER_BUDGET
    assert report["mmiva"]["total"] / report["mmiva"]["base"] <= PARAMETER_BUDGET
    assert budget_result(report).passed
    assert report["mmiva"]["mask_stream"] > 0
    assert report["miva"]["mask_stream"] == 0


def test_run_selftest_on_a_tiny_model(tiny_config, base):
    results = run_selftest(tiny_config, base, trials=3)
    names = [result.name for result in results]
    assert names[:2] == ["init transparency", "CA factorization"]
    assert names[-4:] == ["gradient check", "single-adapter reduction", "zero-weight composition", "parameter budget"]
    # A 16-wide model is too narrow for the adapter budget; every other property holds.
    failed = [result.line() for result in results if not result.passed and result.name != "parameter budget"]
    assert failed == []
    assert all(result.seconds >= 0.0 for result in results)


def test_single_adapter_reduction_matches_layers(base, ranks):
    assert single_adapter_reduction(base, ranks, trials=2) <= 1e-10


def test_single_adapter_reduction_sees_a_wrong_weight(base, ranks, monkeypatch):
    compose_sa = selftest.compose_sa

    def doubled(f_i, f_1, f_prev, params, adapters, w):
        return compose_sa(f_i, f_1, f_prev, params, adapters, [2.0 * x for x in w])

    monkeypatch.setattr(selftest, "compose_sa", doubled)
    assert single_adapter_reduction(base, ranks, trials=1) > 1e-6


def _report(miva, mmiva, base=1000):
    groups = {"cfa": 0, "phi": 0, "ca": 0, "tsa": 0, "mask_stream": 0, "base": base}
    return {"miva": dict(groups, total=miva), "mmiva": dict(groups, total=mmiva, mask_stream=mmiva - miva)}


def test_budget_covers_masked_adapters():
    assert budget_result(_report(30, 45)).passed
    result = budget_result(_report(30, 60))
    assert not result.passed
    assert "mmiva 60 of 1000 (6.00%)" in result.detail
