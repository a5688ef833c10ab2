import math

import pytest
import torch

from check import (
    CHECK,
    CHECK_FINITE,
    CHECK_SHAPE,
    CheckFailure,
    ConfigError,
    DimensionError,
    MivaError,
    NumericError,
    ScheduleError,
)


def test_check_accepts_matching_type():
    assert CHECK("abc", str)
    assert CHECK(3, [int, str])


def test_check_accepts_int_for_float():
    assert CHECK(3, float, _min=0)


def test_check_rejects_bool_as_int():
    with pytest.raises(CheckFailure):
        CHECK(True, int)


def test_check_measures_length_and_keys():
    assert CHECK("abcd", str, _min=2, _max=4)
    assert CHECK({"a": 1, "b": 2}, dict, _equals=2)
    with pytest.raises(CheckFailure, match="min check"):
        CHECK("", str, _min=1)
    with pytest.raises(CheckFailure, match="equality check"):
        CHECK([1, 2, 3], list, _equals=2)


def test_check_value_bounds():
    with pytest.raises(CheckFailure, match="max check"):
        CHECK(1.5, float, _max=1)


def test_check_rejects_bad_bound_type():
    with pytest.raises(CheckFailure, match="illegal type"):
        CHECK(3, int, _min="1")


def test_check_shape_wildcard():
    x = torch.zeros(4, 3, 8)
    assert CHECK_SHAPE(x, (4, -1, 8))
    with pytest.raises(DimensionError, match="x_t"):
        CHECK_SHAPE(x, (4, 3), "x_t")


def test_check_finite():
    assert CHECK_FINITE(torch.ones(3))
    with pytest.raises(NumericError):
        CHECK_FINITE(torch.tensor([1.0, math.nan]))


def test_error_family():
    assert issubclass(ScheduleError, MivaError)
    assert issubclass(ScheduleError, ValueError)
    e = ConfigError("frames", "expected an integer")
    assert e.key == "frames"
    assert str(e).startswith("frames:")
