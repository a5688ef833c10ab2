################################
# Miva Desk I2V Adapter Suite  #
# check.py                     #
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

from typing import Any, Sequence, Tuple, Union, List

import torch


class MivaError(Exception):
    """Root of every error raised by Miva Desk."""


class CheckFailure(MivaError):
    """This exception is raised when a CHECK() fails."""


class DimensionError(MivaError, ValueError):
    """Array shapes do not fit together."""


class NumericError(MivaError, ValueError):
    """Non-finite values, out-of-range values, or degenerate norms."""


class ScheduleError(MivaError, ValueError):
    """A diffusion step or step set is invalid for the schedule."""


class CompatibilityError(MivaError):
    """An adapter does not fit the base model it is attached to."""


class ProtocolError(MivaError):
    """An operation was called out of order or without its required inputs."""


class ConfigError(MivaError, ValueError):
    """A configuration key is unknown, mistyped, or out of range.

    Attributes:
        key: The offending key.
    """

    def __init__(self, key: str, message: str):
        super().__init__("{0}: {1}".format(key, message))
        self.key = key


class TrainingError(MivaError):
    """Training cannot continue."""


class TrackError(MivaError):
    """A centroid track is undefined."""


class FormatError(MivaError):
    """A file is not in the container format its reader expects."""


class HaltError(MivaError):
    """Raised by the log when halting on errors and warnings is enabled."""


_NUMERIC = [int, float]
_SIZED = [str, list, tuple]


def _measure(item: Any) -> Tuple[str, float]:
    """Return what a min/max/equals check compares for this item, and a word describing it."""
    if type(item) in _NUMERIC:
        return "value", item
    if type(item) in _SIZED:
        return "length", len(item)
    if type(item) is dict:
        return "keys", len(item.keys())
    raise CheckFailure("could not check input: cannot perform numeric checks on type {0}".format(type(item)))


def CHECK(
    item: Any, _type: Union[type, List[type]], _min: float = None, _max: float = None, _equals: float = None
) -> bool:
    """Check if an input matches type, min, max, and/or equality requirements.

    For integers and floats, the min, max, and equals checks compare the value. For strings, lists, and tuples, they
    compare length. For dicts they compare numbers of keys. An int is accepted where a float is expected.

    The correct way to use CHECK()s is to wrap them in a try/except clause and then catch CheckFailure. When caught,
    the text contents of the exception can be logged to give more information.

    Args:
        item: Input to be checked.
        _type: The type the input is expected to be. Can be a single type or a list of types.
        _min: If set, the minimum value, length, or size of the input, depending on type.
        _max: If set, the maximum value, length, or size of the input, depending on type.
        _equals: If set, the exact value, length, or size of the input, depending on type.

    Returns:
        True if succeeded, raises CheckFailure if failed, containing failure message.
    """
    allowed = _type if type(_type) is list else [_type]
    if float in allowed and int not in allowed:
        allowed = allowed + [int]
    # bool is a subclass of int but never a number here.
    if type(item) not in allowed:
        raise CheckFailure("input failed type check: {0}: expected {1} instead".format(type(item), _type))

    for bound, name in ((_min, "_min"), (_max, "_max"), (_equals, "_equals")):
        if bound is not None and type(bound) not in _NUMERIC:
            raise CheckFailure("could not check input: illegal type {0} for {1} argument".format(type(bound), name))

    if _min is None and _max is None and _equals is None:
        return True

    what, measure = _measure(item)

    if _min is not None and measure < _min:
        raise CheckFailure(
            "input of type {0} failed min check: expected {1} >= {2}, got {3}".format(type(item), what, _min, measure)
        )
    if _max is not None and measure > _max:
        raise CheckFailure(
            "input of type {0} failed max check: expected {1} <= {2}, got {3}".format(type(item), what, _max, measure)
        )
    if _equals is not None and measure != _equals:
        raise CheckFailure(
            "input of type {0} failed equality check: expected {1} == {2}, got {3}".format(
                type(item), what, _equals, measure
            )
        )

    return True


def CHECK_SHAPE(tensor: Any, shape: Sequence[int], name: str = "tensor") -> bool:
    """Check a tensor's shape, with -1 as a wildcard dimension.

    Args:
        tensor: Tensor or numpy array to check.
        shape: Expected shape; -1 matches any size.
        name: What to call the tensor in the error message.

    Returns:
        True if succeeded, raises DimensionError if failed.
    """
    actual = tuple(tensor.shape)
    if len(actual) != len(shape) or any(want != -1 and want != got for want, got in zip(shape, actual)):
        raise DimensionError("{0}: expected shape {1}, got {2}".format(name, tuple(shape), actual))
    return True


def CHECK_FINITE(tensor: torch.Tensor, name: str = "tensor") -> bool:
    """Check that every entry of a tensor is finite.

    Returns:
        True if succeeded, raises NumericError if failed.
    """
    if not bool(torch.isfinite(tensor).all()):
        raise NumericError("{0}: non-finite entries".format(name))
    return True
