################################
# Miva Desk I2V Adapter Suite  #
# adaptermanager.py            #
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

from typing import Any, Dict, List, Optional, Sequence, Tuple, Union, TYPE_CHECKING

import torch

from adapter import MivaAdapter
from basemodel import BaseModel
from check import CHECK, CheckFailure, CompatibilityError, FormatError, MivaError, ProtocolError
from composition import AdapterStack, BiasSet, CompositionWeights
from filetype import CheckpointFile, arrays_of, check_arrays

if TYPE_CHECKING:  # Avoid circular import.
    from miva import Miva


class AdaptedModel:
    """A frozen base with an adapter stack attached. Holds references only; no base weights are copied.

    Attributes:
        base: The base model.
        stack: The attached adapters and their composition weights; None for the bare base.
    """

    def __init__(self, base: BaseModel, stack: Optional[AdapterStack] = None):
        self.base = base
        self.stack = stack
        self.__attached = True

    @property
    def attached(self) -> bool:
        return self.__attached

    @property
    def masked(self) -> bool:
        return self.stack is not None and bool(self.stack.masked_indices)

    def __call__(
        self,
        x_t: torch.Tensor,
        t: int,
        c: Optional[torch.Tensor] = None,
        biases: Optional[BiasSet] = None,
        stream: str = "video",
    ) -> torch.Tensor:
        if not self.__attached:
            raise ProtocolError("adapted model: used after detach")
        return self.base(x_t, t, c, self.stack, biases, stream)

    def _detach(self) -> BaseModel:
        self.__attached = False
        return self.base


def compatibility_report(base: BaseModel, adapter: MivaAdapter) -> List[str]:
    """Every way an adapter fails to fit a base model, as readable lines; empty when it fits."""
    problems = []
    base_hash = base.parameter_hash()
    if adapter.base_hash != base_hash:
        problems.append("base hash {0} != {1}".format(adapter.base_hash[:12], base_hash[:12]))
    description = base.describe()
    for key in sorted(set(description) | set(adapter.model)):
        if description.get(key) != adapter.model.get(key):
            problems.append("model {0}: {1} != {2}".format(key, adapter.model.get(key), description.get(key)))
    if adapter.ranks.get("ca") == base.prompt_length:
        reference = MivaAdapter(base, adapter.ranks, adapter.masked)
        problems += check_arrays(arrays_of(reference), arrays_of(adapter))
    else:
        problems.append("ranks ca: {0} != prompt length {1}".format(adapter.ranks.get("ca"), base.prompt_length))
    return problems


def attach(
    base: BaseModel,
    adapters: Union[MivaAdapter, Sequence[MivaAdapter]],
    weights: Optional[Sequence[float]] = None,
) -> AdaptedModel:
    """Attach one adapter, or a weighted stack of them, to a frozen base.

    Args:
        base: The base model. Its parameters are never written.
        adapters: An adapter, or adapters in stacking order.
        weights: Composition weights; uniform if omitted, 1 for a lone adapter.

    Raises:
        CompatibilityError: Listing every mismatch of every incompatible adapter.
    """
    if isinstance(adapters, MivaAdapter):
        adapters = [adapters]
    if not adapters:
        return AdaptedModel(base)
    problems = []
    for j, adapter in enumerate(adapters):
        problems += ["adapter {0}: {1}".format(j, p) for p in compatibility_report(base, adapter)]
    if problems:
        raise CompatibilityError("attach: " + "; ".join(problems))
    stack = AdapterStack(adapters, CompositionWeights(weights) if weights is not None else None)
    return AdaptedModel(base, stack)


def detach(handle: AdaptedModel) -> BaseModel:
    """Release a handle. The base behaves exactly as before attach."""
    if not handle.attached:
        raise ProtocolError("detach: handle already detached")
    return handle._detach()


def base_checkpoint(base: BaseModel, config: Dict[str, Any], loss_curve: Sequence[float] = ()) -> CheckpointFile:
    metadata = {
        "kind": "base",
        "model": base.describe(),
        "config": dict(config),
        "base_hash": base.parameter_hash(),
        "loss_curve": [float(x) for x in loss_curve],
        "parameters": {"total": base.count_parameters()},
    }
    return CheckpointFile(metadata, arrays_of(base))


def adapter_checkpoint(adapter: MivaAdapter, base_parameters: int) -> CheckpointFile:
    breakdown = adapter.parameter_breakdown()
    breakdown["base"] = base_parameters
    metadata = {
        "kind": adapter.kind,
        "pattern": adapter.pattern,
        "base_hash": adapter.base_hash,
        "ranks": dict(adapter.ranks),
        "model": dict(adapter.model),
        "config": dict(adapter.config),
        "loss_curve": [float(x) for x in adapter.loss_curve],
        "parameters": breakdown,
    }
    return CheckpointFile(metadata, arrays_of(adapter))


def base_from_checkpoint(checkpoint: CheckpointFile) -> BaseModel:
    """Rebuild and freeze a base model from a checkpoint.

    Raises:
        FormatError: If the checkpoint is not a base or its arrays do not fit its own description.
    """
    if checkpoint.metadata["kind"] != "base":
        raise FormatError("base checkpoint: kind is {0}".format(checkpoint.metadata["kind"]))
    base = BaseModel.from_description(checkpoint.metadata["model"])
    problems = check_arrays(arrays_of(base), checkpoint.arrays)
    if problems:
        raise FormatError("base checkpoint: " + "; ".join(problems))
    base.load_state_dict(checkpoint.arrays)
    stored = checkpoint.metadata.get("base_hash")
    if stored and stored != base.parameter_hash():
        raise FormatError("base checkpoint: stored hash does not match the arrays")
    return base.freeze().eval()


def adapter_from_checkpoint(checkpoint: CheckpointFile, base: BaseModel) -> MivaAdapter:
    """Rebuild an adapter against the base it was trained on. The result is read-only.

    Raises:
        CompatibilityError: Listing every mismatch with the base.
    """
    metadata = checkpoint.metadata
    if metadata["kind"] not in ("miva", "mmiva"):
        raise FormatError("adapter checkpoint: kind is {0}".format(metadata["kind"]))
    problems = []
    if metadata.get("base_hash") != base.parameter_hash():
        problems.append("base hash {0} != {1}".format(str(metadata.get("base_hash"))[:12], base.parameter_hash()[:12]))
    if metadata["model"] != base.describe():
        problems.append("model description differs from the base")
    ranks = metadata.get("ranks", {})
    adapter = None
    if ranks.get("ca") == base.prompt_length and all(key in ranks for key in ("cfa", "tsa")):
        adapter = MivaAdapter(base, ranks, metadata["kind"] == "mmiva", metadata.get("pattern", ""))
        problems += check_arrays(arrays_of(adapter), checkpoint.arrays)
    else:
        problems.append("ranks {0} do not fit prompt length {1}".format(ranks, base.prompt_length))
    if problems:
        raise CompatibilityError("adapter checkpoint: " + "; ".join(problems))

    adapter.load_state_dict(checkpoint.arrays)
    adapter.config = dict(metadata["config"])
    adapter.loss_curve = list(metadata.get("loss_curve", []))
    return adapter.requires_grad_(False)


def parse_adapter_spec(spec: str) -> Tuple[str, Optional[float]]:
    """Split "path:weight" into its parts. A spec without a numeric suffix has no weight."""
    path, sep, weight = spec.rpartition(":")
    if sep:
        try:
            return path, float(weight)
        except ValueError:
            pass
    return spec, None


class AdapterManager:
    """The Adapter Manager

    Loads base models and adapters from MIVA1 checkpoints, saves them, and attaches stacks for the commands.

    Attributes:
        miva: Base class instance.
    """

    def __init__(self, miva: "Miva"):
        """AdapterManager class initializer.

        Args:
            miva: Base class instance.
        """
        self.miva = miva

    def load_base(self, path: str) -> Optional[BaseModel]:
        """Load a frozen base model.

        Returns:
            The base model if succeeded, None if failed.
        """
        try:
            CHECK(path, str, _min=1)
        except CheckFailure as e:
            self.miva.log.msg("ERROR", "Adapter", "load_base", "bad argument", e)
            return None
        try:
            base = base_from_checkpoint(CheckpointFile.read(path))
        except (MivaError, OSError) as e:
            self.miva.log.msg("ERROR", "Adapter", "load_base", path, e)
            return None
        self.miva.log.info("Adapter", "loaded base", path, base.parameter_hash()[:12])
        return base

    def load_adapter(self, path: str, base: BaseModel) -> Optional[MivaAdapter]:
        """Load an adapter and check it against the base.

        Returns:
            The adapter if succeeded, None if failed.
        """
        try:
            CHECK(path, str, _min=1)
        except CheckFailure as e:
            self.miva.log.msg("ERROR", "Adapter", "load_adapter", "bad argument", e)
            return None
        try:
            adapter = adapter_from_checkpoint(CheckpointFile.read(path), base)
        except (MivaError, OSError) as e:
            self.miva.log.msg("ERROR", "Adapter", "load_adapter", path, e)
            return None
        self.miva.log.info("Adapter", "loaded", adapter.kind, adapter.pattern, path)
        return adapter

    def save_base(self, base: BaseModel, path: str, config: Dict[str, Any], loss_curve: Sequence[float] = ()) -> bool:
        try:
            base_checkpoint(base, config, loss_curve).write(path)
        except (MivaError, OSError) as e:
            self.miva.log.msg("ERROR", "Adapter", "save_base", path, e)
            return False
        self.miva.log.info("Adapter", "saved base", path)
        return True

    def save_adapter(self, adapter: MivaAdapter, base: BaseModel, path: str) -> bool:
        try:
            adapter_checkpoint(adapter, base.count_parameters()).write(path)
        except (MivaError, OSError) as e:
            self.miva.log.msg("ERROR", "Adapter", "save_adapter", path, e)
            return False
        self.miva.log.info("Adapter", "saved", adapter.kind, path)
        return True

    def attach_specs(self, base: BaseModel, specs: Sequence[str]) -> Optional[AdaptedModel]:
        """Load and attach adapters given as "path" or "path:weight" strings, in stacking order.

        Weights left unspecified default to uniform when none are given; mixing weighted and unweighted specs is an
        error.

        Returns:
            The handle if succeeded, None if failed.
        """
        parsed = [parse_adapter_spec(spec) for spec in specs]
        weights = [w for _, w in parsed]
        if any(w is None for w in weights) and any(w is not None for w in weights):
            self.miva.log.msg("ERROR", "Adapter", "attach_specs", "give a weight for every adapter or for none")
            return None

        adapters = []
        for path, _ in parsed:
            adapter = self.load_adapter(path, base)
            if adapter is None:
                return None
            adapters.append(adapter)
        try:
            handle = attach(base, adapters, None if not parsed or weights[0] is None else weights)
        except MivaError as e:
            self.miva.log.msg("ERROR", "Adapter", "attach_specs", e)
            return None
        self.miva.log.info("Adapter", "attached", len(adapters), "adapters", list(handle.stack.weights))
        return handle
