"""Layer graphs: named modules wired by nodes, with shared-weight reuse."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError, StateError
from .layers import Layer, ReLU


@dataclass(frozen=True)
class Node:
    name: str
    module: str
    inputs: tuple


class Model:
    """A directed acyclic graph of modules evaluated in node order.

    Several nodes may reference the same module; they then share its
    parameter storage and their gradients add up in it.
    """

    def __init__(self, modules: dict, nodes: list, inputs: list, outputs: list, descriptor: str = ""):
        self.modules: dict[str, Layer] = dict(modules)
        self.nodes = [Node(n.name, n.module, tuple(n.inputs)) for n in nodes]
        self.inputs = list(inputs)
        self.outputs = list(outputs)
        self.descriptor = descriptor
        self._caches = None
        known = set(self.inputs)
        for n in self.nodes:
            if n.module not in self.modules:
                raise InvalidInputError(f"node {n.name} uses unknown module {n.module}")
            missing = [i for i in n.inputs if i not in known]
            if missing:
                raise InvalidInputError(f"node {n.name} reads undefined {missing}")
            known.add(n.name)

    # -- parameters ---------------------------------------------------------

    @property
    def params(self) -> dict[str, np.ndarray]:
        return {f"{m}.{k}": v for m, mod in self.modules.items() for k, v in mod.params.items()}

    @property
    def grads(self) -> dict[str, np.ndarray]:
        return {f"{m}.{k}": v for m, mod in self.modules.items() for k, v in mod.grads.items()}

    def set_param(self, name: str, value: np.ndarray):
        mod_name, key = name.split(".", 1)
        mod = self.modules[mod_name]
        current = mod.params[key]
        if current.shape != value.shape:
            raise InvalidInputError(f"parameter {name}: shape {value.shape} != {current.shape}")
        if hasattr(mod, "set_param"):
            mod.set_param(key, value.astype(current.dtype))
        else:
            mod.params[key] = value.astype(current.dtype)

    def num_params(self) -> int:
        return sum(v.size for v in self.params.values())

    def zero_grad(self):
        for mod in self.modules.values():
            mod.zero_grad()

    def astype(self, dtype) -> "Model":
        for mod in self.modules.values():
            mod.astype(dtype)
        return self

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    # -- evaluation ---------------------------------------------------------

    def forward(self, inputs: dict) -> dict:
        missing = [i for i in self.inputs if i not in inputs]
        if missing:
            raise InvalidInputError(f"missing model inputs {missing}")
        values = dict(inputs)
        caches = {}
        for n in self.nodes:
            x = values[n.inputs[0]] if len(n.inputs) == 1 else [values[i] for i in n.inputs]
            try:
                y, cache = self.modules[n.module].forward(x)
            except InvalidInputError as e:
                raise InvalidInputError(f"node {n.name} ({n.module}): {e}") from None
            values[n.name] = y
            caches[n.name] = cache
        self._caches = caches
        return {o: values[o] for o in self.outputs}

    def backward(self, output_grads: dict) -> dict:
        """Accumulate parameter gradients for the last forward; returns input gradients."""
        if self._caches is None:
            raise StateError("backward called before forward")
        dvals: dict[str, np.ndarray] = {}
        for name, g in output_grads.items():
            dvals[name] = g
        for n in reversed(self.nodes):
            if n.name not in dvals:
                continue
            dx = self.modules[n.module].backward(dvals.pop(n.name), self._caches[n.name])
            if len(n.inputs) == 1:
                dx = [dx]
            for i, g in zip(n.inputs, dx):
                if g is None:
                    continue
                dvals[i] = dvals[i] + g if i in dvals else g
        return {i: dvals.get(i) for i in self.inputs}

    def kink_signature(self) -> bytes:
        """Packed activity masks of every ReLU in the last forward pass."""
        if self._caches is None:
            raise StateError("no forward pass recorded")
        parts = []
        for n in self.nodes:
            parts.extend(_relu_masks(self.modules[n.module], self._caches[n.name]))
        return b"".join(np.packbits(m).tobytes() for m in parts)


def _relu_masks(layer, cache):
    if isinstance(layer, ReLU):
        return [cache]
    if hasattr(layer, "layers"):
        out = []
        for (_, sub), c in zip(layer.layers, cache):
            out.extend(_relu_masks(sub, c))
        return out
    return []


def init_params(model: Model, seed: int):
    """Seeded fan-in uniform init: He bound for layers feeding a ReLU, LeCun otherwise; zero biases.

    Each parameter draws from its own stream keyed by name, so adding a head
    does not change the initial values of the others.
    """
    import zlib

    relu_fed = _relu_fed_layers(model)
    for full, layer in _named_param_layers(model):
        if "W" not in layer.params:
            continue
        name = f"{full}.W"
        rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode())])
        gain = 6.0 if full in relu_fed else 3.0
        bound = np.sqrt(gain / layer.fan_in)
        w = layer.params["W"]
        layer.params["W"] = rng.uniform(-bound, bound, size=w.shape).astype(w.dtype)
        layer.params["b"] = np.zeros_like(layer.params["b"])
    model.zero_grad()


def _named_param_layers(model: Model):
    for m, mod in model.modules.items():
        for name, layer in mod.named_layers(m):
            if layer.params and not hasattr(layer, "layers"):
                yield name, layer


def _relu_fed_layers(model: Model) -> set:
    fed = set()
    for m, mod in model.modules.items():
        if hasattr(mod, "layers"):
            names = [(f"{m}.{n}", l) for n, l in mod.layers]
            for (name, layer), (_, nxt) in zip(names, names[1:]):
                if isinstance(nxt, ReLU):
                    fed.add(name)
    return fed
