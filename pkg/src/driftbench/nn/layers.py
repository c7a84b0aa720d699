"""Layers with explicit forward/backward passes.

Layers keep no per-call state: ``forward`` returns ``(output, cache)`` and
``backward`` consumes that cache. One layer object can therefore be applied
at several places in a graph, and its gradient buffers collect the sum of
every use. Images are NHWC.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import InvalidInputError


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def forward(self, x):
        raise NotImplementedError

    def backward(self, dy, cache):
        raise NotImplementedError

    def zero_grad(self):
        for k, v in self.params.items():
            self.grads[k] = np.zeros_like(v)

    def astype(self, dtype):
        for k in self.params:
            self.params[k] = self.params[k].astype(dtype)
        self.zero_grad()

    def named_layers(self, prefix=""):
        yield prefix, self


class Conv2d(Layer):
    kind = "conv2d"

    def __init__(self, in_ch: int, out_ch: int, kernel: int = 3, stride: int = 2, padding: int = 1, dtype=np.float32):
        super().__init__()
        self.in_ch, self.out_ch = in_ch, out_ch
        self.kernel, self.stride, self.padding = kernel, stride, padding
        # A first layer fed by raw images never needs its input gradient.
        self.input_grad = True
        self.params = {
            "W": np.zeros((out_ch, in_ch, kernel, kernel), dtype=dtype),
            "b": np.zeros(out_ch, dtype=dtype),
        }
        self.zero_grad()

    @property
    def fan_in(self) -> int:
        return self.in_ch * self.kernel * self.kernel

    def output_shape(self, h: int, w: int) -> tuple[int, int]:
        k, s, p = self.kernel, self.stride, self.padding
        return (h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1

    def forward(self, x):
        if x.ndim != 4 or x.shape[3] != self.in_ch:
            raise InvalidInputError(f"conv2d expects (N,H,W,{self.in_ch}) input, got {x.shape}")
        k, s, p = self.kernel, self.stride, self.padding
        n, h, w, c = x.shape
        ho, wo = self.output_shape(h, w)
        xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0))) if p else x
        win = sliding_window_view(xp, (k, k), axis=(1, 2))[:, ::s, ::s][:, :ho, :wo]
        cols = win.reshape(n * ho * wo, c * k * k)
        wm = self.params["W"].reshape(self.out_ch, -1)
        y = cols @ wm.T + self.params["b"]
        return y.reshape(n, ho, wo, self.out_ch), (cols, xp.shape, x.shape)

    def backward(self, dy, cache):
        cols, xp_shape, x_shape = cache
        k, s, p = self.kernel, self.stride, self.padding
        n, ho, wo, o = dy.shape
        dy2 = dy.reshape(-1, o)
        self.grads["W"] += (dy2.T @ cols).reshape(self.params["W"].shape)
        self.grads["b"] += dy2.sum(axis=0)
        if not self.input_grad:
            return None
        dxp = np.zeros(xp_shape, dtype=dy.dtype)
        w_taps = self.params["W"]
        for i in range(k):
            for j in range(k):
                tap = (dy2 @ np.ascontiguousarray(w_taps[:, :, i, j])).reshape(n, ho, wo, self.in_ch)
                dxp[:, i : i + s * (ho - 1) + 1 : s, j : j + s * (wo - 1) + 1 : s, :] += tap
        h, w = x_shape[1], x_shape[2]
        return dxp[:, p : p + h, p : p + w, :]


class Dense(Layer):
    kind = "fc"

    def __init__(self, n_in: int, n_out: int, dtype=np.float32):
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        self.params = {"W": np.zeros((n_in, n_out), dtype=dtype), "b": np.zeros(n_out, dtype=dtype)}
        self.zero_grad()

    @property
    def fan_in(self) -> int:
        return self.n_in

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise InvalidInputError(f"fc expects (N,{self.n_in}) input, got {x.shape}")
        return x @ self.params["W"] + self.params["b"], x

    def backward(self, dy, cache):
        x = cache
        self.grads["W"] += x.T @ dy
        self.grads["b"] += dy.sum(axis=0)
        return dy @ self.params["W"].T


class ReLU(Layer):
    kind = "relu"

    def forward(self, x):
        mask = x > 0
        return x * mask, mask

    def backward(self, dy, cache):
        return dy * cache


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dy, cache):
        return dy.reshape(cache)


class Concat(Layer):
    """Joins a list of (N, F_i) inputs along the feature axis."""

    kind = "concat"

    def forward(self, xs):
        sizes = [x.shape[1] for x in xs]
        if len({x.shape[0] for x in xs}) != 1:
            raise InvalidInputError(f"concat batch sizes differ: {[x.shape for x in xs]}")
        return np.concatenate(xs, axis=1), sizes

    def backward(self, dy, cache):
        return np.split(dy, np.cumsum(cache)[:-1], axis=1)


class Sequential(Layer):
    kind = "sequential"

    def __init__(self, layers: list[tuple[str, Layer]]):
        super().__init__()
        self.layers = layers

    @property
    def params(self):
        return {f"{name}.{k}": v for name, layer in self.layers for k, v in layer.params.items()}

    @params.setter
    def params(self, value):
        # Layer.__init__ assigns an empty dict; sub-layers own the storage.
        pass

    @property
    def grads(self):
        return {f"{name}.{k}": v for name, layer in self.layers for k, v in layer.grads.items()}

    @grads.setter
    def grads(self, value):
        pass

    def zero_grad(self):
        for _, layer in self.layers:
            layer.zero_grad()

    def astype(self, dtype):
        for _, layer in self.layers:
            layer.astype(dtype)

    def named_layers(self, prefix=""):
        for name, layer in self.layers:
            yield from layer.named_layers(f"{prefix}.{name}" if prefix else name)

    def set_param(self, name: str, value: np.ndarray):
        sub, key = name.split(".", 1)
        for n, layer in self.layers:
            if n == sub:
                layer.params[key] = value
                return
        raise KeyError(name)

    def forward(self, x):
        caches = []
        for name, layer in self.layers:
            try:
                x, c = layer.forward(x)
            except InvalidInputError as e:
                raise InvalidInputError(f"layer {name}: {e}") from None
            caches.append(c)
        return x, caches

    def backward(self, dy, cache):
        for (_, layer), c in zip(reversed(self.layers), reversed(cache)):
            dy = layer.backward(dy, c)
        return dy
