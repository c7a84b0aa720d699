"""SGD with momentum and Adam, updating parameter arrays in place."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError, NumericError


@dataclass
class OptimHyper:
    algorithm: str = "adam"
    lr: float = 1e-4
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.algorithm not in ("adam", "sgd-momentum"):
            raise InvalidInputError(f"unknown optimizer {self.algorithm!r}")
        if not self.lr > 0:
            raise InvalidInputError("learning rate must be positive")


@dataclass
class OptimState:
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def optimize_step(params: dict, grads: dict, state: OptimState, hyper: OptimHyper):
    """One update of every parameter; refuses the whole step on a non-finite gradient.

    sgd-momentum: v <- momentum*v + g;  p <- p - lr*v
    adam:         m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2
                  p <- p - lr * (m/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps)
    """
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise InvalidInputError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for {name}; step refused")
    state.t += 1
    for name, p in params.items():
        g = grads[name].astype(p.dtype, copy=False)
        dt = p.dtype.type
        if hyper.algorithm == "sgd-momentum":
            v = state.m.get(name)
            v = g.copy() if v is None else dt(hyper.momentum) * v + g
            state.m[name] = v
            p -= dt(hyper.lr) * v
        else:
            m = state.m.get(name, np.zeros_like(p))
            v = state.v.get(name, np.zeros_like(p))
            m = dt(hyper.beta1) * m + dt(1 - hyper.beta1) * g
            v = dt(hyper.beta2) * v + dt(1 - hyper.beta2) * (g * g)
            state.m[name], state.v[name] = m, v
            mhat = m / dt(1 - hyper.beta1**state.t)
            vhat = v / dt(1 - hyper.beta2**state.t)
            p -= dt(hyper.lr) * mhat / (np.sqrt(vhat) + dt(hyper.eps))
    return params, state
