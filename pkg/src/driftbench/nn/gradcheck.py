"""Central finite-difference check of analytic gradients (float64 only)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError
from .model import Model


@dataclass
class GradCheckResult:
    max_rel_error: float
    checked: int
    skipped_kinks: int
    worst: str


def relative_error(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), 1e-12)


def grad_check(model: Model, inputs: dict, eps: float = 1e-5, seed: int = 0) -> GradCheckResult:
    """Compare backprop against central differences over every parameter entry.

    The scalar checked is sum(w_o * y_o) with fixed random weights per
    output. Entries whose perturbation changes any ReLU activity pattern sit
    on a kink and are skipped.
    """
    if any(v.dtype != np.float64 for v in model.params.values()):
        raise InvalidInputError("grad_check needs a float64 model")
    inputs = {k: np.asarray(v, dtype=np.float64) for k, v in inputs.items()}
    rng = np.random.default_rng(seed)
    out = model.forward(inputs)
    weights = {k: rng.standard_normal(v.shape) for k, v in out.items()}

    def loss():
        y = model.forward(inputs)
        return sum(float((weights[k] * y[k]).sum()) for k in y)

    model.zero_grad()
    model.forward(inputs)
    base_sig = model.kink_signature()
    model.backward(weights)
    analytic = {k: v.copy() for k, v in model.grads.items()}

    worst, worst_name, checked, skipped = 0.0, "", 0, 0
    for name, p in model.params.items():
        flat = p.reshape(-1)
        ga = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp = loss()
            sig_p = model.kink_signature()
            flat[i] = orig - eps
            lm = loss()
            sig_m = model.kink_signature()
            flat[i] = orig
            if sig_p != base_sig or sig_m != base_sig:
                skipped += 1
                continue
            err = relative_error(ga[i], (lp - lm) / (2 * eps))
            checked += 1
            if err > worst:
                worst, worst_name = err, f"{name}[{i}]"
    return GradCheckResult(worst, checked, skipped, worst_name)
