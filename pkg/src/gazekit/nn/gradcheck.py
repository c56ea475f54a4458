"""Finite-difference verification of analytic gradients.

The check runs in float64 (callers cast params/input first): central
differences in float32 carry rounding noise above the 1e-3 relative-error
bar this harness is meant to enforce.
"""

from __future__ import annotations

import math

import numpy as np

from .layers import Param


def relative_error(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), 1e-8)


def layer_input_grad_check(layer, x: np.ndarray, eps: float = 1e-3,
                           samples: int = 8, rng: np.random.Generator | None = None) -> float:
    """Check a single layer's input gradient against central differences.

    Uses the scalar objective L = 0.5 * sum(y^2), whose upstream gradient is
    y itself. Works on any single-input layer; runs in the dtype of ``x``.
    """
    rng = rng or np.random.default_rng(0)

    def loss_of(xq):
        y, _ = layer.forward(xq)
        return 0.5 * float(np.sum(np.asarray(y, dtype=np.float64) ** 2))

    y, ctx = layer.forward(x)
    if layer.param is not None:
        layer.param.zero_grad()
    gx = layer.backward(ctx, y.copy())
    flat = x.reshape(-1)
    gflat = np.asarray(gx).reshape(-1)
    worst = 0.0
    for i in rng.choice(flat.size, size=min(samples, flat.size), replace=False):
        orig = flat[i]
        flat[i] = orig + eps
        lp = loss_of(x)
        flat[i] = orig - eps
        lm = loss_of(x)
        flat[i] = orig
        numeric = (lp - lm) / (2.0 * eps)
        worst = max(worst, relative_error(float(gflat[i]), numeric))
    return worst


def grad_check(loss_and_grads, params: dict[str, Param], eps: float = 1e-3,
               samples_per_tensor: int = 4, rng: np.random.Generator | None = None):
    """Compare analytic parameter gradients against central differences.

    ``loss_and_grads()`` must return a scalar loss computed from the current
    parameter values and, as a side effect, leave fresh gradients in
    ``params`` (callers zero them internally). Returns the max relative error
    over the sampled entries; per-tensor maxima are available via
    ``grad_check.last_report`` style return tuple.
    """
    if not (1e-4 <= eps <= 1e-2):
        raise ValueError(f"eps must lie in [1e-4, 1e-2], got {eps}")
    rng = rng or np.random.default_rng(0)

    base_loss = loss_and_grads()
    if not math.isfinite(base_loss):
        raise ValueError("non-finite loss")
    analytic = {name: (p.gw.copy(), p.gb.copy()) for name, p in params.items()}

    worst = 0.0
    report: dict[str, float] = {}
    for name, p in params.items():
        tensor_worst = 0.0
        for slot, (theta, grad) in enumerate(((p.w, analytic[name][0]), (p.b, analytic[name][1]))):
            flat = theta.reshape(-1)
            k = min(samples_per_tensor, flat.size)
            idxs = rng.choice(flat.size, size=k, replace=False)
            for i in idxs:
                orig = flat[i]
                flat[i] = orig + eps
                lp = loss_and_grads()
                flat[i] = orig - eps
                lm = loss_and_grads()
                flat[i] = orig
                if not (math.isfinite(lp) and math.isfinite(lm)):
                    raise ValueError("non-finite loss during perturbation")
                numeric = (lp - lm) / (2.0 * eps)
                err = relative_error(float(grad.reshape(-1)[i]), numeric)
                tensor_worst = max(tensor_worst, err)
        report[name] = tensor_worst
        worst = max(worst, tensor_worst)
    return worst, report
