"""Gradient self-verification harness: every layer kind plus the assembled
tiny network, analytic vs central finite differences (run in float64)."""

from __future__ import annotations

import time

import numpy as np

from .model import GazeNetwork, ModelConfig
from .nn import (Concat, Conv2D, Flatten, FullyConnected, MaxPool2D, ReLU,
                 euclidean_loss, grad_check, layer_input_grad_check)

TOLERANCE = 1e-3


def _layer_param_check(layer, x, eps, rng):
    def loss_and_grads():
        y, ctx = layer.forward(x)
        layer.param.zero_grad()
        layer.backward(ctx, y.copy())
        return 0.5 * float(np.sum(y.astype(np.float64) ** 2))

    worst, _ = grad_check(loss_and_grads, {layer.name: layer.param}, eps=eps,
                          samples_per_tensor=4, rng=rng)
    return worst


def _to_float64(net: GazeNetwork):
    for p in net.params.values():
        p.w = p.w.astype(np.float64)
        p.b = p.b.astype(np.float64)
        p.gw = np.zeros_like(p.w)
        p.gb = np.zeros_like(p.b)


def _concat_check(rng, eps):
    """Finite-difference the first input of a two-way concat."""
    concat = Concat("check.concat")
    x = rng.normal(size=(2, 5))
    other = rng.normal(size=(2, 3))

    class FirstOfConcat:
        name = "concat_first"
        param = None

        def forward(self, xq):
            y, ctx = concat.forward([xq, other])
            return y, ctx

        def backward(self, ctx, gy):
            return concat.backward(ctx, gy)[0]

    return layer_input_grad_check(FirstOfConcat(), x, eps=eps, rng=rng)


def gradcheck_report(eps: float = 1e-4, seed: int = 3, inject_fault: bool = False,
                     samples_per_tensor: int = 2):
    """Returns (max_relative_error, per-check dict, elapsed_seconds).

    The default seed keeps every sampled perturbation away from ReLU/max-pool
    kinks, where central differences are undefined; everything is
    deterministic, so the run is reproducible.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    report: dict[str, float] = {}

    conv = Conv2D(2, 3, 3, stride=1, pad=1, name="check.conv", rng=rng)
    conv.param.w = conv.param.w.astype(np.float64)
    conv.param.b = conv.param.b.astype(np.float64)
    conv.param.gw = np.zeros_like(conv.param.w)
    conv.param.gb = np.zeros_like(conv.param.b)
    x = rng.normal(size=(2, 2, 6, 6))
    report["conv2d.params"] = _layer_param_check(conv, x, eps, rng)
    report["conv2d.input"] = layer_input_grad_check(conv, x, eps=eps, rng=rng)

    fc = FullyConnected(7, 4, name="check.fc", rng=rng)
    fc.param.w = fc.param.w.astype(np.float64)
    fc.param.b = fc.param.b.astype(np.float64)
    fc.param.gw = np.zeros_like(fc.param.w)
    fc.param.gb = np.zeros_like(fc.param.b)
    xf = rng.normal(size=(3, 7))
    report["fullyconnected.params"] = _layer_param_check(fc, xf, eps, rng)
    report["fullyconnected.input"] = layer_input_grad_check(fc, xf, eps=eps, rng=rng)

    # keep pre-activations away from the ReLU/pool kinks
    xr = rng.normal(size=(2, 3, 4, 4))
    xr += np.sign(xr) * 0.05
    report["relu.input"] = layer_input_grad_check(ReLU("check.relu"), xr, eps=eps, rng=rng)
    report["maxpool2d.input"] = layer_input_grad_check(
        MaxPool2D(2, 2, "check.pool"), rng.normal(size=(2, 2, 6, 6)), eps=eps, rng=rng)
    report["flatten.input"] = layer_input_grad_check(
        Flatten("check.flatten"), rng.normal(size=(2, 3, 4)), eps=eps, rng=rng)
    report["concat.input"] = _concat_check(rng, eps)

    # assembled tiny network, float64
    net = GazeNetwork(ModelConfig.tiny(), seed=seed)
    _to_float64(net)
    n = 2
    left = rng.normal(size=(n, 3, 16, 16)) * 0.5
    right = rng.normal(size=(n, 3, 16, 16)) * 0.5
    face = rng.normal(size=(n, 3, 32, 32)) * 0.5
    grid = (rng.random((n, 625)) < 0.3).astype(np.float64)
    targets = rng.uniform(0.2, 0.8, size=(n, 2))

    def loss_and_grads():
        out, ctx = net.forward(left, right, face, grid)
        value, grad = euclidean_loss(out, targets)
        net.zero_grad()
        net.backward(ctx, grad)
        if inject_fault:
            net.params["fusion.fc2"].gw *= -1.0
        return value

    worst_net, net_report = grad_check(loss_and_grads, net.params, eps=eps,
                                       samples_per_tensor=samples_per_tensor, rng=rng)
    for name, err in net_report.items():
        report[f"network.{name}"] = err

    overall = max(report.values())
    return overall, report, time.perf_counter() - t0
