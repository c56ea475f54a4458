"""Adam optimizer over a named ParamSet."""

from __future__ import annotations

import numpy as np

from .layers import Param, ShapeError


class Adam:
    """Bias-corrected Adam. One ``step()`` advances t by exactly 1."""

    def __init__(self, params: dict[str, Param], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        self._v: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        for name, p in params.items():
            self._m[name] = (np.zeros_like(p.w), np.zeros_like(p.b))
            self._v[name] = (np.zeros_like(p.w), np.zeros_like(p.b))

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for name, p in self.params.items():
            mw, mb = self._m[name]
            vw, vb = self._v[name]
            for theta, g, m, v in ((p.w, p.gw, mw, vw), (p.b, p.gb, mb, vb)):
                if theta.shape != g.shape:
                    raise ShapeError(f"{name}: grad shape {g.shape} != param shape {theta.shape}")
                m *= b1
                m += (1.0 - b1) * g
                v *= b2
                v += (1.0 - b2) * g * g
                theta -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
