"""One-Euro temporal filter for the prediction stream.

Applied per axis in screen-pixel space: the derivative is low-passed at
d_cutoff, the adaptive cutoff is min_cutoff + beta * |dx|, and the value is
exponentially smoothed with alpha = 1 / (1 + tau / dt), tau = 1 / (2 pi fc).
"""

from __future__ import annotations

import math

from .geometry import GazePoint


def _alpha(cutoff: float, dt: float) -> float:
    tau = 1.0 / (2.0 * math.pi * cutoff)
    return 1.0 / (1.0 + tau / dt)


class OneEuroFilter:
    """Stateful filter for one 2D stream; timestamps must strictly increase.

    A sample with a non-increasing timestamp is dropped: ``filter`` returns
    None and the state is untouched.
    """

    def __init__(self, min_cutoff: float = 1.0, beta: float = 0.007,
                 d_cutoff: float = 1.0):
        if min_cutoff <= 0 or d_cutoff <= 0:
            raise ValueError("cutoff frequencies must be positive")
        if beta < 0:
            raise ValueError("beta must be >= 0")
        self.min_cutoff = min_cutoff
        self.beta = beta
        self.d_cutoff = d_cutoff
        self.reset()

    def reset(self):
        self._t: float | None = None
        self._x: list[float] | None = None
        self._dx = [0.0, 0.0]

    def update(self, t_ms: float, x: float, y: float):
        """Feed one sample; returns the smoothed (x, y) or None if dropped."""
        if self._t is not None and t_ms <= self._t:
            return None
        if self._x is None:
            self._t = t_ms
            self._x = [x, y]
            return (x, y)
        dt = (t_ms - self._t) / 1000.0
        out = [0.0, 0.0]
        ad = _alpha(self.d_cutoff, dt)
        for i, v in enumerate((x, y)):
            dx = (v - self._x[i]) / dt
            self._dx[i] = ad * dx + (1.0 - ad) * self._dx[i]
            cutoff = self.min_cutoff + self.beta * abs(self._dx[i])
            a = _alpha(cutoff, dt)
            out[i] = a * v + (1.0 - a) * self._x[i]
        self._t = t_ms
        self._x = out[:]
        return tuple(out)

    def filter(self, t_ms: float, p: GazePoint) -> GazePoint | None:
        """GazePoint-level wrapper; preserves the space tag."""
        res = self.update(t_ms, p.x, p.y)
        if res is None:
            return None
        return GazePoint(res[0], res[1], p.space, timestamp_ms=int(t_ms), valid=p.valid)
