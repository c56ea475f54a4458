"""Quantitative gaze measures: pointwise errors, screen-side agreement,
ROI accuracy with margins, inter-frame jitter, and the loss-parameter grid
search harness.

Invalid samples are excluded from every metric denominator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np

from .geometry import ScreenGeometry
from .validation import check_series_arrays


class MetricError(ValueError):
    """Empty input or no eligible samples: the metric is undefined."""


class Phase(IntEnum):
    INTER = -1
    FIXATION = 0
    STIMULUS = 1
    PROBE = 2


class Side(str, Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass
class GazeSeries:
    """Time-ordered gaze samples in screen pixels with per-sample labels."""

    t_ms: np.ndarray
    x: np.ndarray
    y: np.ndarray
    valid: np.ndarray
    screen: ScreenGeometry
    trial: np.ndarray = None  # trial index per sample, -1 when unassigned
    phase: np.ndarray = None  # Phase codes per sample
    source: str = ""

    def __post_init__(self):
        self.t_ms, self.x, self.y, self.valid = check_series_arrays(
            self.t_ms, self.x, self.y, self.valid)
        n = len(self.t_ms)
        if self.trial is None:
            self.trial = np.full(n, -1, dtype=np.int32)
        if self.phase is None:
            self.phase = np.full(n, int(Phase.INTER), dtype=np.int8)

    def __len__(self):
        return len(self.t_ms)

    def mask(self, phase: Phase | None = None, require_valid: bool = True) -> np.ndarray:
        m = np.ones(len(self), dtype=bool)
        if require_valid:
            m &= self.valid
        if phase is not None:
            m &= self.phase == int(phase)
        return m


def _check_pairs(preds, gts):
    p = np.asarray(preds, dtype=np.float64)
    g = np.asarray(gts, dtype=np.float64)
    if p.size == 0 or g.size == 0:
        raise MetricError("empty input")
    if p.shape != g.shape or p.ndim != 2 or p.shape[1] != 2:
        raise MetricError(f"expected matching (N, 2) arrays, got {p.shape} vs {g.shape}")
    return p, g


def rmse2d(preds, gts) -> float:
    p, g = _check_pairs(preds, gts)
    return float(np.sqrt(np.mean(np.sum((p - g) ** 2, axis=1))))


def mean_l2(preds, gts) -> float:
    p, g = _check_pairs(preds, gts)
    return float(np.mean(np.linalg.norm(p - g, axis=1)))


def l2_over_diagonal(preds, gts, screens) -> float:
    """Mean of per-sample L2 / that sample's screen diagonal, as a percentage."""
    p, g = _check_pairs(preds, gts)
    diags = np.array([s.diagonal_px if isinstance(s, ScreenGeometry)
                      else math.hypot(s[0], s[1]) for s in screens], dtype=np.float64)
    if len(diags) != len(p):
        raise MetricError("one screen per sample required")
    return float(np.mean(np.linalg.norm(p - g, axis=1) / diags) * 100.0)


def screen_side(x_px: float, screen: ScreenGeometry) -> Side:
    """Left strictly below the midline; the midline itself counts as right."""
    return Side.LEFT if x_px < screen.width_px / 2 else Side.RIGHT


def _eligible(series: GazeSeries, phase: Phase | None):
    idx = np.flatnonzero(series.mask(phase=phase))
    return idx, series.t_ms[idx]


def _mutual_nearest_pairs(ta: np.ndarray, tb: np.ndarray, tol_ms: float):
    """Mutual nearest-timestamp pairing (symmetric in its arguments)."""
    if len(ta) == 0 or len(tb) == 0:
        return []

    def nearest(src, dst):
        pos = np.searchsorted(dst, src)
        out = np.empty(len(src), dtype=np.int64)
        for i, (s, p) in enumerate(zip(src, pos)):
            cands = [c for c in (p - 1, p) if 0 <= c < len(dst)]
            out[i] = min(cands, key=lambda c: (abs(int(dst[c]) - int(s)), c))
        return out

    a2b = nearest(ta, tb)
    b2a = nearest(tb, ta)
    pairs = []
    for i, j in enumerate(a2b):
        if b2a[j] == i and abs(int(ta[i]) - int(tb[j])) <= tol_ms:
            pairs.append((i, j))
    return pairs


def side_agreement(a: GazeSeries, b: GazeSeries, tol_ms: float = 50.0,
                   phase: Phase | None = Phase.STIMULUS) -> float:
    """Fraction of time-aligned valid sample pairs on the same screen side."""
    ia, ta = _eligible(a, phase)
    ib, tb = _eligible(b, phase)
    pairs = _mutual_nearest_pairs(ta, tb, tol_ms)
    if not pairs:
        raise MetricError("no overlapping valid sample pairs")
    agree = 0
    for i, j in pairs:
        sa = screen_side(a.x[ia[i]], a.screen)
        sb = screen_side(b.x[ib[j]], b.screen)
        agree += sa == sb
    return agree / len(pairs)


@dataclass(frozen=True)
class Roi:
    """Stimulus rectangle; margins expand each edge by a fraction of the
    corresponding screen dimension, then clamp to the screen."""

    rect: tuple[float, float, float, float]
    margin: float = 0.0

    def expanded(self, margin: float, screen: ScreenGeometry):
        x0, y0, x1, y1 = self.rect
        dx = margin * screen.width_px
        dy = margin * screen.height_px
        return (max(0.0, x0 - dx), max(0.0, y0 - dy),
                min(float(screen.width_px), x1 + dx),
                min(float(screen.height_px), y1 + dy))

    def contains(self, x: float, y: float, margin: float, screen: ScreenGeometry) -> bool:
        x0, y0, x1, y1 = self.expanded(margin, screen)
        return x0 <= x <= x1 and y0 <= y <= y1


def roi_accuracy(series: GazeSeries, trial_rois, margin: float | None = None,
                 phase: Phase | None = Phase.STIMULUS) -> float:
    """Fraction of valid stimulus-phase samples inside their trial's ROI(s).

    ``trial_rois`` maps trial index to one Roi or a sequence of Rois; a sample
    counts when it falls inside any of them.
    """
    idx = np.flatnonzero(series.mask(phase=phase))
    idx = idx[np.isin(series.trial[idx], list(trial_rois.keys()))]
    if len(idx) == 0:
        raise MetricError("no valid samples")
    hits = 0
    for i in idx:
        rois = trial_rois[int(series.trial[i])]
        if isinstance(rois, Roi):
            rois = (rois,)
        m = margin
        hit = False
        for roi in rois:
            use = roi.margin if m is None else m
            if roi.contains(float(series.x[i]), float(series.y[i]), use, series.screen):
                hit = True
                break
        hits += hit
    return hits / len(idx)


def jitter(series: GazeSeries, phase: Phase | None = None) -> float:
    """Mean distance between consecutive valid samples of the same segment."""
    n = len(series)
    if n < 2:
        raise MetricError("need at least two samples")
    both_valid = series.valid[1:] & series.valid[:-1]
    same_seg = (series.trial[1:] == series.trial[:-1]) & (series.phase[1:] == series.phase[:-1])
    elig = both_valid & same_seg
    if phase is not None:
        elig &= series.phase[1:] == int(phase)
    if not elig.any():
        raise MetricError("no eligible consecutive pairs")
    dx = np.diff(series.x)[elig]
    dy = np.diff(series.y)[elig]
    return float(np.mean(np.hypot(dx, dy)))


@dataclass
class GridSearchResult:
    best_beta: float
    curves: dict = field(default_factory=dict)  # beta -> per-epoch validation losses
    excluded: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"best_beta": self.best_beta,
                "curves": {str(k): list(map(float, v)) for k, v in self.curves.items()},
                "excluded": list(self.excluded)}


def beta_grid_search(train_eval, betas, lr: float) -> GridSearchResult:
    """Run train_eval(beta, lr) per beta; pick the argmin of min-over-epochs
    validation loss, ties resolved toward the smaller beta. Betas producing a
    non-finite curve are excluded and flagged."""
    betas = list(betas)
    if not betas:
        raise MetricError("need at least one beta")
    curves = {}
    excluded = []
    for beta in betas:
        curve = [float(v) for v in train_eval(beta, lr)]
        if not curve or not all(math.isfinite(v) for v in curve):
            excluded.append(beta)
            continue
        curves[beta] = curve
    if not curves:
        raise MetricError("every beta produced a non-finite loss curve")
    best = min(curves, key=lambda b: (min(curves[b]), b))
    return GridSearchResult(best_beta=best, curves=curves, excluded=excluded)
