"""Input validation helpers shared by the estimators and the server."""

from __future__ import annotations

import numpy as np

from .model import InputBundle, ModelConfig
from .preprocess import LANDMARK_COUNT


def check_bundles(X, config: ModelConfig) -> list[InputBundle]:
    """Validate a sequence of InputBundles against a model config."""
    bundles = list(X)
    if not bundles:
        raise ValueError("empty bundle list")
    for i, b in enumerate(bundles):
        if not isinstance(b, InputBundle):
            raise TypeError(f"X[{i}] is {type(b).__name__}, expected InputBundle")
        b.validate(config)
    return bundles


def check_targets(y, n_samples: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float32)
    if y.shape != (n_samples, 2):
        raise ValueError(f"y has shape {y.shape}, expected ({n_samples}, 2)")
    if not np.all(np.isfinite(y)):
        raise ValueError("y contains non-finite values")
    return y


def check_landmarks_flat(landmarks) -> np.ndarray:
    lm = np.asarray(landmarks, dtype=np.float32).reshape(-1)
    if lm.size != LANDMARK_COUNT * 2:
        raise ValueError(
            f"landmarks must be a flat {LANDMARK_COUNT * 2}-float array, got {lm.size}")
    if not np.all(np.isfinite(lm)):
        raise ValueError("landmarks contain non-finite values")
    return lm.reshape(LANDMARK_COUNT, 2)


def check_series_arrays(t_ms, x, y, valid=None):
    t = np.asarray(t_ms, dtype=np.int64)
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    if not (t.shape == xs.shape == ys.shape) or t.ndim != 1:
        raise ValueError("t, x, y must be equal-length 1D arrays")
    if np.any(np.diff(t) < 0):
        raise ValueError("timestamps must be nondecreasing")
    if valid is None:
        v = np.ones(t.shape, dtype=bool)
    else:
        v = np.asarray(valid, dtype=bool)
        if v.shape != t.shape:
            raise ValueError("valid mask length mismatch")
    return t, xs, ys, v
