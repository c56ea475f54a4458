"""Regression losses: batch-mean Euclidean and element-mean smooth L1.

Both return ``(value, grad)`` with the gradient taken with respect to the
predictions.
"""

from __future__ import annotations

import numpy as np


def euclidean_loss(pred: np.ndarray, target: np.ndarray):
    """Mean over the batch of squared L2 distances.

    value = (1/N) * sum_i ||y_i - yhat_i||^2, grad = 2 (pred - target) / N.
    """
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if pred.ndim != 2 or pred.shape[0] < 1:
        raise ValueError("expected a non-empty (N, D) batch")
    n = pred.shape[0]
    diff = pred.astype(np.float64) - target.astype(np.float64)
    value = float(np.sum(diff * diff) / n)
    grad = (2.0 * diff / n).astype(pred.dtype)
    return value, grad


def smooth_l1_loss(pred: np.ndarray, target: np.ndarray, beta: float):
    """Piecewise loss on r = target - pred, mean-reduced over all elements.

    |r| < beta: r^2 / (2 beta); otherwise |r| - beta/2. Continuous and once
    differentiable at |r| = beta for any beta > 0.
    """
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise ValueError("empty batch")
    d = pred.astype(np.float64) - target.astype(np.float64)  # d = -r
    ad = np.abs(d)
    quad = ad < beta
    vals = np.where(quad, ad * ad / (2.0 * beta), ad - beta / 2.0)
    m = d.size
    value = float(vals.sum() / m)
    grad = np.where(quad, d / beta, np.sign(d)) / m
    return value, grad.astype(pred.dtype)
