"""Scikit-learn style front door: a gaze regressor, a frame-to-bundle
transformer, and a series smoother, so the pipeline composes with the wider
ecosystem (get_params/set_params/clone all work).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .geometry import Space
from .model import GazeNetwork, ModelConfig, stack_bundles
from .nn import Adam, euclidean_loss, smooth_l1_loss
from .preprocess import DEFAULT_LANDMARKS, MeanImages, make_bundle
from .smoothing import OneEuroFilter
from .validation import check_bundles, check_series_arrays, check_targets


class GazeRegressor(BaseEstimator, RegressorMixin):
    """Trains/fine-tunes the three-branch network and predicts 2D gaze.

    X is a sequence of InputBundle; y is (N, 2) in the configured output
    space (normalized screen or camera centimeters).
    """

    def __init__(self, profile: str = "tiny", output_space: str = "normalized",
                 loss: str = "smooth_l1", beta: float = 0.8, lr: float = 1e-4,
                 epochs: int = 15, batch_size: int = 8, seed: int = 0,
                 shuffle: bool = True):
        self.profile = profile
        self.output_space = output_space
        self.loss = loss
        self.beta = beta
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.shuffle = shuffle

    # -- internals ---------------------------------------------------------

    def _make_config(self) -> ModelConfig:
        return ModelConfig.for_profile(self.profile, Space(self.output_space))

    def _loss(self, pred, target):
        if self.loss == "smooth_l1":
            return smooth_l1_loss(pred, target, self.beta)
        if self.loss == "euclidean":
            return euclidean_loss(pred, target)
        raise ValueError(f"unknown loss {self.loss!r}")

    # -- sklearn API --------------------------------------------------------

    def fit(self, X, y, eval_set=None):
        """Train from the seed initialization; records per-epoch loss curves."""
        config = self._make_config()
        bundles = check_bundles(X, config)
        targets = check_targets(y, len(bundles))
        self.network_ = GazeNetwork(config, seed=self.seed)
        self.loss_curve_ = []
        self.val_loss_curve_ = [] if eval_set is not None else None
        self._train(bundles, targets, eval_set)
        return self

    def _train(self, bundles, targets, eval_set=None):
        net = self.network_
        opt = Adam(net.params, lr=self.lr)
        left, right, face, grid = stack_bundles(bundles, net.config)
        n = len(bundles)
        bs = min(self.batch_size, n)
        rng = np.random.default_rng(self.seed)
        if eval_set is not None:
            vx, vy = eval_set
            v_bundles = check_bundles(vx, net.config)
            v_targets = check_targets(vy, len(v_bundles))
        for _ in range(self.epochs):
            order = rng.permutation(n) if self.shuffle else np.arange(n)
            epoch_loss = 0.0
            batches = 0
            for start in range(0, n, bs):
                idx = order[start:start + bs]
                out, ctx = net.forward(left[idx], right[idx], face[idx], grid[idx])
                value, grad = self._loss(out, targets[idx])
                net.zero_grad()
                net.backward(ctx, grad)
                opt.step()
                epoch_loss += value
                batches += 1
            self.loss_curve_.append(epoch_loss / batches)
            if eval_set is not None:
                pred = net.predict_batch(v_bundles)
                v_value, _ = self._loss(pred, v_targets)
                self.val_loss_curve_.append(v_value)
        return self

    def predict(self, X) -> np.ndarray:
        """Raw network outputs clamped to the output space's range."""
        check_is_fitted(self, "network_")
        bundles = check_bundles(X, self.network_.config)
        out = self.network_.predict_batch(bundles).astype(np.float64)
        space = self.network_.config.output_space
        if space == Space.CAMERA_CM:
            return np.clip(out, -25.0, 25.0)
        return np.clip(out, 0.0, 1.0)

    @classmethod
    def from_network(cls, network: GazeNetwork, **kwargs) -> "GazeRegressor":
        """Wrap an existing (e.g. loaded) network as a fitted regressor."""
        est = cls(profile=network.config.profile,
                  output_space=network.config.output_space.value, **kwargs)
        est.network_ = network
        est.loss_curve_ = []
        est.val_loss_curve_ = None
        return est


class FramePreprocessor(BaseEstimator, TransformerMixin):
    """Transforms Frames into InputBundles for a given profile."""

    def __init__(self, profile: str = "tiny", mean_value: float = 0.5,
                 means: MeanImages | None = None, landmark_config=None):
        self.profile = profile
        self.mean_value = mean_value
        self.means = means
        self.landmark_config = landmark_config

    def fit(self, X=None, y=None):
        self.config_ = ModelConfig.for_profile(self.profile)
        self.means_ = self.means or MeanImages.constant(self.config_, self.mean_value)
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        lc = self.landmark_config or DEFAULT_LANDMARKS
        return [make_bundle(frame, self.means_, self.config_, lc) for frame in X]


class OneEuroSmoother(BaseEstimator, TransformerMixin):
    """Batch wrapper over the One-Euro filter for (t_ms, x, y) series."""

    def __init__(self, min_cutoff: float = 1.0, beta: float = 0.007,
                 d_cutoff: float = 1.0):
        self.min_cutoff = min_cutoff
        self.beta = beta
        self.d_cutoff = d_cutoff

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != 3:
            raise ValueError("expected an (N, 3) array of (t_ms, x, y)")
        t, x, y, _ = check_series_arrays(X[:, 0], X[:, 1], X[:, 2])
        filt = OneEuroFilter(self.min_cutoff, self.beta, self.d_cutoff)
        out = X.copy()
        for i in range(len(t)):
            res = filt.update(float(t[i]), float(x[i]), float(y[i]))
            if res is not None:
                out[i, 1], out[i, 2] = res
        return out
