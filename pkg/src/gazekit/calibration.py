"""13-target user calibration: assemble the mini-dataset, fine-tune the
session model with Adam (1e-4) + Euclidean loss, report before/after error.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import GazePoint, ScreenGeometry, Space, px_to_cm, px_to_norm, to_screen_px
from .model import GazeNetwork, InputBundle, stack_bundles
from .nn import Adam, euclidean_loss
from .preprocess import (DEFAULT_LANDMARKS, DegenerateBBoxError, FaceNotFoundError,
                         Frame, MeanImages, make_bundle)

DEFAULT_EPOCHS = 100
DEFAULT_LR = 1e-4
MIN_SAMPLES = 4


class CalibrationError(ValueError):
    pass


class CalibrationAborted(CalibrationError):
    """Too many invalid samples or a diverging loss; weights were restored."""


def default_targets(screen: ScreenGeometry) -> list[tuple[float, float]]:
    """13 screen targets: a 3x3 grid at 10/50/90% plus four at 30/70%."""
    pts = []
    for fy in (0.1, 0.5, 0.9):
        for fx in (0.1, 0.5, 0.9):
            pts.append((fx * screen.width_px, fy * screen.height_px))
    for fy in (0.3, 0.7):
        for fx in (0.3, 0.7):
            pts.append((fx * screen.width_px, fy * screen.height_px))
    return pts


@dataclass
class CalibrationSample:
    frame: Frame
    target_px: tuple[float, float]
    bundle: InputBundle | None = None
    target_model: np.ndarray | None = None  # in the model's output space
    valid: bool = True


@dataclass
class CalibrationReport:
    n_samples: int
    n_invalid: int
    mean_l2_px_before: float
    mean_l2_px_after: float
    per_target_residuals_px: list[float] = field(default_factory=list)
    steps: int = 0
    wall_time_ms: float = 0.0
    loss_curve: list[float] = field(default_factory=list)  # per-epoch mean loss

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "n_invalid": self.n_invalid,
            "mean_l2_px_before": self.mean_l2_px_before,
            "mean_l2_px_after": self.mean_l2_px_after,
            "per_target_residuals_px": self.per_target_residuals_px,
            "steps": self.steps,
            "wall_time_ms": self.wall_time_ms,
            "loss_curve": self.loss_curve,
        }


def _map_target(target_px, screen: ScreenGeometry, space: Space) -> np.ndarray:
    p = GazePoint(float(target_px[0]), float(target_px[1]), Space.SCREEN_PX)
    if space == Space.CAMERA_CM:
        q = px_to_cm(p, screen)
    elif space == Space.NORMALIZED:
        q = px_to_norm(p, screen)
    else:
        raise CalibrationError(f"unsupported model output space {space}")
    return np.array([q.x, q.y], dtype=np.float32)


def assemble(samples, screen: ScreenGeometry, output_space: Space,
             means: MeanImages, config, landmark_config=DEFAULT_LANDMARKS
             ) -> list[CalibrationSample]:
    """Build CalibrationSamples from (frame, target_px) pairs.

    Faceless frames are flagged invalid; more than 50% invalid aborts.
    """
    items = list(samples)
    if len(items) < MIN_SAMPLES:
        raise CalibrationError(f"need at least {MIN_SAMPLES} samples, got {len(items)}")
    out = []
    n_invalid = 0
    for frame, target_px in items:
        x, y = float(target_px[0]), float(target_px[1])
        if not (0 <= x <= screen.width_px and 0 <= y <= screen.height_px):
            raise CalibrationError(f"target ({x}, {y}) outside the screen")
        sample = CalibrationSample(frame=frame, target_px=(x, y))
        try:
            sample.bundle = make_bundle(frame, means, config, landmark_config)
            sample.target_model = _map_target((x, y), screen, output_space)
        except (FaceNotFoundError, DegenerateBBoxError):
            sample.valid = False
            n_invalid += 1
        out.append(sample)
    if n_invalid * 2 > len(items):
        raise CalibrationAborted(
            f"{n_invalid} of {len(items)} calibration frames had no usable face")
    return out


def _mean_px_error(network: GazeNetwork, samples, screen: ScreenGeometry):
    errors = []
    for s in samples:
        p = to_screen_px(network.predict(s.bundle), screen)
        errors.append(float(np.hypot(p.x - s.target_px[0], p.y - s.target_px[1])))
    return errors


def fine_tune(network: GazeNetwork, samples, screen: ScreenGeometry,
              lr: float = DEFAULT_LR, epochs: int = DEFAULT_EPOCHS,
              batch_size: int | None = None,
              max_seconds: float | None = None) -> tuple[GazeNetwork, CalibrationReport]:
    """Fine-tune all parameters on the calibration samples, in place.

    Full-batch by default (no ordering nondeterminism at n=13). On a
    non-finite loss the pre-call weights are restored bit-exactly.
    ``max_seconds`` stops after the epoch that crosses the budget (guards
    synchronous full-profile calibration requests); completed epochs are kept.
    """
    valid = [s for s in samples if s.valid]
    if len(valid) < MIN_SAMPLES:
        raise CalibrationError(f"need at least {MIN_SAMPLES} valid samples, got {len(valid)}")

    snapshot = {name: (p.w.copy(), p.b.copy()) for name, p in network.params.items()}
    t0 = time.perf_counter()
    before = _mean_px_error(network, valid, screen)

    targets = np.stack([s.target_model for s in valid])
    left, right, face, grid = stack_bundles([s.bundle for s in valid], network.config)
    opt = Adam(network.params, lr=lr)
    n = len(valid)
    bs = n if batch_size is None else min(batch_size, n)
    steps = 0
    loss_curve = []
    try:
        for _ in range(epochs):
            epoch_loss = 0.0
            batches = 0
            for start in range(0, n, bs):
                sl = slice(start, start + bs)
                out, ctx = network.forward(left[sl], right[sl], face[sl], grid[sl])
                value, grad = euclidean_loss(out, targets[sl])
                if not np.isfinite(value):
                    raise FloatingPointError("non-finite calibration loss")
                network.zero_grad()
                network.backward(ctx, grad)
                opt.step()
                steps += 1
                epoch_loss += value
                batches += 1
            loss_curve.append(epoch_loss / batches)
            if max_seconds is not None and time.perf_counter() - t0 > max_seconds:
                break
    except FloatingPointError as exc:
        for name, p in network.params.items():
            p.w[...] = snapshot[name][0]
            p.b[...] = snapshot[name][1]
        raise CalibrationAborted(str(exc)) from exc

    after = _mean_px_error(network, valid, screen)
    report = CalibrationReport(
        n_samples=len(valid),
        n_invalid=len(samples) - len(valid),
        mean_l2_px_before=float(np.mean(before)),
        mean_l2_px_after=float(np.mean(after)),
        per_target_residuals_px=[round(e, 4) for e in after],
        steps=steps,
        wall_time_ms=(time.perf_counter() - t0) * 1000.0,
        loss_curve=loss_curve,
    )
    return network, report
