"""Coordinate spaces and the conversions between them.

Every gaze point carries its space tag so cross-space arithmetic fails loudly
instead of silently. Conversions clamp their output to the target space's
range (raw network outputs legitimately overshoot).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

CM_HALF_SPAN = 25.0  # camera-centred prediction space is [-25, 25]^2 cm


class Space(str, Enum):
    CAMERA_CM = "camera_cm"
    NORMALIZED = "normalized"
    SCREEN_PX = "screen_px"


class SpaceMismatchError(ValueError):
    """A conversion was handed a point in the wrong space."""


@dataclass(frozen=True)
class ScreenGeometry:
    width_px: int
    height_px: int

    def __post_init__(self):
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError(f"screen dimensions must be positive, got "
                             f"{self.width_px}x{self.height_px}")

    @property
    def diagonal_px(self) -> float:
        return float((self.width_px ** 2 + self.height_px ** 2) ** 0.5)


@dataclass(frozen=True)
class GazePoint:
    x: float
    y: float
    space: Space
    timestamp_ms: int | None = None
    valid: bool = True

    def with_xy(self, x: float, y: float, space: Space | None = None) -> "GazePoint":
        return replace(self, x=x, y=y, space=space or self.space)


def _require(p: GazePoint, space: Space):
    if p.space != space:
        raise SpaceMismatchError(f"expected a point in {space.value}, got {p.space.value}")


def _clamp(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


def clamp_to_space(x: float, y: float, space: Space,
                   screen: ScreenGeometry | None = None) -> tuple[float, float]:
    """Clamp raw coordinates to their space's range invariant."""
    if space == Space.CAMERA_CM:
        return _clamp(x, -CM_HALF_SPAN, CM_HALF_SPAN), _clamp(y, -CM_HALF_SPAN, CM_HALF_SPAN)
    if space == Space.NORMALIZED:
        return _clamp(x, 0.0, 1.0), _clamp(y, 0.0, 1.0)
    if screen is None:
        raise ValueError("screen geometry required to clamp pixel coordinates")
    return _clamp(x, 0.0, screen.width_px), _clamp(y, 0.0, screen.height_px)


def cm_to_px(p: GazePoint, screen: ScreenGeometry) -> GazePoint:
    """Camera-cm to screen pixels; the vertical axis flips."""
    _require(p, Space.CAMERA_CM)
    x = (CM_HALF_SPAN + p.x) / (2 * CM_HALF_SPAN) * screen.width_px
    y = (CM_HALF_SPAN - p.y) / (2 * CM_HALF_SPAN) * screen.height_px
    x, y = clamp_to_space(x, y, Space.SCREEN_PX, screen)
    return p.with_xy(x, y, Space.SCREEN_PX)


def px_to_cm(p: GazePoint, screen: ScreenGeometry) -> GazePoint:
    """Exact algebraic inverse of cm_to_px."""
    _require(p, Space.SCREEN_PX)
    x = 2 * CM_HALF_SPAN * p.x / screen.width_px - CM_HALF_SPAN
    y = CM_HALF_SPAN - 2 * CM_HALF_SPAN * p.y / screen.height_px
    x, y = clamp_to_space(x, y, Space.CAMERA_CM)
    return p.with_xy(x, y, Space.CAMERA_CM)


def norm_to_px(p: GazePoint, screen: ScreenGeometry) -> GazePoint:
    _require(p, Space.NORMALIZED)
    x, y = clamp_to_space(p.x * screen.width_px, p.y * screen.height_px,
                          Space.SCREEN_PX, screen)
    return p.with_xy(x, y, Space.SCREEN_PX)


def px_to_norm(p: GazePoint, screen: ScreenGeometry) -> GazePoint:
    _require(p, Space.SCREEN_PX)
    x, y = clamp_to_space(p.x / screen.width_px, p.y / screen.height_px, Space.NORMALIZED)
    return p.with_xy(x, y, Space.NORMALIZED)


def to_screen_px(p: GazePoint, screen: ScreenGeometry) -> GazePoint:
    """Convert from whichever model output space a point is in to pixels."""
    if p.space == Space.SCREEN_PX:
        return p
    if p.space == Space.CAMERA_CM:
        return cm_to_px(p, screen)
    return norm_to_px(p, screen)
