import numpy as np
import pytest

from gazekit.geometry import (GazePoint, ScreenGeometry, Space, SpaceMismatchError,
                              cm_to_px, norm_to_px, px_to_cm, px_to_norm, to_screen_px)

SCREEN = ScreenGeometry(1920, 1080)


def cm(x, y):
    return GazePoint(x, y, Space.CAMERA_CM)


def px(x, y):
    return GazePoint(x, y, Space.SCREEN_PX)


def norm(x, y):
    return GazePoint(x, y, Space.NORMALIZED)


class TestCmPx:
    def test_center_fixed_point(self):
        p = cm_to_px(cm(0.0, 0.0), SCREEN)
        assert (p.x, p.y) == (960.0, 540.0)
        assert p.space == Space.SCREEN_PX

    def test_extremes(self):
        assert (cm_to_px(cm(25, 25), SCREEN).x, cm_to_px(cm(25, 25), SCREEN).y) == (1920.0, 0.0)
        assert (cm_to_px(cm(-25, -25), SCREEN).x, cm_to_px(cm(-25, -25), SCREEN).y) == (0.0, 1080.0)

    def test_inverse_values(self):
        p = px_to_cm(px(960, 540), SCREEN)
        assert (p.x, p.y) == (0.0, 0.0)
        p = px_to_cm(px(0, 0), SCREEN)
        assert (p.x, p.y) == (-25.0, 25.0)

    def test_round_trip(self, rng):
        for _ in range(100):
            x, y = rng.uniform(-25, 25, size=2)
            q = px_to_cm(cm_to_px(cm(x, y), SCREEN), SCREEN)
            assert q.x == pytest.approx(x, abs=1e-5)
            assert q.y == pytest.approx(y, abs=1e-5)

    def test_monotonic_and_vertical_flip(self):
        xs = [cm_to_px(cm(v, 0), SCREEN).x for v in (-10, 0, 10)]
        assert xs == sorted(xs)
        ys = [cm_to_px(cm(0, v), SCREEN).y for v in (-10, 0, 10)]
        assert ys == sorted(ys, reverse=True)


class TestNormPx:
    def test_half(self):
        screen = ScreenGeometry(1280, 800)
        p = norm_to_px(norm(0.5, 0.5), screen)
        assert (p.x, p.y) == (640.0, 400.0)

    def test_corners(self):
        p = norm_to_px(norm(1.0, 1.0), SCREEN)
        assert (p.x, p.y) == (1920.0, 1080.0)

    def test_round_trip(self, rng):
        for _ in range(100):
            x, y = rng.uniform(0, 1, size=2)
            q = px_to_norm(norm_to_px(norm(x, y), SCREEN), SCREEN)
            assert q.x == pytest.approx(x, abs=1e-6)
            assert q.y == pytest.approx(y, abs=1e-6)


class TestSpaceTags:
    def test_wrong_space_rejected(self):
        with pytest.raises(SpaceMismatchError):
            cm_to_px(px(10, 10), SCREEN)
        with pytest.raises(SpaceMismatchError):
            px_to_cm(cm(0, 0), SCREEN)
        with pytest.raises(SpaceMismatchError):
            norm_to_px(px(1, 1), SCREEN)
        with pytest.raises(SpaceMismatchError):
            px_to_norm(norm(0.5, 0.5), SCREEN)

    def test_to_screen_px_dispatch(self):
        assert to_screen_px(cm(0, 0), SCREEN).x == 960.0
        assert to_screen_px(norm(0.25, 0.5), SCREEN).x == 480.0
        p = px(5, 6)
        assert to_screen_px(p, SCREEN) is p

    def test_metadata_preserved(self):
        p = GazePoint(0.0, 0.0, Space.CAMERA_CM, timestamp_ms=123, valid=True)
        q = cm_to_px(p, SCREEN)
        assert q.timestamp_ms == 123 and q.valid


class TestClamping:
    def test_overshoot_converted_then_clamped(self):
        p = cm_to_px(cm(30.0, -30.0), SCREEN)  # outside the cm range
        assert 0 <= p.x <= SCREEN.width_px
        assert 0 <= p.y <= SCREEN.height_px
        assert p.x == SCREEN.width_px  # 30cm maps past the right edge

    def test_screen_validation(self):
        with pytest.raises(ValueError):
            ScreenGeometry(0, 100)
        with pytest.raises(ValueError):
            ScreenGeometry(100, -5)
