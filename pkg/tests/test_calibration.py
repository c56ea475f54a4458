import numpy as np
import pytest

from gazekit.calibration import (CalibrationAborted, CalibrationError, assemble,
                                 default_targets, fine_tune)
from gazekit.geometry import ScreenGeometry, Space
from gazekit.model import GazeNetwork, ModelConfig
from gazekit.preprocess import Frame, MeanImages

from .conftest import synthetic_frame_for_target

SCREEN = ScreenGeometry(1280, 800)


@pytest.fixture(scope="module")
def calib_pairs():
    rng = np.random.default_rng(5)
    pairs = []
    for t in default_targets(SCREEN):
        face_xy = (int(rng.integers(20, 61)), int(rng.integers(10, 31)))
        pairs.append((synthetic_frame_for_target(t, SCREEN, rng, face_xy), t))
    return pairs


def _faceless():
    return Frame(width=160, height=120,
                 rgb=np.zeros((3, 120, 160), dtype=np.float32), landmarks=None)


class TestTargets:
    def test_thirteen_distinct_in_bounds(self):
        targets = default_targets(SCREEN)
        assert len(targets) == 13
        assert len(set(targets)) == 13
        for x, y in targets:
            assert 0 <= x <= SCREEN.width_px and 0 <= y <= SCREEN.height_px


class TestAssemble:
    def test_thirteen_valid_camera_cm_targets(self, calib_pairs, tiny_means, tiny_config):
        samples = assemble(calib_pairs, SCREEN, Space.CAMERA_CM, tiny_means, tiny_config)
        assert len(samples) == 13
        assert all(s.valid for s in samples)
        for s in samples:
            assert -25 <= s.target_model[0] <= 25
            assert -25 <= s.target_model[1] <= 25

    def test_center_maps_to_origin_cm(self, tiny_means, tiny_config, rng):
        center = (SCREEN.width_px / 2, SCREEN.height_px / 2)
        frame = synthetic_frame_for_target(center, SCREEN, rng)
        sample = assemble([(frame, center)] * 4, SCREEN, Space.CAMERA_CM,
                          tiny_means, tiny_config)[0]
        np.testing.assert_allclose(sample.target_model, [0.0, 0.0], atol=1e-6)

    def test_majority_faceless_aborts(self, calib_pairs, tiny_means, tiny_config):
        pairs = list(calib_pairs)
        for i in range(7):
            pairs[i] = (_faceless(), pairs[i][1])
        with pytest.raises(CalibrationAborted):
            assemble(pairs, SCREEN, Space.NORMALIZED, tiny_means, tiny_config)

    def test_minority_faceless_flagged(self, calib_pairs, tiny_means, tiny_config):
        pairs = list(calib_pairs)
        for i in range(6):
            pairs[i] = (_faceless(), pairs[i][1])
        samples = assemble(pairs, SCREEN, Space.NORMALIZED, tiny_means, tiny_config)
        assert sum(not s.valid for s in samples) == 6

    def test_too_few_samples(self, calib_pairs, tiny_means, tiny_config):
        with pytest.raises(CalibrationError):
            assemble(calib_pairs[:3], SCREEN, Space.NORMALIZED, tiny_means, tiny_config)

    def test_target_outside_screen(self, calib_pairs, tiny_means, tiny_config):
        pairs = list(calib_pairs)
        pairs[0] = (pairs[0][0], (SCREEN.width_px + 10, 5))
        with pytest.raises(CalibrationError, match="outside"):
            assemble(pairs, SCREEN, Space.NORMALIZED, tiny_means, tiny_config)


class TestFineTune:
    def test_substantial_error_reduction(self, calib_pairs, tiny_means, tiny_config):
        samples = assemble(calib_pairs, SCREEN, Space.NORMALIZED, tiny_means, tiny_config)
        net = GazeNetwork(tiny_config, seed=0)
        _, report = fine_tune(net, samples, SCREEN)  # lr=1e-4, 100 epochs
        assert report.n_samples == 13
        assert report.steps == 100
        assert len(report.per_target_residuals_px) == 13
        assert report.mean_l2_px_after < 0.5 * report.mean_l2_px_before

    def test_zero_lr_changes_nothing(self, calib_pairs, tiny_means, tiny_config):
        samples = assemble(calib_pairs, SCREEN, Space.NORMALIZED, tiny_means, tiny_config)
        net = GazeNetwork(tiny_config, seed=1)
        before_state = net.state_bytes()
        _, report = fine_tune(net, samples, SCREEN, lr=0.0, epochs=10)
        assert net.state_bytes() == before_state
        assert report.mean_l2_px_after == pytest.approx(report.mean_l2_px_before)

    def test_single_repeated_sample_converges_monotonically(self, tiny_means, tiny_config, rng):
        target = (0.3 * SCREEN.width_px, 0.6 * SCREEN.height_px)
        frame = synthetic_frame_for_target(target, SCREEN, rng)
        samples = assemble([(frame, target)] * 4, SCREEN, Space.NORMALIZED,
                           tiny_means, tiny_config)
        net = GazeNetwork(tiny_config, seed=1)
        _, report = fine_tune(net, samples, SCREEN, epochs=120)
        c = report.loss_curve
        # mean loss per 30-epoch block decreases strictly toward zero
        blocks = [float(np.mean(c[i:i + 30])) for i in range(0, 120, 30)]
        assert all(b2 < b1 for b1, b2 in zip(blocks, blocks[1:]))
        assert c[-1] < c[0] / 1000

    @pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
    @pytest.mark.filterwarnings("ignore:invalid value:RuntimeWarning")
    def test_abort_restores_weights_bit_exactly(self, calib_pairs, tiny_means, tiny_config):
        samples = assemble(calib_pairs, SCREEN, Space.NORMALIZED, tiny_means, tiny_config)
        net = GazeNetwork(tiny_config, seed=2)
        before_state = net.state_bytes()
        with pytest.raises(CalibrationAborted):
            fine_tune(net, samples, SCREEN, lr=1e9, epochs=50)  # diverges to non-finite
        assert net.state_bytes() == before_state

    def test_time_budget_stops_after_epoch_boundary(self, calib_pairs, tiny_means, tiny_config):
        samples = assemble(calib_pairs, SCREEN, Space.NORMALIZED, tiny_means, tiny_config)
        net = GazeNetwork(tiny_config, seed=5)
        _, report = fine_tune(net, samples, SCREEN, epochs=100, max_seconds=1e-9)
        assert report.steps == 1  # budget crossed after the first full-batch epoch
        assert len(report.loss_curve) == 1

    def test_before_error_matches_untouched_model(self, calib_pairs, tiny_means, tiny_config):
        samples = assemble(calib_pairs, SCREEN, Space.NORMALIZED, tiny_means, tiny_config)
        base = GazeNetwork(tiny_config, seed=3)
        reference = base.clone()
        _, report = fine_tune(base, samples, SCREEN, epochs=5)

        from gazekit.calibration import _mean_px_error
        independent = float(np.mean(_mean_px_error(reference, samples, SCREEN)))
        assert report.mean_l2_px_before == pytest.approx(independent, abs=1e-9)

    def test_sessions_do_not_mutate_shared_base(self, calib_pairs, tiny_means, tiny_config):
        base = GazeNetwork(tiny_config, seed=4)
        base_state = base.state_bytes()
        samples = assemble(calib_pairs, SCREEN, Space.NORMALIZED, tiny_means, tiny_config)
        s1 = base.clone()
        s2 = base.clone()
        fine_tune(s1, samples, SCREEN, epochs=5)
        fine_tune(s2, samples[:8] + samples[9:], SCREEN, epochs=5)
        assert base.state_bytes() == base_state
        assert s1.state_bytes() != base_state
        assert s1.state_bytes() != s2.state_bytes()
