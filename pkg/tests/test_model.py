import numpy as np
import pytest

from gazekit.geometry import Space
from gazekit.model import ConfigError, ConvSpec, GazeNetwork, ModelConfig
from gazekit.nn import Adam, ShapeError, euclidean_loss, smooth_l1_loss

from .conftest import random_bundle


def _table_param_count(config: ModelConfig) -> int:
    """Hand-sum the parameter table independently of the network code."""
    def conv_stack(specs, eye_or_face_size):
        total = 0
        ch = 3
        h, w = eye_or_face_size
        for spec in specs:
            total += spec.out_channels * ch * spec.kernel * spec.kernel + spec.out_channels
            h = (h + 2 * spec.pad - spec.kernel) // spec.stride + 1
            w = (w + 2 * spec.pad - spec.kernel) // spec.stride + 1
            if spec.pool_after:
                h, w = (h - 2) // 2 + 1, (w - 2) // 2 + 1
            ch = spec.out_channels
        return total, ch * h * w

    total, eye_flat = conv_stack(config.eye_convs, config.eye_size)
    face_total, face_flat = conv_stack(config.face_convs, config.face_size)
    total += face_total
    total += (2 * eye_flat) * 128 + 128                     # eye fc
    total += face_flat * 128 + 128 + 128 * 64 + 64          # face fc chain
    total += 625 * 256 + 256 + 256 * 128 + 128              # grid fc chain
    fused = 128 + 64 + 128
    total += fused * config.fusion_hidden + config.fusion_hidden
    total += config.fusion_hidden * 2 + 2
    return total


class TestBuild:
    def test_tiny_parameter_count_matches_hand_sum(self, tiny_config):
        net = GazeNetwork(tiny_config, seed=0)
        assert net.parameter_count() == _table_param_count(tiny_config)

    def test_full_profile_builds_with_2d_output(self, rng):
        config = ModelConfig.full()
        net = GazeNetwork(config, seed=0)
        out = net.predict_batch([random_bundle(config, rng)])
        assert out.shape == (1, 2)

    def test_inconsistent_layer_table_rejected(self):
        convs = (ConvSpec(8, 3, 1, 1),) * 4
        with pytest.raises(ConfigError):
            ModelConfig(profile="tiny", eye_size=(16, 16), face_size=(32, 32),
                        eye_convs=convs[:3], face_convs=convs + (ConvSpec(8, 3, 1, 1),))
        with pytest.raises(ConfigError):
            ModelConfig(profile="full", eye_size=(64, 64), face_size=(224, 224),
                        eye_convs=convs, face_convs=convs + (ConvSpec(8, 3, 1, 1),))

    def test_eye_weights_are_shared_storage(self, tiny_config, rng):
        net = GazeNetwork(tiny_config, seed=0)
        # exactly one eye conv stack in the ParamSet, no per-side duplicates
        eye_params = [n for n in net.params if n.startswith("eye.conv")]
        assert eye_params == ["eye.conv1", "eye.conv2", "eye.conv3", "eye.conv4"]
        # every eye conv layer runs twice per forward (left and right crop)
        calls = {}
        for layer in net.eye_stack:
            orig = layer.forward

            def counted(x, _layer=layer, _orig=orig):
                calls[_layer.name] = calls.get(_layer.name, 0) + 1
                return _orig(x)

            layer.forward = counted
        net.predict_batch([random_bundle(tiny_config, rng)])
        assert all(v == 2 for v in calls.values())

    def test_mutating_shared_weights_affects_both_eye_paths(self, tiny_config, rng):
        net = GazeNetwork(tiny_config, seed=0)
        bundle = random_bundle(tiny_config, rng)
        swapped = type(bundle)(left_eye=bundle.right_eye, right_eye=bundle.left_eye,
                               face=bundle.face, face_grid=bundle.face_grid)
        base = net.predict_batch([bundle])[0]
        base_swapped = net.predict_batch([swapped])[0]
        net.params["eye.conv1"].w[...] += 0.05
        assert not np.allclose(net.predict_batch([bundle])[0], base)
        assert not np.allclose(net.predict_batch([swapped])[0], base_swapped)

    def test_left_right_gradients_accumulate_into_shared_params(self, tiny_config, rng):
        net = GazeNetwork(tiny_config, seed=0)
        b = random_bundle(tiny_config, rng)
        from gazekit.model import stack_bundles
        left, right, face, grid = stack_bundles([b], tiny_config)
        out, ctx = net.forward(left, right, face, grid)
        net.zero_grad()
        net.backward(ctx, np.ones_like(out))
        assert np.abs(net.params["eye.conv1"].gw).sum() > 0


class TestPredict:
    def test_zero_network_passes_final_bias(self, rng):
        config = ModelConfig.tiny(Space.NORMALIZED)
        net = GazeNetwork(config, seed=0)
        for p in net.params.values():
            p.w[...] = 0.0
            p.b[...] = 0.0
        net.params["fusion.fc2"].b[...] = [0.3, 0.7]
        point = net.predict(random_bundle(config, rng))
        assert (point.x, point.y) == pytest.approx((0.3, 0.7), abs=1e-7)

    def test_output_clamped_to_space(self, rng):
        for space, bias, expected in [
            (Space.NORMALIZED, [2.0, -1.0], (1.0, 0.0)),
            (Space.CAMERA_CM, [40.0, -40.0], (25.0, -25.0)),
        ]:
            net = GazeNetwork(ModelConfig.tiny(space), seed=0)
            for p in net.params.values():
                p.w[...] = 0.0
                p.b[...] = 0.0
            net.params["fusion.fc2"].b[...] = bias
            point = net.predict(random_bundle(net.config, rng))
            assert (point.x, point.y) == pytest.approx(expected)
            assert point.space == space

    def test_swapping_eye_crops_changes_output(self, tiny_config, rng):
        net = GazeNetwork(tiny_config, seed=2)
        b = random_bundle(tiny_config, rng)
        swapped = type(b)(left_eye=b.right_eye, right_eye=b.left_eye,
                          face=b.face, face_grid=b.face_grid)
        assert not np.allclose(net.predict_batch([b]), net.predict_batch([swapped]))

    def test_prediction_is_deterministic(self, tiny_config, rng):
        net = GazeNetwork(tiny_config, seed=5)
        b = random_bundle(tiny_config, rng)
        a = net.predict_batch([b])
        c = net.predict_batch([b])
        assert a.tobytes() == c.tobytes()

    def test_shape_mismatch_rejected(self, tiny_config, rng):
        net = GazeNetwork(tiny_config, seed=0)
        bad = random_bundle(ModelConfig.full(), rng)
        with pytest.raises(ShapeError):
            net.predict(bad)

    def test_overfit_single_sample(self, tiny_config, rng):
        net = GazeNetwork(tiny_config, seed=1)
        b = random_bundle(tiny_config, rng)
        target = np.array([[0.35, 0.65]], dtype=np.float32)
        from gazekit.model import stack_bundles
        left, right, face, grid = stack_bundles([b], tiny_config)
        opt = Adam(net.params, lr=3e-3)
        for _ in range(200):
            out, ctx = net.forward(left, right, face, grid)
            _, grad = euclidean_loss(out, target)
            net.zero_grad()
            net.backward(ctx, grad)
            opt.step()
        final = net.predict_batch([b])[0]
        assert np.linalg.norm(final - target[0]) < 0.01
