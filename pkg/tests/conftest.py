import numpy as np
import pytest
from hypothesis import settings

from gazekit.dataset import generate_synthetic, load_dataset, render_synthetic_frame, synthetic_landmarks
from gazekit.model import InputBundle, ModelConfig
from gazekit.preprocess import Frame, MeanImages

settings.register_profile("ci", derandomize=True, deadline=None)
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_config():
    return ModelConfig.tiny()


@pytest.fixture(scope="session")
def tiny_means(tiny_config):
    return MeanImages.constant(tiny_config)


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    generate_synthetic(root, n_subjects=3, samples_per=12, seed=11)
    return root


@pytest.fixture(scope="session")
def synth_records(synth_root):
    return load_dataset(synth_root)


def random_bundle(config, rng) -> InputBundle:
    eh, ew = config.eye_size
    fh, fw = config.face_size
    g = config.grid_size
    return InputBundle(
        left_eye=rng.normal(scale=0.4, size=(3, eh, ew)).astype(np.float32),
        right_eye=rng.normal(scale=0.4, size=(3, eh, ew)).astype(np.float32),
        face=rng.normal(scale=0.4, size=(3, fh, fw)).astype(np.float32),
        face_grid=(rng.random((g, g)) < 0.3).astype(np.float32),
    )


def synthetic_frame_for_target(target_px, screen, rng, face_xy=(40, 20)) -> Frame:
    """Render a synthetic face frame whose blobs encode the given target."""
    gaze_norm = (target_px[0] / screen.width_px, target_px[1] / screen.height_px)
    rgb = render_synthetic_frame(face_xy, gaze_norm, rng)
    return Frame(width=rgb.shape[2], height=rgb.shape[1], rgb=rgb,
                 landmarks=synthetic_landmarks(rgb))
