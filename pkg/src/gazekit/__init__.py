"""gazekit: webcam gaze estimation with user calibration and task analysis.

The estimator layer (GazeRegressor, FramePreprocessor, OneEuroSmoother)
follows the scikit-learn fit/transform/predict conventions; the modules
underneath expose the full pipeline (network, geometry, preprocessing,
calibration, metrics, dot-probe task, HTTP server).
"""

from .estimator import FramePreprocessor, GazeRegressor, OneEuroSmoother
from .geometry import GazePoint, ScreenGeometry, Space
from .model import GazeNetwork, InputBundle, ModelConfig
from .preprocess import Frame, MeanImages
from .smoothing import OneEuroFilter

__version__ = "0.1.0"

__all__ = [
    "Frame",
    "FramePreprocessor",
    "GazeNetwork",
    "GazePoint",
    "GazeRegressor",
    "InputBundle",
    "MeanImages",
    "ModelConfig",
    "OneEuroFilter",
    "OneEuroSmoother",
    "ScreenGeometry",
    "Space",
    "__version__",
]
