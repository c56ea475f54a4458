"""Frame + landmarks to network input: crops, resize, mean subtraction, face grid.

Landmark detection itself is external (browser client or a pluggable
provider); this module starts from the 478-point mesh.
"""

from __future__ import annotations

import base64
import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .model import GRID_SIZE, InputBundle, ModelConfig
from .weights import load_tensors, save_tensors

LANDMARK_COUNT = 478

# Canonical face-mesh contour index sets. "Left eye" follows the common usage
# in tracker codebases: the 33/133 corner group.
LEFT_EYE_INDICES = (33, 7, 163, 144, 145, 153, 154, 155, 133,
                    173, 157, 158, 159, 160, 161, 246)
RIGHT_EYE_INDICES = (263, 249, 390, 373, 374, 380, 381, 382, 362,
                     398, 384, 385, 386, 387, 388, 466)
FACE_OVAL_INDICES = (10, 338, 297, 332, 284, 251, 389, 356, 454, 323, 361, 288,
                     397, 365, 379, 378, 400, 377, 152, 148, 176, 149, 150, 136,
                     172, 58, 132, 93, 234, 127, 162, 21, 54, 103, 67, 109)


class FaceNotFoundError(ValueError):
    """Frame has no landmarks to work from."""


class DegenerateBBoxError(ValueError):
    """A landmark hull collapsed to zero area."""


@dataclass
class Frame:
    """One RGB frame; pixel values 0-255 stored as f32, channels-first."""

    width: int
    height: int
    rgb: np.ndarray
    landmarks: np.ndarray | None = None  # (478, 2) in [0,1], detector overshoot allowed

    def __post_init__(self):
        if self.rgb.shape != (3, self.height, self.width):
            raise ValueError(f"rgb shape {self.rgb.shape} != (3, {self.height}, {self.width})")
        if self.landmarks is not None:
            self.landmarks = np.asarray(self.landmarks, dtype=np.float32)
            if self.landmarks.shape != (LANDMARK_COUNT, 2):
                raise ValueError(
                    f"expected {LANDMARK_COUNT} landmarks, got {self.landmarks.shape}")


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in pixel coordinates, x1/y1 exclusive. Area > 0."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise DegenerateBBoxError(f"degenerate bbox {self}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    def expand(self, pad_fraction: float) -> "BBox":
        """Grow by pad_fraction of the size on each side (w,h scale by 1+2p)."""
        dx = self.width * pad_fraction
        dy = self.height * pad_fraction
        return BBox(self.x0 - dx, self.y0 - dy, self.x1 + dx, self.y1 + dy)

    def clamp(self, width: int, height: int) -> "BBox":
        return BBox(max(0.0, self.x0), max(0.0, self.y0),
                    min(float(width), self.x1), min(float(height), self.y1))


@dataclass(frozen=True)
class LandmarkConfig:
    left_eye: tuple = LEFT_EYE_INDICES
    right_eye: tuple = RIGHT_EYE_INDICES
    face: tuple = FACE_OVAL_INDICES
    eye_padding: float = 0.25
    face_padding: float = 0.10


DEFAULT_LANDMARKS = LandmarkConfig()


def _hull_bbox(frame: Frame, indices, pad: float) -> BBox:
    pts = frame.landmarks[list(indices)]
    xs = pts[:, 0] * frame.width
    ys = pts[:, 1] * frame.height
    hull = BBox(float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max()))
    return hull.expand(pad).clamp(frame.width, frame.height)


def extract_bboxes(frame: Frame, config: LandmarkConfig = DEFAULT_LANDMARKS) -> dict[str, BBox]:
    if frame.landmarks is None:
        raise FaceNotFoundError("frame has no landmarks")
    return {
        "left_eye": _hull_bbox(frame, config.left_eye, config.eye_padding),
        "right_eye": _hull_bbox(frame, config.right_eye, config.eye_padding),
        "face": _hull_bbox(frame, config.face, config.face_padding),
    }


def crop_resize(frame: Frame, bbox: BBox, target_h: int, target_w: int) -> np.ndarray:
    """Bilinear crop+resize; output (3, target_h, target_w) in [0, 255]."""
    sx = bbox.width / target_w
    sy = bbox.height / target_h
    xs = bbox.x0 + (np.arange(target_w, dtype=np.float64) + 0.5) * sx - 0.5
    ys = bbox.y0 + (np.arange(target_h, dtype=np.float64) + 0.5) * sy - 0.5
    xs = np.clip(xs, 0.0, frame.width - 1.0)
    ys = np.clip(ys, 0.0, frame.height - 1.0)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, frame.width - 1)
    y1 = np.minimum(y0 + 1, frame.height - 1)
    fx = (xs - x0).astype(np.float32)
    fy = (ys - y0).astype(np.float32)

    img = frame.rgb
    top = img[:, y0][:, :, x0] * (1 - fx) + img[:, y0][:, :, x1] * fx
    bot = img[:, y1][:, :, x0] * (1 - fx) + img[:, y1][:, :, x1] * fx
    out = top * (1 - fy)[None, :, None] + bot * fy[None, :, None]
    return out.astype(np.float32)


def normalize_and_center(crop: np.ndarray, mean: np.ndarray) -> np.ndarray:
    """Scale to [0,1] then subtract the branch mean image."""
    if crop.shape != mean.shape:
        raise ValueError(f"crop shape {crop.shape} != mean shape {mean.shape}")
    return (crop.astype(np.float32) / 255.0) - mean.astype(np.float32)


def face_grid(face_bbox: BBox, frame_w: int, frame_h: int, n: int = GRID_SIZE) -> np.ndarray:
    """Binary n x n mask: cell is 1 iff its center lies inside the face bbox."""
    cx = (np.arange(n) + 0.5) / n * frame_w
    cy = (np.arange(n) + 0.5) / n * frame_h
    in_x = (cx >= face_bbox.x0) & (cx < face_bbox.x1)
    in_y = (cy >= face_bbox.y0) & (cy < face_bbox.y1)
    grid = (in_y[:, None] & in_x[None, :]).astype(np.float32)
    if not grid.any():
        # tiny bbox between cell centers: mark the cell holding the bbox center
        j = min(n - 1, max(0, int((face_bbox.x0 + face_bbox.x1) / 2 / frame_w * n)))
        i = min(n - 1, max(0, int((face_bbox.y0 + face_bbox.y1) / 2 / frame_h * n)))
        grid[i, j] = 1.0
    return grid


@dataclass
class MeanImages:
    """Branch-specific mean images in [0,1], matching the profile input sizes."""

    face: np.ndarray
    left_eye: np.ndarray
    right_eye: np.ndarray

    def validate(self, config: ModelConfig):
        eh, ew = config.eye_size
        fh, fw = config.face_size
        for name, arr, shape in (("face", self.face, (3, fh, fw)),
                                 ("left_eye", self.left_eye, (3, eh, ew)),
                                 ("right_eye", self.right_eye, (3, eh, ew))):
            if arr.shape != shape:
                raise ValueError(f"mean {name}: shape {arr.shape}, expected {shape}")

    @classmethod
    def constant(cls, config: ModelConfig, value: float = 0.5) -> "MeanImages":
        eh, ew = config.eye_size
        fh, fw = config.face_size
        return cls(face=np.full((3, fh, fw), value, dtype=np.float32),
                   left_eye=np.full((3, eh, ew), value, dtype=np.float32),
                   right_eye=np.full((3, eh, ew), value, dtype=np.float32))

    def save(self, config: ModelConfig, destination=None) -> bytes:
        tensors = {"mean.face": self.face, "mean.left_eye": self.left_eye,
                   "mean.right_eye": self.right_eye}
        return save_tensors(tensors, "means-" + config.fingerprint(), destination)

    @classmethod
    def load(cls, data, config: ModelConfig) -> "MeanImages":
        eh, ew = config.eye_size
        fh, fw = config.face_size
        shapes = {"mean.face": (3, fh, fw), "mean.left_eye": (3, eh, ew),
                  "mean.right_eye": (3, eh, ew)}
        tensors = load_tensors(data, expected_fingerprint="means-" + config.fingerprint(),
                               expected_shapes=shapes)
        return cls(face=tensors["mean.face"], left_eye=tensors["mean.left_eye"],
                   right_eye=tensors["mean.right_eye"])


def make_bundle(frame: Frame, means: MeanImages, config: ModelConfig,
                landmark_config: LandmarkConfig = DEFAULT_LANDMARKS) -> InputBundle:
    """Full preprocessing pipeline: bboxes -> crops -> normalize -> grid."""
    means.validate(config)
    boxes = extract_bboxes(frame, landmark_config)
    eh, ew = config.eye_size
    fh, fw = config.face_size
    left = crop_resize(frame, boxes["left_eye"], eh, ew)
    right = crop_resize(frame, boxes["right_eye"], eh, ew)
    face = crop_resize(frame, boxes["face"], fh, fw)
    return InputBundle(
        left_eye=normalize_and_center(left, means.left_eye),
        right_eye=normalize_and_center(right, means.right_eye),
        face=normalize_and_center(face, means.face),
        face_grid=face_grid(boxes["face"], frame.width, frame.height, config.grid_size),
    )


# ---------------------------------------------------------------------------
# wire format helpers (shared with the server and fixtures)

def frame_from_b64(b64_image: str, landmarks_flat=None) -> Frame:
    """Decode a base64 PNG/JPEG plus an optional flat 956-float landmark array."""
    raw = base64.b64decode(b64_image)
    img = Image.open(io.BytesIO(raw)).convert("RGB")
    rgb = np.asarray(img, dtype=np.float32).transpose(2, 0, 1)
    lm = None
    if landmarks_flat is not None:
        lm = np.asarray(landmarks_flat, dtype=np.float32)
        if lm.size != LANDMARK_COUNT * 2:
            raise ValueError(f"expected {LANDMARK_COUNT * 2} landmark floats, got {lm.size}")
        lm = lm.reshape(LANDMARK_COUNT, 2)
    return Frame(width=img.width, height=img.height, rgb=rgb, landmarks=lm)


def frame_to_b64_png(frame: Frame) -> str:
    img = Image.fromarray(frame.rgb.transpose(1, 2, 0).astype(np.uint8), mode="RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")
