"""Three-branch gaze regression network: eyes (shared weights), face, face grid.

Both eye crops route through one shared conv stack; the concatenated eye pair,
face, and grid embeddings feed a two-layer fusion head regressing 2D gaze in
the configured output space.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import GazePoint, Space, clamp_to_space
from .nn import Concat, Conv2D, Flatten, FullyConnected, MaxPool2D, Param, ReLU, ShapeError
from .weights import load_tensors, save_tensors

GRID_SIZE = 25


class ConfigError(ValueError):
    """Inconsistent model layer table."""


@dataclass(frozen=True)
class ConvSpec:
    out_channels: int
    kernel: int
    stride: int = 1
    pad: int = 0
    pool_after: bool = False


@dataclass(frozen=True)
class ModelConfig:
    profile: str
    eye_size: tuple[int, int]
    face_size: tuple[int, int]
    eye_convs: tuple[ConvSpec, ...]
    face_convs: tuple[ConvSpec, ...]
    output_space: Space = Space.NORMALIZED
    grid_size: int = GRID_SIZE
    eye_fc: int = 128
    face_fc: tuple[int, int] = (128, 64)
    grid_fc: tuple[int, int] = (256, 128)
    fusion_hidden: int = 128

    def __post_init__(self):
        if len(self.eye_convs) != 4:
            raise ConfigError(f"eye branch must have exactly 4 conv layers, got {len(self.eye_convs)}")
        if len(self.face_convs) != 5:
            raise ConfigError(f"face branch must have exactly 5 conv layers, got {len(self.face_convs)}")
        if self.eye_fc != 128:
            raise ConfigError(f"eye FC output must be 128, got {self.eye_fc}")
        if self.face_fc != (128, 64):
            raise ConfigError(f"face FC chain must be 128->64, got {self.face_fc}")
        if self.grid_fc != (256, 128):
            raise ConfigError(f"grid FC chain must be 256->128, got {self.grid_fc}")
        if self.profile == "full" and (self.eye_size != (112, 112) or self.face_size != (224, 224)):
            raise ConfigError("full profile requires 112x112 eyes and 224x224 face")

    @classmethod
    def tiny(cls, output_space: Space = Space.NORMALIZED) -> "ModelConfig":
        """Small configuration so gradient checks and overfit tests run in seconds."""
        convs = (
            ConvSpec(8, 3, 1, 1, pool_after=True),
            ConvSpec(8, 3, 1, 1, pool_after=True),
            ConvSpec(16, 3, 1, 1),
            ConvSpec(8, 3, 1, 1),
        )
        return cls(
            profile="tiny",
            eye_size=(16, 16),
            face_size=(32, 32),
            eye_convs=convs,
            face_convs=convs + (ConvSpec(8, 3, 1, 1),),
            output_space=output_space,
        )

    @classmethod
    def full(cls, output_space: Space = Space.CAMERA_CM) -> "ModelConfig":
        """Deployment-size configuration (iTracker-convention kernel table)."""
        convs = (
            ConvSpec(96, 11, 4, 0, pool_after=True),
            ConvSpec(256, 5, 1, 0, pool_after=True),
            ConvSpec(384, 3, 1, 0),
            ConvSpec(64, 1, 1, 0),
        )
        return cls(
            profile="full",
            eye_size=(112, 112),
            face_size=(224, 224),
            eye_convs=convs,
            face_convs=convs + (ConvSpec(64, 3, 1, 0),),
            output_space=output_space,
        )

    @classmethod
    def for_profile(cls, profile: str, output_space: Space | None = None) -> "ModelConfig":
        if profile == "tiny":
            return cls.tiny(output_space or Space.NORMALIZED)
        if profile == "full":
            return cls.full(output_space or Space.CAMERA_CM)
        raise ConfigError(f"unknown profile {profile!r}")

    def to_dict(self) -> dict:
        return {
            "profile": self.profile,
            "eye_size": list(self.eye_size),
            "face_size": list(self.face_size),
            "eye_convs": [[c.out_channels, c.kernel, c.stride, c.pad, c.pool_after]
                          for c in self.eye_convs],
            "face_convs": [[c.out_channels, c.kernel, c.stride, c.pad, c.pool_after]
                           for c in self.face_convs],
            "output_space": self.output_space.value,
            "grid_size": self.grid_size,
            "eye_fc": self.eye_fc,
            "face_fc": list(self.face_fc),
            "grid_fc": list(self.grid_fc),
            "fusion_hidden": self.fusion_hidden,
        }

    def fingerprint(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


@dataclass
class InputBundle:
    """The network's three-stream input for one frame.

    Eye/face tensors hold mean-subtracted values (may be negative); the face
    grid is binary.
    """

    left_eye: np.ndarray
    right_eye: np.ndarray
    face: np.ndarray
    face_grid: np.ndarray

    def validate(self, config: ModelConfig):
        eh, ew = config.eye_size
        fh, fw = config.face_size
        g = config.grid_size
        for name, arr, shape in (("left_eye", self.left_eye, (3, eh, ew)),
                                 ("right_eye", self.right_eye, (3, eh, ew)),
                                 ("face", self.face, (3, fh, fw)),
                                 ("face_grid", self.face_grid, (g, g))):
            if arr.shape != shape:
                raise ShapeError(f"bundle {name}: shape {arr.shape}, expected {shape}")
        if not np.all((self.face_grid == 0) | (self.face_grid == 1)):
            raise ValueError("face_grid values must be 0 or 1")


def stack_bundles(bundles, config: ModelConfig | None = None):
    """Stack InputBundles into the four batch arrays the network consumes."""
    if config is not None:
        for b in bundles:
            b.validate(config)
    left = np.stack([b.left_eye for b in bundles]).astype(np.float32, copy=False)
    right = np.stack([b.right_eye for b in bundles]).astype(np.float32, copy=False)
    face = np.stack([b.face for b in bundles]).astype(np.float32, copy=False)
    grid = np.stack([b.face_grid.reshape(-1) for b in bundles]).astype(np.float32, copy=False)
    return left, right, face, grid


def _conv_stack(prefix: str, in_channels: int, specs, rng) -> list:
    layers = []
    ch = in_channels
    for i, spec in enumerate(specs, start=1):
        layers.append(Conv2D(ch, spec.out_channels, spec.kernel, spec.stride, spec.pad,
                             name=f"{prefix}.conv{i}", rng=rng))
        layers.append(ReLU(name=f"{prefix}.relu{i}"))
        if spec.pool_after:
            layers.append(MaxPool2D(2, 2, name=f"{prefix}.pool{i}"))
        ch = spec.out_channels
    layers.append(Flatten(name=f"{prefix}.flatten"))
    return layers


def _stack_output_dim(layers, input_shape) -> int:
    shape = input_shape
    for layer in layers:
        shape = layer.output_shape(shape)
    return shape[1]


class GazeNetwork:
    """Layer graph plus its ParamSet; prediction is read-only and thread-safe."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)

        self.eye_stack = _conv_stack("eye", 3, config.eye_convs, rng)
        eye_flat = _stack_output_dim(self.eye_stack, (1, 3, *config.eye_size))
        self.eye_concat = Concat("eye.concat")
        self.eye_fc = FullyConnected(2 * eye_flat, config.eye_fc, name="eye.fc", rng=rng)
        self.eye_fc_relu = ReLU("eye.fc_relu")

        self.face_stack = _conv_stack("face", 3, config.face_convs, rng)
        face_flat = _stack_output_dim(self.face_stack, (1, 3, *config.face_size))
        self.face_fc1 = FullyConnected(face_flat, config.face_fc[0], name="face.fc1", rng=rng)
        self.face_fc2 = FullyConnected(config.face_fc[0], config.face_fc[1], name="face.fc2", rng=rng)

        grid_flat = config.grid_size * config.grid_size
        self.grid_fc1 = FullyConnected(grid_flat, config.grid_fc[0], name="grid.fc1", rng=rng)
        self.grid_fc2 = FullyConnected(config.grid_fc[0], config.grid_fc[1], name="grid.fc2", rng=rng)

        fused = config.eye_fc + config.face_fc[1] + config.grid_fc[1]
        self.fusion_concat = Concat("fusion.concat")
        self.fusion_fc1 = FullyConnected(fused, config.fusion_hidden, name="fusion.fc1", rng=rng)
        self.fusion_fc2 = FullyConnected(config.fusion_hidden, 2, name="fusion.fc2", rng=rng)
        self._relu = ReLU("shared.relu")

        self.params: dict[str, Param] = {}
        for layer in self._param_layers():
            self.params[layer.name] = layer.param

    def _param_layers(self):
        convs = [l for l in self.eye_stack + self.face_stack if l.param is not None]
        return convs + [self.eye_fc, self.face_fc1, self.face_fc2,
                        self.grid_fc1, self.grid_fc2, self.fusion_fc1, self.fusion_fc2]

    def parameter_count(self) -> int:
        return sum(p.w.size + p.b.size for p in self.params.values())

    # forward / backward -------------------------------------------------

    @staticmethod
    def _run(layers, x, ctxs):
        for layer in layers:
            x, c = layer.forward(x)
            ctxs.append((layer, c))
        return x

    @staticmethod
    def _run_back(ctxs, grad):
        for layer, c in reversed(ctxs):
            grad = layer.backward(c, grad)
        return grad

    def forward(self, left, right, face, grid):
        """Batch forward. Returns raw (N, 2) outputs and the backward context."""
        ctx = {"left": [], "right": [], "face": [], "grid": [], "head": []}
        lf = self._run(self.eye_stack, left, ctx["left"])
        rf = self._run(self.eye_stack, right, ctx["right"])
        eye_cat, ctx["eye_cat"] = self.eye_concat.forward([lf, rf])
        eye = self._run([self.eye_fc, self.eye_fc_relu], eye_cat, ctx["head"])

        ff = self._run(self.face_stack, face, ctx["face"])
        ff = self._run([self.face_fc1, self._relu, self.face_fc2, self._relu], ff, ctx["face"])

        gf = self._run([self.grid_fc1, self._relu, self.grid_fc2, self._relu], grid, ctx["grid"])

        fused, ctx["fuse_cat"] = self.fusion_concat.forward([eye, ff, gf])
        out = self._run([self.fusion_fc1, self._relu, self.fusion_fc2], fused, ctx["head"])
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("non-finite network output")
        ctx["n_head_eye"] = 2  # eye_fc + relu entries at the front of ctx["head"]
        return out, ctx

    def backward(self, ctx, grad_out):
        """Propagate loss gradients; parameter grads accumulate in-place."""
        head = ctx["head"]
        n_eye = ctx["n_head_eye"]
        grad = self._run_back(head[n_eye:], grad_out)
        g_eye, g_face, g_grid = self.fusion_concat.backward(ctx["fuse_cat"], grad)
        self._run_back(ctx["grid"], g_grid)
        self._run_back(ctx["face"], g_face)
        g_eye = self._run_back(head[:n_eye], g_eye)
        g_left, g_right = self.eye_concat.backward(ctx["eye_cat"], g_eye)
        self._run_back(ctx["right"], g_right)
        self._run_back(ctx["left"], g_left)

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    # prediction ----------------------------------------------------------

    def predict_batch(self, bundles) -> np.ndarray:
        left, right, face, grid = stack_bundles(bundles, self.config)
        out, _ = self.forward(left, right, face, grid)
        return out

    def predict(self, bundle: InputBundle, timestamp_ms: int | None = None) -> GazePoint:
        raw = self.predict_batch([bundle])[0]
        x, y = clamp_to_space(float(raw[0]), float(raw[1]), self.config.output_space)
        return GazePoint(x, y, self.config.output_space, timestamp_ms=timestamp_ms)

    # serialization / copying ----------------------------------------------

    def tensor_dict(self) -> dict[str, np.ndarray]:
        out = {}
        for name, p in self.params.items():
            out[f"{name}.w"] = p.w
            out[f"{name}.b"] = p.b
        return out

    def expected_shapes(self) -> dict[str, tuple]:
        return {name: arr.shape for name, arr in self.tensor_dict().items()}

    def save(self, destination: str | Path | None = None) -> bytes:
        return save_tensors(self.tensor_dict(), self.config.fingerprint(), destination)

    @classmethod
    def load(cls, data: bytes | str | Path, config: ModelConfig) -> "GazeNetwork":
        net = cls(config, seed=0)
        tensors = load_tensors(data, expected_fingerprint=config.fingerprint(),
                               expected_shapes=net.expected_shapes())
        for name, p in net.params.items():
            p.w[...] = tensors[f"{name}.w"]
            p.b[...] = tensors[f"{name}.b"]
        return net

    def clone(self) -> "GazeNetwork":
        net = GazeNetwork(self.config, seed=0)
        for name, p in net.params.items():
            src = self.params[name]
            p.w[...] = src.w
            p.b[...] = src.b
        return net

    def state_bytes(self) -> bytes:
        """Canonical byte string of all parameters (for bit-exact comparisons)."""
        return b"".join(self.params[n].w.tobytes() + self.params[n].b.tobytes()
                        for n in sorted(self.params))
