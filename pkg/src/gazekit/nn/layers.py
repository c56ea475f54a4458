"""Dense layer kinds with explicit forward/backward passes.

Layers are dtype-generic (they follow the input dtype) but the production
pipeline runs float32 end to end. Forward returns ``(output, ctx)``; backward
consumes that ctx, returns the input gradient, and accumulates parameter
gradients in place so branches that share a layer (both eye crops) sum their
contributions naturally.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np


class ShapeError(ValueError):
    """Input shape is incompatible with a layer spec."""


class Param:
    """One layer's weights/bias plus their gradient accumulators."""

    def __init__(self, w: np.ndarray, b: np.ndarray):
        self.w = w
        self.b = b
        self.gw = np.zeros_like(w)
        self.gb = np.zeros_like(b)

    def zero_grad(self):
        self.gw[...] = 0.0
        self.gb[...] = 0.0

    def astype(self, dtype) -> "Param":
        return Param(self.w.astype(dtype), self.b.astype(dtype))


def kaiming_uniform(shape, fan_in: int, rng: np.random.Generator) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


def im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int):
    """Unfold conv windows into (N, C*KH*KW, HO*WO) columns."""
    n, c, h, w = x.shape
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = np.empty((n, c, kh, kw, ho, wo), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = x[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride]
    return cols.reshape(n, c * kh * kw, ho * wo), ho, wo


def col2im(cols: np.ndarray, x_shape, kh: int, kw: int, stride: int, pad: int) -> np.ndarray:
    """Scatter-add columns back onto the (padded) input grid."""
    n, c, h, w = x_shape
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1
    cols = cols.reshape(n, c, kh, kw, ho, wo)
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            xp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += cols[:, :, i, j]
    if pad:
        return xp[:, :, pad:-pad, pad:-pad]
    return xp


class Layer:
    """Base layer: shape algebra plus forward/backward."""

    name = ""
    param: Param | None = None

    def output_shape(self, input_shape: tuple) -> tuple:
        raise NotImplementedError

    def forward(self, x):
        raise NotImplementedError

    def backward(self, ctx, grad_y):
        raise NotImplementedError


class Conv2D(Layer):
    """2D convolution (cross-correlation). Weight layout (OC, IC, KH, KW)."""

    def __init__(self, in_channels, out_channels, kernel, stride=1, pad=0,
                 name="conv", rng: np.random.Generator | None = None, method="im2col"):
        if isinstance(kernel, int):
            kernel = (kernel, kernel)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kh, self.kw = kernel
        self.stride = stride
        self.pad = pad
        self.name = name
        self.method = method
        rng = rng or np.random.default_rng(0)
        fan_in = in_channels * self.kh * self.kw
        w = kaiming_uniform((out_channels, in_channels, self.kh, self.kw), fan_in, rng)
        b = np.zeros(out_channels, dtype=np.float32)
        self.param = Param(w, b)

    def output_shape(self, input_shape):
        if len(input_shape) != 4 or input_shape[1] != self.in_channels:
            raise ShapeError(
                f"{self.name}: expected (N, {self.in_channels}, H, W), got {input_shape}")
        n, _, h, w = input_shape
        ho = (h + 2 * self.pad - self.kh) // self.stride + 1
        wo = (w + 2 * self.pad - self.kw) // self.stride + 1
        if ho <= 0 or wo <= 0:
            raise ShapeError(f"{self.name}: kernel {self.kh}x{self.kw} does not fit input {input_shape}")
        return (n, self.out_channels, ho, wo)

    def forward(self, x):
        self.output_shape(x.shape)
        if self.method == "loop":
            return self._forward_loop(x)
        return self._forward_im2col(x)

    def _forward_im2col(self, x):
        p = self.param
        cols, ho, wo = im2col(x, self.kh, self.kw, self.stride, self.pad)
        wmat = p.w.reshape(self.out_channels, -1).astype(x.dtype, copy=False)
        y = np.matmul(wmat, cols)  # (N, OC, HO*WO)
        y += p.b.astype(x.dtype, copy=False)[:, None]
        y = y.reshape(x.shape[0], self.out_channels, ho, wo)
        return y, (x.shape, cols)

    def _forward_loop(self, x):
        # Direct windowed computation, the correctness path.
        p = self.param
        n, _, h, w = x.shape
        _, _, ho, wo = self.output_shape(x.shape)
        if self.pad:
            xp = np.pad(x, ((0, 0), (0, 0), (self.pad, self.pad), (self.pad, self.pad)))
        else:
            xp = x
        wq = p.w.astype(x.dtype, copy=False)
        y = np.empty((n, self.out_channels, ho, wo), dtype=x.dtype)
        for yy in range(ho):
            for xx in range(wo):
                window = xp[:, :, yy * self.stride:yy * self.stride + self.kh,
                            xx * self.stride:xx * self.stride + self.kw]
                y[:, :, yy, xx] = np.tensordot(window, wq, axes=([1, 2, 3], [1, 2, 3]))
        y += p.b.astype(x.dtype, copy=False)[None, :, None, None]
        cols, _, _ = im2col(x, self.kh, self.kw, self.stride, self.pad)
        return y, (x.shape, cols)

    def backward(self, ctx, grad_y):
        x_shape, cols = ctx
        n = x_shape[0]
        p = self.param
        gy = grad_y.reshape(n, self.out_channels, -1)
        gw = np.einsum("nof,ncf->oc", gy, cols).reshape(p.w.shape)
        p.gw += gw.astype(p.gw.dtype, copy=False)
        p.gb += gy.sum(axis=(0, 2)).astype(p.gb.dtype, copy=False)
        wmat = p.w.reshape(self.out_channels, -1).astype(grad_y.dtype, copy=False)
        gcols = np.matmul(wmat.T, gy)
        return col2im(gcols, x_shape, self.kh, self.kw, self.stride, self.pad)


class MaxPool2D(Layer):
    def __init__(self, window=2, stride=2, name="pool"):
        self.k = window
        self.stride = stride
        self.name = name

    def output_shape(self, input_shape):
        if len(input_shape) != 4:
            raise ShapeError(f"{self.name}: expected 4D input, got {input_shape}")
        n, c, h, w = input_shape
        ho = (h - self.k) // self.stride + 1
        wo = (w - self.k) // self.stride + 1
        if ho <= 0 or wo <= 0:
            raise ShapeError(f"{self.name}: window {self.k} does not fit input {input_shape}")
        return (n, c, ho, wo)

    def forward(self, x):
        n, c, ho, wo = self.output_shape(x.shape)
        k, s = self.k, self.stride
        patches = np.empty((n, x.shape[1], ho, wo, k * k), dtype=x.dtype)
        for i in range(k):
            for j in range(k):
                patches[..., i * k + j] = x[:, :, i:i + s * ho:s, j:j + s * wo:s]
        idx = patches.argmax(axis=-1)
        y = np.take_along_axis(patches, idx[..., None], axis=-1)[..., 0]
        return y, (x.shape, idx)

    def backward(self, ctx, grad_y):
        x_shape, idx = ctx
        n, c, h, w = x_shape
        k, s = self.k, self.stride
        ho, wo = idx.shape[2], idx.shape[3]
        gx = np.zeros(x_shape, dtype=grad_y.dtype)
        for i in range(k):
            for j in range(k):
                mask = idx == (i * k + j)
                gx[:, :, i:i + s * ho:s, j:j + s * wo:s] += np.where(mask, grad_y, 0)
        return gx


class ReLU(Layer):
    def __init__(self, name="relu"):
        self.name = name

    def output_shape(self, input_shape):
        return input_shape

    def forward(self, x):
        y = np.maximum(x, 0)
        return y, (x > 0)

    def backward(self, ctx, grad_y):
        return grad_y * ctx


class FullyConnected(Layer):
    """Affine map y = x @ W.T + b with W of shape (out, in)."""

    def __init__(self, in_features, out_features, name="fc", rng=None):
        self.in_features = in_features
        self.out_features = out_features
        self.name = name
        rng = rng or np.random.default_rng(0)
        w = kaiming_uniform((out_features, in_features), in_features, rng)
        b = np.zeros(out_features, dtype=np.float32)
        self.param = Param(w, b)

    def output_shape(self, input_shape):
        if len(input_shape) != 2 or input_shape[1] != self.in_features:
            raise ShapeError(
                f"{self.name}: expected (N, {self.in_features}), got {input_shape}")
        return (input_shape[0], self.out_features)

    def forward(self, x):
        self.output_shape(x.shape)
        p = self.param
        y = x @ p.w.T.astype(x.dtype, copy=False) + p.b.astype(x.dtype, copy=False)
        return y, x

    def backward(self, ctx, grad_y):
        x = ctx
        p = self.param
        p.gw += (grad_y.T @ x).astype(p.gw.dtype, copy=False)
        p.gb += grad_y.sum(axis=0).astype(p.gb.dtype, copy=False)
        return grad_y @ p.w.astype(grad_y.dtype, copy=False)


class Flatten(Layer):
    def __init__(self, name="flatten"):
        self.name = name

    def output_shape(self, input_shape):
        n = input_shape[0]
        return (n, int(np.prod(input_shape[1:])))

    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, ctx, grad_y):
        return grad_y.reshape(ctx)


class Concat(Layer):
    """Concatenate feature vectors along axis 1."""

    def __init__(self, name="concat"):
        self.name = name

    def output_shape(self, input_shapes: Sequence[tuple]):
        n = input_shapes[0][0]
        for s in input_shapes:
            if len(s) != 2 or s[0] != n:
                raise ShapeError(f"{self.name}: inconsistent batch shapes {input_shapes}")
        return (n, sum(s[1] for s in input_shapes))

    def forward(self, xs: Sequence[np.ndarray]):
        self.output_shape([x.shape for x in xs])
        widths = [x.shape[1] for x in xs]
        return np.concatenate(xs, axis=1), widths

    def backward(self, ctx, grad_y):
        widths = ctx
        splits = np.cumsum(widths)[:-1]
        return np.split(grad_y, splits, axis=1)
