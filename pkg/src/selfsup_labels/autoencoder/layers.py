"""Stride-1, same-length 1-D convolution and transposed convolution in numpy.

Arrays are channel-first: a single signal is (C, n), a batch is (B, C, n).
Weights are stored as (out, in, kernel) for both layer kinds. With stride 1
a transposed convolution equals a zero-padded convolution with the kernel
reversed along its last axis, which is how it is computed here.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ..errors import ShapeMismatch

KINDS = ("conv", "transposed_conv")
ACTIVATIONS = ("relu", "sigmoid", "linear")


@dataclass(eq=False)
class Conv1dLayer:
    kind: str
    in_channels: int
    out_channels: int
    kernel_size: int
    weights: np.ndarray
    biases: np.ndarray
    activation: str = "linear"
    stride: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.stride != 1:
            raise ValueError("only stride 1 is supported")
        if self.kernel_size % 2 != 1:
            raise ValueError("same-length padding needs an odd kernel size")
        self.weights = np.asarray(self.weights, dtype=float)
        self.biases = np.asarray(self.biases, dtype=float)
        want = (self.out_channels, self.in_channels, self.kernel_size)
        if self.weights.shape != want or self.biases.shape != (self.out_channels,):
            raise ShapeMismatch(
                f"weights {self.weights.shape} / biases {self.biases.shape} do not match {want}"
            )
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise ValueError("layer parameters must be finite")

    @property
    def padding(self):
        return (self.kernel_size - 1) // 2

    @classmethod
    def init(cls, kind, in_channels, out_channels, kernel_size, activation, rng):
        """Uniform fan-in initialisation, zero biases."""
        bound = 1.0 / np.sqrt(in_channels * kernel_size)
        w = rng.uniform(-bound, bound, size=(out_channels, in_channels, kernel_size))
        return cls(kind, in_channels, out_channels, kernel_size, w, np.zeros(out_channels), activation)

    def effective_kernel(self):
        return self.weights if self.kind == "conv" else self.weights[:, :, ::-1]

    def describe(self):
        return {
            "kind": self.kind,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel_size": self.kernel_size,
            "stride": self.stride,
            "activation": self.activation,
        }


def activate(z, name):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return expit(z)
    return z


def activation_grad(z, a, upstream, name):
    if name == "relu":
        return upstream * (z > 0)
    if name == "sigmoid":
        return upstream * a * (1.0 - a)
    return upstream


def _as_batch(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        return x[None], True
    if x.ndim == 3:
        return x, False
    raise ShapeMismatch(f"expected (C, n) or (B, C, n), got shape {x.shape}")


def _windows(x, k, pad):
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    return sliding_window_view(xp, k, axis=2)  # (B, C, n, K)


def _linear(x, layer):
    """Pre-activation output and the unfolded input needed by the backward pass."""
    if x.shape[1] != layer.in_channels:
        raise ShapeMismatch(f"layer expects {layer.in_channels} channels, input has {x.shape[1]}")
    cols = _windows(x, layer.kernel_size, layer.padding)
    B, C, n, K = cols.shape
    flat = cols.transpose(0, 2, 1, 3).reshape(B, n, C * K)
    kernel = layer.effective_kernel().reshape(layer.out_channels, C * K)
    z = flat @ kernel.T + layer.biases
    return z.transpose(0, 2, 1), flat


def conv1d_forward(x, layer, return_cache=False):
    xb, squeeze = _as_batch(x)
    z, flat = _linear(xb, layer)
    a = activate(z, layer.activation)
    out = a[0] if squeeze else a
    if return_cache:
        return out, (xb.shape, z, a, flat, squeeze)
    return out


def conv1d_backward(layer, x, upstream, cache=None):
    """Gradients of the forward map with respect to input, weights and biases."""
    if cache is None:
        _, cache = conv1d_forward(x, layer, return_cache=True)
    in_shape, z, a, flat, squeeze = cache
    g = np.asarray(upstream, dtype=float)
    if squeeze:
        g = g[None]
    if g.shape != z.shape:
        raise ShapeMismatch(f"upstream gradient {g.shape} does not match output {z.shape}")
    dz = activation_grad(z, a, g, layer.activation)  # (B, O, n)
    B, C, n = in_shape
    K, pad = layer.kernel_size, layer.padding
    O = layer.out_channels

    dz_t = dz.transpose(0, 2, 1).reshape(B * n, O)
    d_kernel = (dz_t.T @ flat.reshape(B * n, C * K)).reshape(O, C, K)
    d_bias = dz.sum(axis=(0, 2))

    kernel = layer.effective_kernel().reshape(O, C * K)
    d_cols = (dz_t @ kernel).reshape(B, n, C, K)
    d_xpad = np.zeros((B, C, n + 2 * pad))
    for k in range(K):
        d_xpad[:, :, k:k + n] += d_cols[:, :, :, k].transpose(0, 2, 1)
    d_x = d_xpad[:, :, pad:pad + n]

    d_weights = d_kernel if layer.kind == "conv" else d_kernel[:, :, ::-1]
    if squeeze:
        d_x = d_x[0]
    return d_x, np.ascontiguousarray(d_weights), d_bias
