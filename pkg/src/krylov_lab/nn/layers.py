"""Layers with explicit forward/backward passes.

Activations inside the network are kept channels-last, shape (batch, length,
channels), so the im2col matrices of a convolution are plain reshapes of a
sliding window view. Convolution kernels are stored as (C_out, C_in, K).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import InvalidArgumentError

ACTIVATIONS = ("relu", "linear")


def relu(x):
    return np.maximum(x, 0)


def relu_grad(pre):
    # subgradient at 0 is 0
    return pre > 0


def conv1d_forward(weights, bias, x):
    """Valid cross-correlation of one record: x is (C_in, L), result (C_out, L - K + 1)."""
    x = np.asarray(x)
    c_out, c_in, k = weights.shape
    if x.ndim != 2 or x.shape[0] != c_in:
        raise InvalidArgumentError(f"expected input with {c_in} channels, got shape {x.shape}")
    if x.shape[1] < k:
        raise InvalidArgumentError(f"input length {x.shape[1]} shorter than kernel {k}")
    windows = sliding_window_view(x, k, axis=1)  # (C_in, L_out, K)
    return np.einsum("jnm,ijm->in", windows, weights) + bias[:, None]


def global_average_pool(features):
    """Channel means of a (C, L) array, or of (B, L, C) batches along L."""
    return np.asarray(features).mean(axis=1)


class Layer:
    params: tuple[str, ...] = ()

    def forward(self, x, cache: bool = False):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError

    def grads(self) -> dict:
        return {}

    def spec(self) -> dict:
        raise NotImplementedError


class Conv1d(Layer):
    params = ("weight", "bias")

    def __init__(self, c_in: int, c_out: int, kernel: int, activation: str = "relu", dtype=np.float32):
        if activation not in ACTIVATIONS:
            raise InvalidArgumentError(f"unknown activation {activation!r}")
        self.c_in, self.c_out, self.kernel = c_in, c_out, kernel
        self.activation = activation
        self.weight = np.zeros((c_out, c_in, kernel), dtype=dtype)
        self.bias = np.zeros(c_out, dtype=dtype)
        self.needs_input_grad = True
        self._cache = None

    @property
    def fan_in(self) -> int:
        return self.c_in * self.kernel

    @property
    def fan_out(self) -> int:
        return self.c_out * self.kernel

    def output_length(self, length: int) -> int:
        return length - self.kernel + 1

    def forward(self, x, cache=False):
        b, length, c = x.shape
        if c != self.c_in:
            raise InvalidArgumentError(f"conv expects {self.c_in} channels, got {c}")
        if length < self.kernel:
            raise InvalidArgumentError(f"input length {length} shorter than kernel {self.kernel}")
        l_out = length - self.kernel + 1
        cols = sliding_window_view(x, self.kernel, axis=1).reshape(b * l_out, c * self.kernel)
        pre = (cols @ self.weight.reshape(self.c_out, -1).T + self.bias).reshape(b, l_out, self.c_out)
        out = relu(pre) if self.activation == "relu" else pre
        if cache:
            self._cache = (cols, pre, x.shape)
        return out

    def backward(self, dout):
        cols, pre, in_shape = self._cache
        if self.activation == "relu":
            dout = dout * relu_grad(pre)
        b, l_out, _ = dout.shape
        d2 = dout.reshape(b * l_out, self.c_out)
        self.dweight = (d2.T @ cols).reshape(self.weight.shape)
        self.dbias = d2.sum(axis=0)
        if not self.needs_input_grad:
            return None
        dcols = (d2 @ self.weight.reshape(self.c_out, -1)).reshape(b, l_out, self.c_in, self.kernel)
        dx = np.zeros(in_shape, dtype=dout.dtype)
        for m in range(self.kernel):
            dx[:, m:m + l_out, :] += dcols[:, :, :, m]
        return dx

    def grads(self):
        return {"weight": self.dweight, "bias": self.dbias}

    def spec(self):
        return {"type": "conv1d", "c_in": self.c_in, "c_out": self.c_out, "kernel": self.kernel,
                "activation": self.activation}


class GlobalAveragePool(Layer):
    def forward(self, x, cache=False):
        if cache:
            self._shape = x.shape
        return x.mean(axis=1)

    def backward(self, dout):
        b, length, c = self._shape
        return np.broadcast_to(dout[:, None, :] / length, (b, length, c))

    def spec(self):
        return {"type": "global_average_pool"}


class Flatten(Layer):
    """(B, L, C) channels-last to (B, C * L) in channel-major order."""

    def forward(self, x, cache=False):
        if cache:
            self._shape = x.shape
        return x.transpose(0, 2, 1).reshape(x.shape[0], -1)

    def backward(self, dout):
        b, length, c = self._shape
        return dout.reshape(b, c, length).transpose(0, 2, 1)

    def spec(self):
        return {"type": "flatten"}


class Dense(Layer):
    params = ("weight", "bias")

    def __init__(self, n_in: int, n_out: int, activation: str = "relu", dtype=np.float32):
        if activation not in ACTIVATIONS:
            raise InvalidArgumentError(f"unknown activation {activation!r}")
        self.n_in, self.n_out = n_in, n_out
        self.activation = activation
        self.weight = np.zeros((n_out, n_in), dtype=dtype)
        self.bias = np.zeros(n_out, dtype=dtype)
        self.needs_input_grad = True

    @property
    def fan_in(self) -> int:
        return self.n_in

    @property
    def fan_out(self) -> int:
        return self.n_out

    def forward(self, x, cache=False):
        if x.shape[-1] != self.n_in:
            raise InvalidArgumentError(f"dense layer expects {self.n_in} inputs, got {x.shape[-1]}")
        pre = x @ self.weight.T + self.bias
        out = relu(pre) if self.activation == "relu" else pre
        if cache:
            self._cache = (x, pre)
        return out

    def backward(self, dout):
        x, pre = self._cache
        if self.activation == "relu":
            dout = dout * relu_grad(pre)
        self.dweight = dout.T @ x
        self.dbias = dout.sum(axis=0)
        if not self.needs_input_grad:
            return None
        return dout @ self.weight

    def grads(self):
        return {"weight": self.dweight, "bias": self.dbias}

    def spec(self):
        return {"type": "dense", "n_in": self.n_in, "n_out": self.n_out, "activation": self.activation}
