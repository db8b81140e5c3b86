"""Network assembly, loss, backpropagation and initialization."""

from __future__ import annotations

import copy

import numpy as np

from ..errors import InvalidArgumentError
from ..numerics import Rng
from .layers import Conv1d, Dense, Flatten, GlobalAveragePool

FULL_CNN = {"conv_channels": [256, 512, 1024], "dense": [256, 128]}
DESK_CNN = {"conv_channels": [16, 32, 64], "dense": [64, 32]}
FULL_FCN = {"hidden": [1024, 512, 256, 128]}
DESK_FCN = {"hidden": [256, 128, 64, 32]}

PROFILES = {
    ("CNN", "full"): FULL_CNN,
    ("CNN", "desk"): DESK_CNN,
    ("FCN", "full"): FULL_FCN,
    ("FCN", "desk"): DESK_FCN,
}


def architecture(arch: str, n: int, profile: str = "desk", kernel: int = 5, dtype: str = "float32",
                 in_channels: int = 4, **overrides) -> dict:
    """Architecture spec dict for a named profile, with optional overrides."""
    arch = arch.upper()
    if (arch, profile) not in PROFILES:
        raise InvalidArgumentError(f"unknown architecture/profile {arch}/{profile}")
    spec = {"arch": arch, "n": int(n), "in_channels": in_channels, "dtype": dtype}
    spec.update(copy.deepcopy(PROFILES[arch, profile]))
    if arch == "CNN":
        spec["kernel"] = int(kernel)
    spec.update(overrides)
    return spec


class Network:
    """Sequential regressor mapping (batch, 4, N) features to (batch,) predictions."""

    def __init__(self, spec: dict):
        self.spec = dict(spec)
        self.dtype = np.dtype(spec.get("dtype", "float32"))
        n, c = int(spec["n"]), int(spec.get("in_channels", 4))
        self.n, self.in_channels = n, c
        dt = self.dtype
        layers = []
        if spec["arch"] == "CNN":
            k = int(spec["kernel"])
            length = n
            for c_out in spec["conv_channels"]:
                if length < k:
                    raise InvalidArgumentError(f"input length {n} too short for {len(spec['conv_channels'])} "
                                               f"convolutions with kernel {k}")
                layers.append(Conv1d(c, c_out, k, "relu", dt))
                c, length = c_out, length - k + 1
            layers.append(GlobalAveragePool())
            width = c
            hidden = spec["dense"]
        elif spec["arch"] == "FCN":
            layers.append(Flatten())
            width = n * c
            hidden = spec["hidden"]
        else:
            raise InvalidArgumentError(f"unknown architecture {spec['arch']!r}")
        for h in hidden:
            layers.append(Dense(width, h, "relu", dt))
            width = h
        layers.append(Dense(width, 1, "linear", dt))
        first = next(layer for layer in layers if layer.params)
        first.needs_input_grad = False
        self.layers = layers

    @property
    def arch(self) -> str:
        return self.spec["arch"]

    def parameters(self):
        """(name, array) pairs in layer order; arrays are the live parameters."""
        out = []
        for i, layer in enumerate(self.layers):
            for p in layer.params:
                out.append((f"{i}.{p}", getattr(layer, p)))
        return out

    def parameter_count(self) -> int:
        return sum(a.size for _, a in self.parameters())

    def astype(self, dtype) -> "Network":
        net = Network({**self.spec, "dtype": np.dtype(dtype).name})
        for (_, dst), (_, src) in zip(net.parameters(), self.parameters()):
            dst[...] = src
        return net

    def copy(self) -> "Network":
        return self.astype(self.dtype)

    def _prepare(self, features):
        x = np.asarray(features)
        if x.ndim == 2:
            x = x[None]
        if x.shape[1:] != (self.in_channels, self.n):
            raise InvalidArgumentError(f"features have shape {x.shape[1:]}, network expects "
                                       f"{(self.in_channels, self.n)}")
        return np.ascontiguousarray(x.transpose(0, 2, 1), dtype=self.dtype)

    def forward(self, features, cache: bool = False) -> np.ndarray:
        x = self._prepare(features)
        for layer in self.layers:
            x = layer.forward(x, cache=cache)
        return x[:, 0]

    def predict(self, features, batch_size: int = 1024) -> np.ndarray:
        features = np.asarray(features)
        out = [self.forward(features[i:i + batch_size]) for i in range(0, len(features), batch_size)]
        return np.concatenate(out) if out else np.zeros(0, dtype=self.dtype)

    def backward(self, dpred):
        d = np.asarray(dpred, dtype=self.dtype)[:, None]
        for layer in reversed(self.layers):
            d = layer.backward(d)
            if d is None:
                break
        return [layer.grads()[p] for layer in self.layers for p in layer.params]

    def loss_and_grads(self, features, targets):
        pred = self.forward(features, cache=True)
        y = np.asarray(targets, dtype=self.dtype)
        diff = pred - y
        loss = float(np.mean(diff.astype(np.float64) ** 2))
        grads = self.backward(2.0 * diff / len(diff))
        return loss, grads


def forward(network: Network, record_features) -> float:
    """Prediction for a single (4, N) record."""
    return float(network.forward(record_features)[0])


def mse_loss(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape or p.size == 0:
        raise InvalidArgumentError("mse_loss needs equal-length non-empty inputs")
    return float(np.mean((p - t) ** 2))


def backward(network: Network, features, targets):
    """Gradients of the batch MSE with respect to every parameter, in parameters() order."""
    return network.loss_and_grads(features, targets)[1]


def glorot_init(network: Network, rng: Rng) -> Network:
    """Glorot-uniform weights, zero biases; modifies ``network`` in place and returns it."""
    for layer in network.layers:
        if not layer.params:
            continue
        limit = np.sqrt(6.0 / (layer.fan_in + layer.fan_out))
        layer.weight[...] = rng.uniform(-limit, limit, layer.weight.shape)
        layer.bias[...] = 0
    return network


def build_network(spec: dict, rng: Rng | None = None) -> Network:
    net = Network(spec)
    if rng is not None:
        glorot_init(net, rng)
    return net


def constant_network(spec: dict, value: float) -> Network:
    """Network whose output is ``value`` for every input (all weights zero)."""
    net = Network(spec)
    net.layers[-1].bias[0] = value
    return net
