"""One-hidden-layer SiLU MLP used as the parameter-matched baseline."""

from __future__ import annotations

import math

import numpy as np

from .autodiff import DimensionError, Tensor, add, matmul, silu


class LinearLayer:
    def __init__(self, in_features: int, out_features: int):
        if in_features < 1 or out_features < 1:
            raise ValueError(f"layer dims must be positive, got {in_features}->{out_features}")
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Tensor(np.zeros((out_features, in_features)), requires_grad=True)
        self.bias = Tensor(np.zeros((1, out_features)), requires_grad=True)

    def parameters(self) -> list[Tensor]:
        return [self.weight, self.bias]

    def parameter_count(self) -> int:
        return self.out_features * (self.in_features + 1)

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[1] != self.in_features:
            raise DimensionError(
                f"linear layer expects {self.in_features} input columns, got {x.shape[1]}"
            )
        return add(matmul(x, self.weight.T), self.bias)


class MlpNetwork:
    kind = "MLP"

    def __init__(self, d: int, h: int, c: int, activation=silu):
        self.widths = [d, h, c]
        self.layers = [LinearLayer(d, h), LinearLayer(h, c)]
        # Swappable for tests (identity collapses the net to one affine map).
        self.activation = activation

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.parameters()]

    def parameter_count(self) -> int:
        return sum(layer.parameter_count() for layer in self.layers)

    def __call__(self, x: Tensor) -> Tensor:
        return mlp_forward(self, x)


def mlp_forward(net: MlpNetwork, x: Tensor) -> Tensor:
    first, second = net.layers
    return second(net.activation(first(x)))


def mlp_param_count(d: int, h: int, c: int) -> int:
    if min(d, h, c) < 1:
        raise ValueError(f"all dims must be positive, got {(d, h, c)}")
    return (d + 1) * h + (h + 1) * c


def mlp_init(d: int, h: int, c: int, rng=None) -> MlpNetwork:
    """Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases."""
    rng = np.random.default_rng(rng)
    net = MlpNetwork(d, h, c)
    for layer in net.layers:
        bound = math.sqrt(6.0 / layer.in_features)
        layer.weight.data[...] = rng.uniform(-bound, bound, layer.weight.shape)
    return net
