"""Kolmogorov-Arnold layers: a learnable univariate function on every edge.

Each edge (input p -> output q) computes

    phi_qp(x) = base_weight[q, p] * silu(x) + sum_j spline_weight[q, p, j] * B_j(x)

and each output node sums its incoming edges. ``B_j`` are the order-k
B-splines on a fixed uniform grid of G intervals extended by k knots on each
side, giving G + k functions per edge and G + k + 1 parameters per edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .autodiff import DimensionError, Tensor, add, bspline_basis, matmul, silu


@dataclass(frozen=True)
class SplineGrid:
    domain_lo: float = -1.0
    domain_hi: float = 1.0
    grid_size: int = 5
    spline_order: int = 3
    knots: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.grid_size < 1:
            raise ValueError(f"grid_size must be positive, got {self.grid_size}")
        if self.spline_order < 0:
            raise ValueError(f"spline_order must be non-negative, got {self.spline_order}")
        if not self.domain_hi > self.domain_lo:
            raise ValueError("domain_hi must exceed domain_lo")
        k, g = self.spline_order, self.grid_size
        h = (self.domain_hi - self.domain_lo) / g
        knots = np.arange(-k, g + k + 1, dtype=np.float64) * h + self.domain_lo
        # Pin the domain ends exactly so knots[k] == lo and knots[G+k] == hi.
        knots[k] = self.domain_lo
        knots[g + k] = self.domain_hi
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)

    @property
    def step(self) -> float:
        return (self.domain_hi - self.domain_lo) / self.grid_size

    @property
    def n_basis(self) -> int:
        return self.grid_size + self.spline_order

    def to_dict(self) -> dict:
        return {
            "domain_lo": self.domain_lo,
            "domain_hi": self.domain_hi,
            "grid_size": self.grid_size,
            "spline_order": self.spline_order,
        }


def basis_values(x: np.ndarray, grid: SplineGrid) -> np.ndarray:
    """Basis values as a ``(B, n, G + k)`` array (no tape recording)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    out = bspline_basis(Tensor(x), grid.knots, grid.spline_order).data
    return out.reshape(x.shape[0], x.shape[1], grid.n_basis)


class KanLayer:
    def __init__(self, in_features: int, out_features: int, grid: SplineGrid | None = None):
        if in_features < 1 or out_features < 1:
            raise ValueError(f"layer dims must be positive, got {in_features}->{out_features}")
        self.in_features = in_features
        self.out_features = out_features
        self.grid = grid or SplineGrid()
        nb = self.grid.n_basis
        self.base_weight = Tensor(np.zeros((out_features, in_features)), requires_grad=True)
        self.spline_weight = Tensor(np.zeros((out_features, in_features * nb)), requires_grad=True)

    def parameters(self) -> list[Tensor]:
        return [self.base_weight, self.spline_weight]

    def parameter_count(self) -> int:
        return self.out_features * self.in_features * (self.grid.n_basis + 1)

    def __call__(self, x: Tensor) -> Tensor:
        return kan_layer_forward(self, x)


def kan_layer_forward(layer: KanLayer, x: Tensor) -> Tensor:
    if x.shape[1] != layer.in_features:
        raise DimensionError(
            f"KAN layer expects {layer.in_features} input columns, got {x.shape[1]}"
        )
    base = matmul(silu(x), layer.base_weight.T)
    feats = bspline_basis(x, layer.grid.knots, layer.grid.spline_order)
    spline = matmul(feats, layer.spline_weight.T)
    return add(base, spline)


class KanNetwork:
    kind = "KAN"

    def __init__(self, widths: Sequence[int], grid: SplineGrid | None = None):
        _check_widths(widths)
        self.widths = list(widths)
        self.grid = grid or SplineGrid()
        self.layers = [KanLayer(a, b, self.grid) for a, b in zip(self.widths, self.widths[1:])]

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.parameters()]

    def parameter_count(self) -> int:
        return sum(layer.parameter_count() for layer in self.layers)

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = kan_layer_forward(layer, x)
        return x


def _check_widths(widths: Sequence[int]) -> None:
    if len(widths) < 2:
        raise ValueError(f"need at least input and output widths, got {list(widths)}")
    if any(int(w) != w or w < 1 for w in widths):
        raise ValueError(f"all widths must be positive integers, got {list(widths)}")


def kan_param_count(widths: Sequence[int], grid: SplineGrid | None = None) -> int:
    grid = grid or SplineGrid()
    _check_widths(widths)
    per_edge = grid.n_basis + 1
    return sum(a * b * per_edge for a, b in zip(widths, widths[1:]))


def kan_init(widths: Sequence[int], grid: SplineGrid | None = None, rng=None) -> KanNetwork:
    """Random KAN with base weights ~ U(+-1/sqrt(n)) and spline coefficients ~ N(0, 0.1/sqrt(n)).

    ``n`` is the layer's fan-in. ``rng`` is a ``numpy.random.Generator`` or a seed.
    """
    rng = np.random.default_rng(rng)
    net = KanNetwork(widths, grid)
    for layer in net.layers:
        n = layer.in_features
        bound = 1.0 / math.sqrt(n)
        layer.base_weight.data[...] = rng.uniform(-bound, bound, layer.base_weight.shape)
        layer.spline_weight.data[...] = rng.normal(0.0, 0.1 / math.sqrt(n), layer.spline_weight.shape)
    return net
