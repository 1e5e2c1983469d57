"""Central finite-difference checks of every differentiable op and both models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from .kan import KanLayer, SplineGrid, kan_init, kan_layer_forward
from .mlp import mlp_forward, mlp_init

STEP = 1e-5
TOLERANCE = 1e-4


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max-norm relative error ``|a - n|_inf / max(|a|_inf, |n|_inf)``; 0 when both vanish."""
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0))
    if scale < 1e-12:
        return float(np.abs(analytic - numeric).max(initial=0.0))
    return float(np.abs(analytic - numeric).max() / scale)


def numeric_grad(f: Callable[[], float], arr: np.ndarray, step: float = STEP) -> np.ndarray:
    grad = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = arr[idx]
        arr[idx] = orig + step
        fp = f()
        arr[idx] = orig - step
        fm = f()
        arr[idx] = orig
        grad[idx] = (fp - fm) / (2 * step)
    return grad


def check(loss_fn: Callable[[], ad.Tensor], tensors: list[ad.Tensor], step: float = STEP) -> float:
    """Max relative error over ``tensors`` between tape gradients and finite differences."""
    for t in tensors:
        t.grad = None
    ad.backward(loss_fn())
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in tensors]
    worst = 0.0
    for t, a in zip(tensors, analytic):
        n = numeric_grad(lambda: loss_fn().item(), t.data, step)
        worst = max(worst, relative_error(a, n))
    return worst


def _weighted_sum(y: ad.Tensor, w: np.ndarray) -> ad.Tensor:
    # Random projection so the scalar loss exercises every output entry.
    return ad.tensor_sum(ad.mul(y, ad.Tensor(w)))


def _leaf(rng, shape, lo=-2.0, hi=2.0):
    return ad.Tensor(rng.uniform(lo, hi, shape), requires_grad=True)


def _random_dims(rng, max_widths=(8, 4, 3)):
    return [int(rng.integers(1, m + 1)) for m in max_widths]


def op_cases(rng) -> dict[str, Callable[[], float]]:
    """One zero-argument callable per op, returning the max relative error."""

    def matmul():
        m, k, n = (int(v) for v in rng.integers(1, 6, 3))
        a, b = _leaf(rng, (m, k)), _leaf(rng, (k, n))
        w = rng.normal(size=(m, n))
        return check(lambda: _weighted_sum(ad.matmul(a, b), w), [a, b])

    def transpose():
        a = _leaf(rng, (3, 4))
        w = rng.normal(size=(4, 3))
        return check(lambda: _weighted_sum(ad.transpose(a), w), [a])

    def add():
        a, full, row, col = _leaf(rng, (4, 3)), _leaf(rng, (4, 3)), _leaf(rng, (1, 3)), _leaf(rng, (4, 1))
        w = rng.normal(size=(4, 3))
        return check(lambda: _weighted_sum(ad.add(ad.add(ad.add(a, full), row), col), w),
                     [a, full, row, col])

    def mul():
        a, b = _leaf(rng, (3, 3)), _leaf(rng, (3, 3))
        w = rng.normal(size=(3, 3))
        return check(lambda: _weighted_sum(ad.mul(a, b), w), [a, b])

    def tensor_sum():
        a = _leaf(rng, (3, 5))
        return check(lambda: ad.tensor_sum(ad.mul(a, a)), [a])

    def silu():
        a = _leaf(rng, (5, 4))
        w = rng.normal(size=(5, 4))
        return check(lambda: _weighted_sum(ad.silu(a), w), [a])

    def softmax_cross_entropy():
        b, c = int(rng.integers(1, 6)), int(rng.integers(2, 5))
        logits = _leaf(rng, (b, c))
        labels = rng.integers(0, c, b)
        return check(lambda: ad.softmax_cross_entropy(logits, labels), [logits])

    def bspline_basis():
        grid = SplineGrid(grid_size=5, spline_order=int(rng.integers(1, 4)))
        x = _leaf(rng, (4, 3))
        w = rng.normal(size=(4, 3 * grid.n_basis))
        return check(lambda: _weighted_sum(ad.bspline_basis(x, grid.knots, grid.spline_order), w), [x])

    def kan_layer():
        n, m = int(rng.integers(1, 9)), int(rng.integers(1, 5))
        layer = KanLayer(n, m)
        layer.base_weight.data[...] = rng.uniform(-1, 1, layer.base_weight.shape)
        layer.spline_weight.data[...] = rng.normal(0, 0.5, layer.spline_weight.shape)
        x = _leaf(rng, (5, n))
        w = rng.normal(size=(5, m))
        return check(lambda: _weighted_sum(kan_layer_forward(layer, x), w),
                     [x, layer.base_weight, layer.spline_weight])

    def kan_network():
        return kan_network_error(rng)

    def mlp_network():
        return mlp_network_error(rng)

    return {
        "matmul": matmul, "transpose": transpose, "add": add, "mul": mul, "sum": tensor_sum,
        "silu": silu, "softmax_cross_entropy": softmax_cross_entropy,
        "bspline_basis": bspline_basis, "kan_layer_forward": kan_layer,
        "kan_network": kan_network, "mlp_network": mlp_network,
    }


def kan_network_error(rng, max_widths=(8, 4, 3), batch: int = 6) -> float:
    d, h, c = _random_dims(rng, max_widths)
    c = max(c, 2)
    net = kan_init([d, h, c], SplineGrid(), rng)
    x = _leaf(rng, (batch, d))
    labels = rng.integers(0, c, batch)
    return check(lambda: ad.softmax_cross_entropy(net(x), labels), [x] + net.parameters())


def mlp_network_error(rng, max_widths=(8, 4, 3), batch: int = 6) -> float:
    d, h, c = _random_dims(rng, max_widths)
    c = max(c, 2)
    net = mlp_init(d, h, c, rng)
    for layer in net.layers:
        layer.bias.data[...] = rng.uniform(-0.5, 0.5, layer.bias.shape)
    x = _leaf(rng, (batch, d))
    labels = rng.integers(0, c, batch)
    return check(lambda: ad.softmax_cross_entropy(mlp_forward(net, x), labels), [x] + net.parameters())


@dataclass
class GradcheckRow:
    op: str
    max_rel_error: float
    trials: int

    @property
    def ok(self) -> bool:
        return self.max_rel_error <= TOLERANCE


def run_suite(seed: int = 0, trials: int = 5) -> list[GradcheckRow]:
    rng = np.random.default_rng(seed)
    cases = op_cases(rng)
    rows = []
    for name, case in cases.items():
        rows.append(GradcheckRow(name, max(case() for _ in range(trials)), trials))
    return rows
