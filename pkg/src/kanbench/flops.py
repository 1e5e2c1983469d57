"""Analytic forward-pass FLOP counts.

Costs follow one fixed convention (:class:`FlopConvention`) which is embedded in
every report so the numbers can be rescaled or audited.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

from .kan import SplineGrid


@dataclass(frozen=True)
class FlopConvention:
    mac_cost: int = 2            # one multiply + one add
    silu_cost: int = 4           # exp, add, div, mul (sigmoid folded in)
    basis_level_cost: int = 8    # per basis value per Cox-de Boor lifting level
    bias_cost: int = 1

    def __post_init__(self):
        for name, value in asdict(self).items():
            if int(value) != value or value <= 0:
                raise ValueError(f"{name} must be a positive integer, got {value}")

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT_CONVENTION = FlopConvention()


@dataclass(frozen=True)
class FlopReport:
    model: str
    widths: tuple[int, ...]
    n_samples: int
    per_layer: tuple[int, ...]
    convention: FlopConvention = field(default=DEFAULT_CONVENTION)

    @property
    def total(self) -> int:
        return sum(self.per_layer)

    @property
    def mflops(self) -> float:
        return self.total / 1e6

    @property
    def per_sample(self) -> float:
        return self.total / self.n_samples if self.n_samples else 0.0

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "widths": list(self.widths),
            "n_samples": self.n_samples,
            "per_layer": list(self.per_layer),
            "total": self.total,
            "mflops": self.mflops,
            "per_sample": self.per_sample,
            "convention": self.convention.to_dict(),
        }


def mlp_flops(d: int, h: int, c: int, n: int,
              convention: FlopConvention = DEFAULT_CONVENTION) -> FlopReport:
    if min(d, h, c) < 1 or n < 0:
        raise ValueError(f"invalid MLP dims {(d, h, c)} or sample count {n}")
    cv = convention
    hidden = cv.mac_cost * d * h + cv.bias_cost * h + cv.silu_cost * h
    output = cv.mac_cost * h * c + cv.bias_cost * c
    return FlopReport("MLP", (d, h, c), n, (n * hidden, n * output), cv)


def basis_cost_per_scalar(grid: SplineGrid, convention: FlopConvention = DEFAULT_CONVENTION) -> int:
    """Dense Cox-de Boor cost for one input scalar; level j yields G + 2k - j values."""
    g, k = grid.grid_size, grid.spline_order
    return sum(convention.basis_level_cost * (g + 2 * k - j) for j in range(1, k + 1))


def kan_flops(widths: Sequence[int], grid: SplineGrid | None = None, n: int = 1,
              convention: FlopConvention = DEFAULT_CONVENTION) -> FlopReport:
    grid = grid or SplineGrid()
    if len(widths) < 2 or min(widths) < 1 or n < 0:
        raise ValueError(f"invalid KAN widths {list(widths)} or sample count {n}")
    cv = convention
    per_scalar = basis_cost_per_scalar(grid, cv)
    per_layer = []
    for a, b in zip(widths, widths[1:]):
        basis = a * per_scalar
        spline = cv.mac_cost * a * grid.n_basis * b
        base = cv.silu_cost * a + cv.mac_cost * a * b
        per_layer.append(n * (basis + spline + base))
    return FlopReport("KAN", tuple(widths), n, tuple(per_layer), cv)
