"""Kolmogorov-Arnold networks and parameter-matched MLPs for tabular classification."""

from .autodiff import Tensor, backward, no_grad
from .kan import KanLayer, KanNetwork, SplineGrid, kan_init, kan_param_count
from .kernels import BACKEND as KERNEL_BACKEND
from .mlp import MlpNetwork, mlp_init, mlp_param_count

__version__ = "0.1.0"

__all__ = [
    "Tensor", "backward", "no_grad",
    "KanLayer", "KanNetwork", "SplineGrid", "kan_init", "kan_param_count",
    "MlpNetwork", "mlp_init", "mlp_param_count",
    "KERNEL_BACKEND",
]
