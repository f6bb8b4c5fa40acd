from .tensor import Graph, Tensor, apply_op, backward, branch
from .gradcheck import GradCheckResult, grad_check
from . import ops

__all__ = [
    "Graph",
    "Tensor",
    "apply_op",
    "backward",
    "branch",
    "GradCheckResult",
    "grad_check",
    "ops",
]
