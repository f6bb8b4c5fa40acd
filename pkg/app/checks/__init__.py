from .registry import registry
from .base import BaseGradientCheck, CheckReport
from .model_checks import EndToEndCheck, model_checks
from .op_checks import ProjectedOpCheck, op_checks


def register_checks():
    """Register the op and end-to-end gradient checks"""
    for check in op_checks() + model_checks():
        registry.register(check)


register_checks()

__all__ = [
    "registry",
    "register_checks",
    "BaseGradientCheck",
    "CheckReport",
    "EndToEndCheck",
    "ProjectedOpCheck",
]
