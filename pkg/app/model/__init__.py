from .color_transform import (
    MONOMIAL_ORDER_TAG,
    ColorTransform,
    apply_quadratic_transform,
    monomial_features,
    monomials,
)
from .initialization import AffineInit, identity_params, init_params, init_w_affine
from .network import BoundParams, ModelParams, deepisp_forward, highlevel_forward, lowlevel_forward, parameter_shapes

__all__ = [
    "MONOMIAL_ORDER_TAG",
    "AffineInit",
    "BoundParams",
    "ColorTransform",
    "ModelParams",
    "apply_quadratic_transform",
    "deepisp_forward",
    "highlevel_forward",
    "identity_params",
    "init_params",
    "init_w_affine",
    "lowlevel_forward",
    "monomial_features",
    "monomials",
    "parameter_shapes",
]
