"""Non-local attention blocks, Poly-NL and their cubic-polynomial oracle."""

from .blocks import (
    LatentGnnParams,
    NlParams,
    PolyNlParams,
    conv1x1_forward,
    efficient_nl_forward,
    latentgnn_forward,
    nl_forward,
    polynl_core_forward,
    residual_nl,
    residual_polynl,
)
from .errors import CapacityError, NumericError, ShapeError
from .gradcheck import GradBundle, GradCheckReport, finite_diff, nl_backward, polynl_backward
from .oracle import InteractionTensor3, build_w3_nl, build_w3_polynl, poly3_elementwise, poly3_forward

__all__ = [
    "CapacityError",
    "GradBundle",
    "GradCheckReport",
    "InteractionTensor3",
    "LatentGnnParams",
    "NlParams",
    "NumericError",
    "PolyNlParams",
    "ShapeError",
    "build_w3_nl",
    "build_w3_polynl",
    "conv1x1_forward",
    "efficient_nl_forward",
    "finite_diff",
    "latentgnn_forward",
    "nl_backward",
    "nl_forward",
    "poly3_elementwise",
    "poly3_forward",
    "polynl_backward",
    "polynl_core_forward",
    "residual_nl",
    "residual_polynl",
]
