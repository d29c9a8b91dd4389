from .equilibrate import (
    ScalingDiag,
    apply_scaling,
    bunch_equilibrate,
    ruiz_equilibrate,
    scaled_row_maxima,
    unapply_scaling,
)
from .ordering import amd_order, bandwidth, exact_min_degree_order, permute, rcm_order, symbolic_fill

__all__ = [
    "ScalingDiag",
    "apply_scaling",
    "unapply_scaling",
    "bunch_equilibrate",
    "ruiz_equilibrate",
    "scaled_row_maxima",
    "amd_order",
    "rcm_order",
    "exact_min_degree_order",
    "bandwidth",
    "permute",
    "symbolic_fill",
]
