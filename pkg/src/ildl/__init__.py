"""Incomplete LDL^T preconditioning for sparse symmetric and skew-symmetric systems."""
from .factor import BlockDiag, FactorParams, Factorization, fill_of, ildl_factor, skew_ildl_factor
from .storage import SKEW, SYMMETRIC, Permutation, SparseSymStore

__version__ = "0.1.0"

__all__ = [
    "SKEW",
    "SYMMETRIC",
    "BlockDiag",
    "FactorParams",
    "Factorization",
    "Permutation",
    "SparseSymStore",
    "fill_of",
    "ildl_factor",
    "skew_ildl_factor",
]
