"""Symmetric max-norm equilibration: Bunch's one-pass greedy scaling and a
one-index-at-a-time variant of Ruiz's iteration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..storage import SparseSymStore


@dataclass
class ScalingDiag:
    """Positive diagonal ``d`` such that ``diag(d) A diag(d)`` is equilibrated."""

    d: np.ndarray
    converged: bool = True
    sweeps: int = 0

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=np.float64)
        if not (np.all(np.isfinite(self.d)) and np.all(self.d > 0)):
            raise ValueError("scaling factors must be finite and positive")

    @classmethod
    def identity(cls, n: int) -> "ScalingDiag":
        return cls(np.ones(n))


def bunch_equilibrate(store: SparseSymStore) -> ScalingDiag:
    """Bunch's greedy scaling, left to right over the lower triangle.

    ``d[i] = 1 / max(sqrt|a_ii|, max_{j<i} d[j] |a_ij|)``; a row whose
    lower part is entirely zero keeps ``d[i] = 1``.
    """
    n = store.n
    d = np.ones(n)
    r, c, v = store.triplets()
    order = np.lexsort((c, r))
    r, c, v = r[order], c[order], np.abs(v[order])
    bounds = np.searchsorted(r, np.arange(n + 1))
    for i in range(n):
        lo, hi = bounds[i], bounds[i + 1]
        if hi == lo:
            continue
        cols, mags = c[lo:hi], v[lo:hi]
        off = cols != i
        m = float(np.max(d[cols[off]] * mags[off])) if off.any() else 0.0
        if not off.all():
            m = max(m, float(np.sqrt(mags[~off][0])))
        if m > 0:
            d[i] = 1.0 / m
    return ScalingDiag(d)


def _row_max(d: np.ndarray, i: int, by_col, by_row) -> float:
    # max_j |d_i a_ij d_j| over the full row (lower part plus mirrored column)
    best = 0.0
    r, v = by_col[i]
    if r.size:
        best = float(np.max(v * d[r])) * d[i]
    lr, lv = by_row[i]
    if lr.size:
        best = max(best, float(np.max(lv * d[lr])) * d[i])
    return best


def _full_rows(store: SparseSymStore):
    """Per index: (column part: rows, |vals|) and (row part: cols, |vals|)."""
    r, c, v = store.triplets()
    n = store.n
    v = np.abs(v)
    order = np.argsort(r, kind="stable")
    rb = np.searchsorted(r[order], np.arange(n + 1))
    by_row = [(c[order][rb[i]:rb[i + 1]], v[order][rb[i]:rb[i + 1]]) for i in range(n)]
    by_col = [(store.col_list[j], np.abs(store.col_val[j])) for j in range(n)]
    return by_col, by_row


def ruiz_equilibrate(store: SparseSymStore, epsilon: float = 1e-4, max_sweeps: int = 100) -> ScalingDiag:
    """Iterative max-norm scaling that visits one row/column pair at a time.

    For (skew-)symmetric input the row and column norms coincide, so one
    factor per index scales both sides and symmetry is preserved exactly.
    The sweep stops once every row max-norm is within ``epsilon`` of one.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    n = store.n
    by_col, by_row = _full_rows(store)
    for i in range(n):
        if not (by_col[i][0].size or by_row[i][0].size):
            raise ValueError(f"row {i} is entirely zero; the matrix has no support")
    d = np.ones(n)
    for sweep in range(1, max_sweeps + 1):
        for i in range(n):
            m = _row_max(d, i, by_col, by_row)
            d[i] /= np.sqrt(m)
        worst = max(abs(_row_max(d, i, by_col, by_row) - 1.0) for i in range(n)) if n else 0.0
        if worst <= epsilon:
            return ScalingDiag(d, converged=True, sweeps=sweep)
    return ScalingDiag(d, converged=False, sweeps=max_sweeps)


def apply_scaling(store: SparseSymStore, scaling: ScalingDiag) -> SparseSymStore:
    """Return a scaled copy ``diag(d) A diag(d)``; the input is untouched."""
    out = store.copy()
    out.scale(scaling.d)
    return out


def unapply_scaling(store: SparseSymStore, scaling: ScalingDiag) -> SparseSymStore:
    out = store.copy()
    out.scale(1.0 / scaling.d)
    return out


def scaled_row_maxima(store: SparseSymStore, d: np.ndarray | None = None) -> np.ndarray:
    """Max-norm of every row of ``diag(d) A diag(d)`` (full symmetric rows)."""
    m = abs(store.to_scipy())
    if d is not None:
        dd = sp.diags(d)
        m = dd @ m @ dd
    return np.asarray(m.tocsr().max(axis=1).todense()).ravel()
