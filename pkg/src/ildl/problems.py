"""Model problems: shifted 2D Laplacian (Helmholtz), 3D skew convection
operator, and seeded random test matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .storage import SKEW, SYMMETRIC, SparseSymStore


@dataclass(frozen=True)
class GridSpec:
    """``m`` interior points per axis on the unit square/cube, ``h = 1/(m+1)``."""

    m: int
    dims: int = 2

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("m must be at least 2")
        if self.dims not in (2, 3):
            raise ValueError("dims must be 2 or 3")

    @property
    def h(self) -> float:
        return 1.0 / (self.m + 1)

    @property
    def n(self) -> int:
        return self.m ** self.dims


def peclet_numbers(spec: GridSpec, sigma: float, tau: float, mu: float) -> tuple[float, float, float]:
    """Mesh Peclet numbers ``(sigma, tau, mu) * h / 2``."""
    half = spec.h / 2.0
    return sigma * half, tau * half, mu * half


def _axis_pairs(m: int, dims: int, axis: int):
    """Index pairs ``(i, i + stride)`` of grid neighbours along ``axis`` (x fastest)."""
    idx = np.arange(m ** dims).reshape((m,) * dims)  # C order: last axis is x
    ax = dims - 1 - axis
    lo = np.take(idx, np.arange(m - 1), axis=ax).ravel()
    hi = np.take(idx, np.arange(1, m), axis=ax).ravel()
    return lo, hi


def helmholtz_matrix(spec: GridSpec | int, alpha_over_h2: float = 0.0) -> SparseSymStore:
    """5-point ``-Laplace - alpha`` stencil on an ``m x m`` grid, ``alpha = c / h^2``.

    The global ``1/h^2`` is left out, giving diagonal ``4 - c`` and ``-1``
    couplings; Dirichlet boundary values are eliminated.
    """
    if isinstance(spec, int):
        spec = GridSpec(spec, 2)
    if spec.dims != 2:
        raise ValueError("helmholtz_matrix needs a 2D grid")
    m, n = spec.m, spec.n
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [np.full(n, 4.0 - alpha_over_h2)]
    for axis in range(2):
        lo, hi = _axis_pairs(m, 2, axis)
        rows.append(hi)
        cols.append(lo)
        vals.append(np.full(lo.size, -1.0))
    return SparseSymStore.from_triplets(n, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), SYMMETRIC)


def convdiff_skew_matrix(spec: GridSpec | int, peclets=(1.0, 1.0, 1.0)) -> SparseSymStore:
    """Skew part of the centred 7-point convection-diffusion operator.

    Only the convective couplings survive: ``A[i, i + e] = beta`` and
    ``A[i + e, i] = -beta`` along x (``gamma``, ``delta`` along y, z).
    """
    if isinstance(spec, int):
        spec = GridSpec(spec, 3)
    if spec.dims != 3:
        raise ValueError("convdiff_skew_matrix needs a 3D grid")
    m, n = spec.m, spec.n
    rows, cols, vals = [], [], []
    for axis, coef in enumerate(peclets):
        if coef == 0:
            continue
        lo, hi = _axis_pairs(m, 3, axis)
        # lower-triangle entry A[hi, lo] = -coef
        rows.append(hi)
        cols.append(lo)
        vals.append(np.full(lo.size, -float(coef)))
    if not rows:
        return SparseSymStore(n, SKEW)
    return SparseSymStore.from_triplets(n, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), SKEW)


def skew_spectrum(spec: GridSpec | int, peclets=(1.0, 1.0, 1.0)) -> np.ndarray:
    """Sorted imaginary parts ``2 (beta cos(j pi h) + gamma cos(k pi h) + delta cos(l pi h))``.

    ``j, k, l`` run over ``1..m``; the eigenvalues are ``i`` times these.
    """
    if isinstance(spec, int):
        spec = GridSpec(spec, 3)
    m, h = spec.m, spec.h
    c = np.cos(np.arange(1, m + 1) * np.pi * h)
    beta, gamma, delta = peclets
    vals = 2.0 * (beta * c[:, None, None] + gamma * c[None, :, None] + delta * c[None, None, :])
    return np.sort(vals.ravel())


def laplacian_2d_eigenvalues(m: int, shift: float = 0.0) -> np.ndarray:
    c = 2.0 * np.cos(np.arange(1, m + 1) * np.pi / (m + 1))
    return np.sort((4.0 - shift - c[:, None] - c[None, :]).ravel())


def random_dense(n: int, seed: int, kind: str = SYMMETRIC) -> np.ndarray:
    """``(G + G^T)/2`` (or ``(G - G^T)/2``) with standard normal ``G``."""
    g = np.random.default_rng(seed).standard_normal((n, n))
    return (g - g.T) / 2.0 if kind == SKEW else (g + g.T) / 2.0


def random_symmetric(n: int, seed: int) -> SparseSymStore:
    return SparseSymStore.from_dense(random_dense(n, seed, SYMMETRIC), SYMMETRIC)


def random_skew(n: int, seed: int) -> SparseSymStore:
    return SparseSymStore.from_dense(random_dense(n, seed, SKEW), SKEW)


def random_sparse(n: int, density: float, seed: int, kind: str = SYMMETRIC, diag: bool = True) -> SparseSymStore:
    """Seeded sparse (skew-)symmetric matrix with standard normal entries.

    Every row gets at least one entry so that no row is identically zero.
    """
    rng = np.random.default_rng(seed)
    low = sp.random(n, n, density=density, random_state=rng, data_rvs=rng.standard_normal, format="coo")
    r, c, v = low.row, low.col, low.data
    keep = r > c
    r, c, v = r[keep], c[keep], v[keep]
    if diag and kind == SYMMETRIC:
        d = rng.standard_normal(n)
        r, c, v = np.concatenate([r, np.arange(n)]), np.concatenate([c, np.arange(n)]), np.concatenate([v, d])
    else:
        # chain couplings guarantee a nonzero in every row
        chain = np.arange(n - 1)
        present = set(zip(r.tolist(), c.tolist()))
        extra = [(i + 1, i) for i in chain.tolist() if (i + 1, i) not in present]
        if extra:
            er, ec = np.array(extra).T
            r = np.concatenate([r, er])
            c = np.concatenate([c, ec])
            v = np.concatenate([v, rng.standard_normal(er.size)])
    return SparseSymStore.from_triplets(n, r, c, v, kind)
