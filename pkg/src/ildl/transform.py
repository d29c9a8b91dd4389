"""Positive definite preconditioner built from an indefinite ``L D L^T``.

Each block of ``D`` is written as ``B S B^T`` with ``S`` a signature block
(entries 0 and +-1) and ``B`` a 2x2 or scalar factor:

* 1x1 ``d``: ``B = sqrt|d|``, ``S = sign(d)``;
* symmetric 2x2: ``B = Q sqrt|Lambda|`` from the block eigendecomposition,
  ``S = sign(Lambda)``;
* skew 2x2 ``[[0, d], [-d, 0]]``: ``B = sqrt|d| I``, ``S = [[0, sgn d], [-sgn d, 0]]``.

With ``Lhat = L B`` we get ``L D L^T = Lhat S Lhat^T`` and
``M = Lhat Lhat^T = L |D| L^T`` is symmetric positive definite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular

from .factor import BlockDiag, Factorization
from .storage import SKEW


def sym2x2_eig(a: float, b: float, c: float):
    """Closed-form eigendecomposition of ``[[a, b], [b, c]]``.

    Returns ``(lam1, lam2, Q)`` with ``Q = [[cos t, sin t], [sin t, -cos t]]``
    orthogonal and ``Q diag(lam) Q^T`` equal to the block.
    """
    t = 0.5 * math.atan2(2.0 * b, a - c)
    co, si = math.cos(t), math.sin(t)
    lam1 = a * co * co + 2.0 * b * si * co + c * si * si
    lam2 = a * si * si - 2.0 * b * si * co + c * co * co
    return lam1, lam2, np.array([[co, si], [si, -co]])


@dataclass(frozen=True)
class SpdFactor:
    """``Lhat = L B`` kept in factored form.

    ``L`` is the unit lower factor (CSR); ``mix`` maps the start of each
    2x2 block to its ``B``; ``scale`` holds ``sqrt|d|`` for the other rows.
    ``abs_inv`` stores ``|D|^{-1}`` blockwise for the solve.
    """

    L: sp.csr_matrix
    LT: sp.csr_matrix
    kind: str
    scale: np.ndarray
    signature: np.ndarray  # +-1 per row (symmetric); sgn d on both rows of a skew pair
    mix: dict
    block_map: tuple
    abs_inv_diag: np.ndarray
    abs_inv_pairs: tuple  # (starts, w00, w01, w11) of the 2x2 blocks of |D|^{-1}

    @property
    def n(self) -> int:
        return self.L.shape[0]

    def b_matrix(self) -> sp.csr_matrix:
        n = self.n
        b = sp.lil_matrix((n, n))
        for k, size in self.block_map:
            if size == 2 and k in self.mix:
                b[k:k + 2, k:k + 2] = self.mix[k]
            else:
                for i in range(k, k + size):
                    b[i, i] = self.scale[i]
        return b.tocsr()

    def lhat(self) -> sp.csr_matrix:
        """Explicit ``Lhat`` (lower Hessenberg where 2x2 blocks mix columns)."""
        return (self.L @ self.b_matrix()).tocsr()

    def signature_matrix(self) -> sp.csr_matrix:
        n = self.n
        s = sp.lil_matrix((n, n))
        for k, size in self.block_map:
            if size == 2 and self.kind == SKEW:
                sg = self.signature[k]
                s[k, k + 1] = sg
                s[k + 1, k] = -sg
            else:
                for i in range(k, k + size):
                    s[i, i] = self.signature[i]
        return s.tocsr()

    def reconstruct(self) -> sp.csr_matrix:
        lh = self.lhat()
        return (lh @ self.signature_matrix() @ lh.T).tocsr()

    def preconditioner_matrix(self) -> sp.csr_matrix:
        lh = self.lhat()
        return (lh @ lh.T).tocsr()

    def solve(self, r: np.ndarray) -> np.ndarray:
        return apply_spd_preconditioner(self, r)


def spd_from_factors(fact_L, D: BlockDiag) -> SpdFactor:
    """SPD factor from a unit lower triangular ``L`` (any sparse format) and ``D``."""
    fact_L = sp.csr_matrix(fact_L)
    n = D.n
    scale = np.ones(n)
    signature = np.ones(n)
    abs_inv = np.zeros(n)
    mix = {}
    pair_starts, w00, w01, w11 = [], [], [], []
    for k, size in zip(D.starts, D.sizes):
        if size == 1:
            d = D.diag[k]
            if d == 0:
                raise ValueError(f"zero 1x1 pivot at {k}")
            scale[k] = math.sqrt(abs(d))
            signature[k] = 1.0 if d > 0 else -1.0
            abs_inv[k] = 1.0 / abs(d)
        elif D.kind == SKEW:
            d = D.sup[k]
            if d == 0:
                raise ValueError(f"zero skew pivot at {k}")
            scale[k] = scale[k + 1] = math.sqrt(abs(d))
            signature[k] = signature[k + 1] = 1.0 if d > 0 else -1.0
            abs_inv[k] = abs_inv[k + 1] = 1.0 / abs(d)
        else:
            lam1, lam2, q = sym2x2_eig(D.diag[k], D.sub[k], D.diag[k + 1])
            if lam1 == 0 or lam2 == 0:
                raise ValueError(f"singular 2x2 pivot at {k}")
            lam = np.array([lam1, lam2])
            mix[k] = q * np.sqrt(np.abs(lam))
            signature[k:k + 2] = np.sign(lam)
            w = q @ np.diag(1.0 / np.abs(lam)) @ q.T
            pair_starts.append(k)
            w00.append(w[0, 0])
            w01.append(w[0, 1])
            w11.append(w[1, 1])
    return SpdFactor(
        L=fact_L,
        LT=fact_L.T.tocsr(),
        kind=D.kind,
        scale=scale,
        signature=signature,
        mix=mix,
        block_map=tuple(zip(D.starts, D.sizes)),
        abs_inv_diag=abs_inv,
        abs_inv_pairs=(np.asarray(pair_starts, dtype=np.int64), np.asarray(w00), np.asarray(w01), np.asarray(w11)),
    )


def spd_transform_symmetric(f: Factorization) -> SpdFactor:
    """SPD factor for a symmetric ``L D L^T`` (2x2 blocks via eigendecomposition)."""
    if f.kind == SKEW:
        raise ValueError("use spd_transform_skew for skew factors")
    return spd_from_factors(f.unit_lower(), f.D)


def spd_transform_skew(f: Factorization) -> SpdFactor:
    """SPD factor for a skew ``L D L^T``: each row pair scaled by ``sqrt|d|``."""
    if f.kind != SKEW:
        raise ValueError("spd_transform_skew needs skew factors")
    return spd_from_factors(f.unit_lower(), f.D)


def spd_transform(f: Factorization) -> SpdFactor:
    return spd_transform_skew(f) if f.kind == SKEW else spd_transform_symmetric(f)


def apply_spd_preconditioner(f: SpdFactor, r: np.ndarray) -> np.ndarray:
    """``(Lhat Lhat^T)^{-1} r = L^{-T} |D|^{-1} L^{-1} r``."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (f.n,):
        raise ValueError(f"vector of length {f.n} expected, got shape {r.shape}")
    y = spsolve_triangular(f.L, r, lower=True, unit_diagonal=True)
    z = f.abs_inv_diag * y
    starts, w00, w01, w11 = f.abs_inv_pairs
    if starts.size:
        y0, y1 = y[starts], y[starts + 1]
        z[starts] = w00 * y0 + w01 * y1
        z[starts + 1] = w01 * y0 + w11 * y1
    return spsolve_triangular(f.LT, z, lower=False, unit_diagonal=True)
