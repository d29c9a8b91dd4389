"""Crout-ordered incomplete LDL^T factorization with symmetric pivoting.

``P A P^T ~= L D L^T`` where ``L`` is unit lower triangular and ``D`` is
block diagonal with 1x1 and 2x2 blocks.  Real skew-symmetric input is
factored with 2x2 blocks ``[[0, d], [-d, 0]]`` only.

Columns of ``L`` are computed one step at a time from delayed updates
(left-looking), so pivoting only ever needs the candidate columns of the
current Schur complement, which are assembled on demand.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular

from .storage import SKEW, SYMMETRIC, Permutation, SparseSymStore

ALPHA = (1.0 + math.sqrt(17.0)) / 8.0
# two computed column maxima count as equal within this relative tolerance
ROOK_TIE_RTOL = 1e-10

PIVOT_KINDS = ("rook", "bunch_kaufman", "none")


class FactorizationError(RuntimeError):
    pass


@dataclass
class FactorParams:
    drop_tol: float = 1e-4
    fill_factor: float = 2.0
    pivot_kind: str = "rook"
    static_pivot_shift: float | None = None
    static_pivoting: bool = True
    drop_norm: str = "2"

    def __post_init__(self):
        if self.pivot_kind == "bk":
            self.pivot_kind = "bunch_kaufman"
        if self.pivot_kind not in PIVOT_KINDS:
            raise ValueError(f"pivot_kind must be one of {PIVOT_KINDS}")
        if not 0.0 <= self.drop_tol < 1.0:
            raise ValueError("drop_tol must lie in [0, 1)")
        if not self.fill_factor > 0:
            raise ValueError("fill_factor must be positive")
        if self.drop_norm not in ("2", "max"):
            raise ValueError("drop_norm must be '2' or 'max'")


@dataclass(frozen=True)
class Block1:
    d: float


@dataclass(frozen=True)
class Block2:
    a: float
    b: float
    c: float


@dataclass(frozen=True)
class Block2Skew:
    d: float


class BlockDiag:
    """Block diagonal ``D`` stored as three length-``n`` arrays.

    ``diag[i] = D[i, i]``; for a 2x2 block starting at ``i``,
    ``sub[i] = D[i+1, i]`` and ``sup[i] = D[i, i+1]``.
    """

    def __init__(self, n: int, kind: str = SYMMETRIC):
        self.n = n
        self.kind = kind
        self.diag = np.zeros(n)
        self.sub = np.zeros(n)
        self.sup = np.zeros(n)
        self.starts: list[int] = []
        self.sizes: list[int] = []

    def set1(self, k: int, d: float) -> None:
        self.diag[k] = d
        self.starts.append(k)
        self.sizes.append(1)

    def set2(self, k: int, a: float, b: float, c: float) -> None:
        """Block ``[[a, b'], [b, c]]`` with ``b' = b`` (symmetric) or ``-b`` (skew)."""
        self.diag[k], self.diag[k + 1] = a, c
        self.sub[k] = b
        self.sup[k] = -b if self.kind == SKEW else b
        self.starts.append(k)
        self.sizes.append(2)

    @property
    def blocks(self):
        out = []
        for k, s in zip(self.starts, self.sizes):
            if s == 1:
                out.append(Block1(float(self.diag[k])))
            elif self.kind == SKEW:
                out.append(Block2Skew(float(self.sup[k])))
            else:
                out.append(Block2(float(self.diag[k]), float(self.sub[k]), float(self.diag[k + 1])))
        return out

    def _index(self):
        starts = np.asarray(self.starts, dtype=np.int64)
        sizes = np.asarray(self.sizes, dtype=np.int64)
        return starts[sizes == 1], starts[sizes == 2]

    def to_sparse(self) -> sp.csr_matrix:
        one, two = self._index()
        rows = np.concatenate([one, two, two + 1, two + 1, two])
        cols = np.concatenate([one, two, two + 1, two, two + 1])
        vals = np.concatenate([self.diag[one], self.diag[two], self.diag[two + 1], self.sub[two], self.sup[two]])
        nz = vals != 0
        return sp.csr_matrix((vals[nz], (rows[nz], cols[nz])), shape=(self.n, self.n))

    def solve(self, r: np.ndarray, transpose: bool = False) -> np.ndarray:
        """``D^{-1} r`` (or ``D^{-T} r``) blockwise in closed form."""
        one, two = self._index()
        x = np.empty_like(r, dtype=np.float64)
        x[one] = r[one] / self.diag[one]
        a, c = self.diag[two], self.diag[two + 1]
        b_low, b_up = self.sub[two], self.sup[two]
        if transpose:
            b_low, b_up = b_up, b_low
        r0, r1 = r[two], r[two + 1]
        if self.kind == SKEW:
            # [[0, d], [-d, 0]]^{-1} = (1/d) [[0, -1], [1, 0]]
            x[two] = -r1 / b_up
            x[two + 1] = r0 / b_up
        else:
            det = a * c - b_low * b_up
            x[two] = (c * r0 - b_up * r1) / det
            x[two + 1] = (a * r1 - b_low * r0) / det
        return x

    def nnz(self) -> int:
        """Structural nonzeros: one per 1x1 block, stored entries of 2x2 blocks."""
        one, two = self._index()
        count = one.size + 2 * two.size
        if self.kind != SKEW:
            count += int(np.count_nonzero(self.diag[two])) + int(np.count_nonzero(self.diag[two + 1]))
        return count


@dataclass
class PivotDecision:
    size: int
    swaps: list = field(default_factory=list)  # (position, target), applied in order
    columns: tuple = ()  # original labels that end up at k (and k+1)
    rule: str = ""
    static: bool = False
    audit: dict = field(default_factory=dict)


def apply_drop_rules(rows, vals, params: FactorParams, col_norm: float, cap: int | None = None):
    """Threshold then keep-largest dropping on one column of multipliers.

    Entries with ``|v| < drop_tol * col_norm`` go first; of the rest only
    the ``cap`` largest in magnitude survive (lower row wins a tie).
    Exact zeros are always removed.
    """
    rows = np.asarray(rows, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    mag = np.abs(vals)
    keep = (mag >= params.drop_tol * col_norm) & (mag > 0)
    rows, vals, mag = rows[keep], vals[keep], mag[keep]
    if cap is not None and rows.size > cap:
        best = np.lexsort((rows, -mag))[:cap]
        best.sort()
        rows, vals = rows[best], vals[best]
    return rows, vals


def _column_norm(vals: np.ndarray, kind: str) -> float:
    if not vals.size:
        return 0.0
    return float(np.linalg.norm(vals)) if kind == "2" else float(np.max(np.abs(vals)))


def _relabel(rows: np.ndarray, swaps) -> np.ndarray:
    for a, b in swaps:
        if a != b:
            rows = np.where(rows == a, b, np.where(rows == b, a, rows))
    return rows


def _offdiag_max(rows, vals, c):
    """(max |v| over rows != c, first row attaining it, value at row c)."""
    pos = np.searchsorted(rows, c)
    on = pos < rows.size and rows[pos] == c
    diag = float(vals[pos]) if on else 0.0
    mag = np.abs(vals)
    if on:
        mag = mag.copy()
        mag[pos] = -1.0
    if not mag.size or mag.max() <= 0:
        return 0.0, -1, diag
    j = int(np.argmax(mag))
    return float(mag[j]), int(rows[j]), diag


class CroutFactorizer:
    """Step-by-step driver for the incomplete factorization.

    The store is permuted in place (copy it first to keep the original).
    ``audit=True`` records every pivot decision in ``self.pivots``.
    """

    def __init__(self, store: SparseSymStore, params: FactorParams | None = None, audit: bool = False):
        self.params = params or FactorParams()
        self.A = store
        self.n = n = store.n
        self.kind = store.kind
        self.skew = store.kind == SKEW
        if self.skew and n % 2:
            raise FactorizationError("a skew-symmetric matrix of odd order is singular")
        self.L = SparseSymStore(n, SYMMETRIC)
        self.D = BlockDiag(n, store.kind)
        self.perm = list(range(n))
        self.block_of = [-1] * n
        self.k = 0
        self.buf = np.zeros(n)
        nnz_full = store.nnz_full
        ff = self.params.fill_factor
        self.cap = None if math.isinf(ff) or n == 0 else max(1, math.ceil(ff * nnz_full / n))
        shift = self.params.static_pivot_shift
        if shift is None:
            amax = store.max_abs()
            shift = math.sqrt(np.finfo(float).eps) * (amax if amax > 0 else 1.0)
        self.shift = shift
        self.static_pivots = 0
        self.audit = audit
        self.pivots: list[dict] = []
        self._cache: dict[int, tuple] = {}

    # ------------------------------------------------------------------
    def column_update(self, c: int):
        """Column ``c`` of the current Schur complement, rows ``>= k``.

        Returns sorted row indices and values: ``A[r, c]`` minus the
        delayed contributions ``sum L[r, :] D L[c, :]^T`` of every block
        touching row ``c`` of ``L``.
        """
        hit = self._cache.get(c)
        if hit is not None:
            return hit
        k = self.k
        A, L, D = self.A, self.L, self.D
        buf = self.buf
        parts = []

        rc = A.col_list[c]
        if rc.size:
            buf[rc] += A.col_val[c]
            parts.append(rc)
        row = A.row_list[c]
        js = [j for j in row[A.row_first[c]:] if j != c]
        if js:
            sign = -1.0 if self.skew else 1.0
            vals = np.empty(len(js))
            for t, j in enumerate(js):
                col = A.col_list[j]
                vals[t] = A.col_val[j][(col == c).argmax()]
            js_arr = np.asarray(js, dtype=np.int64)
            buf[js_arr] += sign * vals
            parts.append(js_arr)

        lrows, lvals, lfirst = L.col_list, L.col_val, L.col_first
        block_of = self.block_of
        seen = set()
        for i in L.row_list[c]:
            b = block_of[i]
            if b in seen:
                continue
            seen.add(b)
            if b + 1 < self.n and block_of[b + 1] == b:
                f0, f1 = lfirst[b], lfirst[b + 1]
                r0, v0 = lrows[b][f0:], lvals[b][f0:]
                r1, v1 = lrows[b + 1][f1:], lvals[b + 1][f1:]
                h0 = v0[r0 == c]
                h1 = v1[r1 == c]
                l0 = float(h0[0]) if h0.size else 0.0
                l1 = float(h1[0]) if h1.size else 0.0
                coef0 = D.diag[b] * l0 + D.sup[b] * l1
                coef1 = D.sub[b] * l0 + D.diag[b + 1] * l1
                if coef0 != 0.0 and r0.size:
                    buf[r0] -= coef0 * v0
                    parts.append(r0)
                if coef1 != 0.0 and r1.size:
                    buf[r1] -= coef1 * v1
                    parts.append(r1)
            else:
                f = lfirst[b]
                r0, v0 = lrows[b][f:], lvals[b][f:]
                h0 = v0[r0 == c]
                coef = D.diag[b] * float(h0[0]) if h0.size else 0.0
                if coef != 0.0:
                    buf[r0] -= coef * v0
                    parts.append(r0)

        if parts:
            rows = np.unique(np.concatenate(parts)) if len(parts) > 1 else np.sort(parts[0])
            vals = buf[rows]
            buf[rows] = 0.0
        else:
            rows, vals = np.empty(0, dtype=np.int64), np.empty(0)
        if self.skew:
            on = rows == c
            if on.any():
                vals = vals.copy()
                vals[on] = 0.0
        out = (rows, vals)
        self._cache[c] = out
        return out

    # ------------------------------------------------------------------
    # pivot selection (no side effects other than the column cache)
    def bk_pivot(self) -> PivotDecision:
        k = self.k
        rows, vals = self.column_update(k)
        w1, r, a11 = _offdiag_max(rows, vals, k)
        if w1 == 0.0 and a11 == 0.0:
            return PivotDecision(1, [], (k,), "static", static=True)
        if abs(a11) >= ALPHA * w1:
            return PivotDecision(1, [], (k,), "bk1", audit={"a": abs(a11), "omega": w1})
        rr, rv = self.column_update(r)
        wr, _, arr = _offdiag_max(rr, rv, r)
        if abs(a11) * wr >= ALPHA * w1 * w1:
            return PivotDecision(1, [], (k,), "bk2", audit={"a": abs(a11), "omega": w1, "omega_r": wr})
        if abs(arr) >= ALPHA * wr:
            return PivotDecision(1, [(k, r)], (r,), "bk3", audit={"a": abs(arr), "omega": wr})
        return PivotDecision(
            2, [(k + 1, r)], (k, r), "bk4",
            audit={"a11": abs(a11), "arr": abs(arr), "omega": w1, "omega_r": wr},
        )

    def rook_pivot(self) -> PivotDecision:
        k = self.k
        rows, vals = self.column_update(k)
        w1, r, a11 = _offdiag_max(rows, vals, k)
        if w1 == 0.0 and a11 == 0.0:
            return PivotDecision(1, [], (k,), "static", static=True)
        if abs(a11) >= ALPHA * w1:
            return PivotDecision(1, [], (k,), "rook1", audit={"a": abs(a11), "omega": w1})
        i, wi = k, w1
        for _ in range(self.n):
            ri, vi = self.column_update(i)
            _, r, _ = _offdiag_max(ri, vi, i)
            rr, rv = self.column_update(r)
            wr, _, arr = _offdiag_max(rr, rv, r)
            if abs(arr) >= ALPHA * wr:
                return PivotDecision(1, [(k, r)], (r,), "rook1r", audit={"a": abs(arr), "omega": wr})
            if wr <= wi * (1.0 + ROOK_TIE_RTOL):
                return self._two_by_two(i, r, "rook2", {"entry": wi, "omega_i": wi, "omega_r": wr})
            i, wi = r, wr
        raise FactorizationError("rook pivot search did not terminate")

    def skew_rook_pivot(self) -> PivotDecision:
        k = self.k
        rows, vals = self.column_update(k)
        w1, r, _ = _offdiag_max(rows, vals, k)
        if w1 == 0.0:
            return PivotDecision(2, [], (k, k + 1), "static", static=True)
        i, wi = k, w1
        for _ in range(self.n):
            ri, vi = self.column_update(i)
            _, r, _ = _offdiag_max(ri, vi, i)
            rr, rv = self.column_update(r)
            wr, _, _ = _offdiag_max(rr, rv, r)
            if wr <= wi * (1.0 + ROOK_TIE_RTOL):
                return self._two_by_two(i, r, "skew_rook", {"entry": wi, "omega_i": wi, "omega_r": wr})
            i, wi = r, wr
        raise FactorizationError("rook pivot search did not terminate")

    def skew_bunch_pivot(self) -> PivotDecision:
        k = self.k
        rows, vals = self.column_update(k)
        w1, r, _ = _offdiag_max(rows, vals, k)
        if w1 == 0.0:
            return PivotDecision(2, [], (k, k + 1), "static", static=True)
        return PivotDecision(2, [(k + 1, r)], (k, r), "skew_bunch", audit={"omega": w1})

    def _two_by_two(self, i, r, rule, audit) -> PivotDecision:
        k = self.k
        pos_r = i if r == k else r
        return PivotDecision(2, [(k, i), (k + 1, pos_r)], (i, r), rule, audit=audit)

    def choose_pivot(self) -> PivotDecision:
        kind = self.params.pivot_kind
        if self.skew:
            return self.skew_bunch_pivot() if kind == "bunch_kaufman" else self._skew_default(kind)
        if kind == "rook":
            return self.rook_pivot()
        if kind == "bunch_kaufman":
            return self.bk_pivot()
        rows, vals = self.column_update(self.k)
        _, _, a11 = _offdiag_max(rows, vals, self.k)
        return PivotDecision(1, [], (self.k,), "static" if a11 == 0.0 else "none", static=a11 == 0.0)

    def _skew_default(self, kind):
        if kind == "rook":
            return self.skew_rook_pivot()
        # no pivoting: pair k with k+1 as they stand
        k = self.k
        rows, vals = self.column_update(k)
        pos = np.searchsorted(rows, k + 1)
        d = vals[pos] if pos < rows.size and rows[pos] == k + 1 else 0.0
        return PivotDecision(2, [], (k, k + 1), "static" if d == 0.0 else "none", static=d == 0.0)

    # ------------------------------------------------------------------
    def _swap(self, a: int, b: int) -> None:
        if a == b:
            return
        self.A.swap_symmetric(a, b)
        self.L.swap_symmetric(a, b)
        self.perm[a], self.perm[b] = self.perm[b], self.perm[a]

    def step(self) -> PivotDecision:
        """Eliminate one 1x1 or 2x2 block and advance ``k``."""
        k, n = self.k, self.n
        if k >= n:
            raise FactorizationError("factorization already complete")
        self._cache = {}
        dec = self.choose_pivot()
        if dec.static and not self.params.static_pivoting:
            raise FactorizationError(f"structurally singular active column at step {k}")
        if dec.size == 2 and k + 1 >= n:
            raise FactorizationError("2x2 pivot requested at the last index")
        cols = [self.column_update(c) for c in dec.columns]
        for a, b in dec.swaps:
            self._swap(a, b)
        cols = [self._sorted(_relabel(r, dec.swaps), v) for r, v in cols]
        if self.audit:
            self.pivots.append({"step": k, "size": dec.size, "rule": dec.rule, **dec.audit})

        if dec.size == 1:
            rows, vals = cols[0]
            pos = np.searchsorted(rows, k)
            d = float(vals[pos]) if pos < rows.size and rows[pos] == k else 0.0
            if d == 0.0:
                d = self.shift
                self.static_pivots += 1
            below = rows > k
            self._store_column(k, rows[below], vals[below] / d)
            self.D.set1(k, d)
            self.block_of[k] = k
        else:
            (r0, v0), (r1, v1) = cols
            rows, x, y = _align(r0, v0, r1, v1)
            at = {int(r): t for t, r in enumerate(rows[:2].tolist()) if r in (k, k + 1)}
            xk = x[at[k]] if k in at else 0.0
            xk1 = x[at[k + 1]] if k + 1 in at else 0.0
            yk1 = y[at[k + 1]] if k + 1 in at else 0.0
            below = rows > k + 1
            x, y, rows = x[below], y[below], rows[below]
            if self.skew:
                d = -xk1
                if d == 0.0:
                    d = self.shift
                    self.static_pivots += 1
                l0, l1 = y / d, -x / d
                self.D.set2(k, 0.0, -d, 0.0)
            else:
                a, b, c = xk, xk1, yk1
                det = a * c - b * b
                if det == 0.0:
                    raise FactorizationError(f"singular 2x2 pivot at step {k}")
                l0 = (x * c - y * b) / det
                l1 = (y * a - x * b) / det
                self.D.set2(k, a, b, c)
            self._store_column(k, rows, l0)
            self._store_column(k + 1, rows, l1)
            self.block_of[k] = self.block_of[k + 1] = k

        for j in range(k, k + dec.size):
            self.A.advance_bi_index(j)
            self.L.advance_bi_index(j)
        self.k = k + dec.size
        return dec

    @staticmethod
    def _sorted(rows, vals):
        order = np.argsort(rows, kind="stable")
        return rows[order], vals[order]

    def _store_column(self, j, rows, mult):
        norm = _column_norm(mult, self.params.drop_norm)
        rows, mult = apply_drop_rules(rows, mult, self.params, norm, self.cap)
        self.L.append_column(j, rows, mult)

    def run(self) -> "Factorization":
        while self.k < self.n:
            self.step()
        return Factorization(
            L=self.L,
            D=self.D,
            perm=Permutation.from_forward(self.perm),
            A=self.A,
            params=self.params,
            static_pivots=self.static_pivots,
            pivots=self.pivots,
        )


def _align(r0, v0, r1, v1):
    rows = np.union1d(r0, r1)
    x = np.zeros(rows.size)
    y = np.zeros(rows.size)
    x[np.searchsorted(rows, r0)] = v0
    y[np.searchsorted(rows, r1)] = v1
    return rows, x, y


@dataclass
class Factorization:
    """Result of an incomplete factorization ``P A P^T ~= L D L^T``.

    ``A`` is the permuted matrix the factors approximate (the working copy).
    """

    L: SparseSymStore
    D: BlockDiag
    perm: Permutation
    A: SparseSymStore
    params: FactorParams
    static_pivots: int = 0
    pivots: list = field(default_factory=list)
    _tri: tuple | None = field(default=None, init=False, repr=False)

    @property
    def n(self) -> int:
        return self.L.n

    @property
    def kind(self) -> str:
        return self.D.kind

    def unit_lower(self) -> sp.csr_matrix:
        return (self.L.to_scipy(full=False) + sp.eye(self.n)).tocsr()

    def reconstruct(self) -> sp.csr_matrix:
        lo = self.unit_lower()
        return (lo @ self.D.to_sparse() @ lo.T).tocsr()

    def solve(self, r: np.ndarray, transpose: bool = False) -> np.ndarray:
        """``(L D L^T)^{-1} r`` for the permuted system (``D^{-T}`` if ``transpose``)."""
        lo, up = self._triangles()
        y = spsolve_triangular(lo, r, lower=True, unit_diagonal=True)
        return spsolve_triangular(up, self.D.solve(y, transpose), lower=False, unit_diagonal=True)

    def _triangles(self):
        if self._tri is None:
            lo = self.unit_lower()
            self._tri = (lo, lo.T.tocsr())
        return self._tri

    def block_counts(self) -> tuple[int, int]:
        sizes = np.asarray(self.D.sizes)
        return int(np.sum(sizes == 1)), int(np.sum(sizes == 2))

    def relative_residual(self, original: SparseSymStore) -> float:
        """``||P A P^T - L D L^T||_F / ||A||_F`` against an unpermuted matrix."""
        a = original.to_scipy().tocsr()
        p = self.perm.forward
        pap = a[p][:, p]
        diff = pap - self.reconstruct()
        denom = sp.linalg.norm(a)
        return float(sp.linalg.norm(diff) / denom) if denom else float(sp.linalg.norm(diff))


def ildl_factor(store: SparseSymStore, params: FactorParams | None = None, *, inplace: bool = False,
                audit: bool = False) -> Factorization:
    """Incomplete ``L D L^T`` of a symmetric (or, dispatched, skew) matrix.

    The input store is copied unless ``inplace`` is set, in which case it
    is permuted in place and returned as ``Factorization.A``.
    """
    if store.kind == SKEW:
        return skew_ildl_factor(store, params, inplace=inplace, audit=audit)
    work = store if inplace else store.copy()
    return CroutFactorizer(work, params, audit=audit).run()


def skew_ildl_factor(store: SparseSymStore, params: FactorParams | None = None, *, inplace: bool = False,
                     audit: bool = False) -> Factorization:
    """Skew-symmetric variant: only ``[[0, d], [-d, 0]]`` pivots.

    Multipliers of a pivot pair are ``[y/d, -x/d]`` for the two updated
    column entries ``x, y`` of a row, i.e. a column swap and a scaling.
    """
    if store.kind != SKEW:
        raise ValueError("skew_ildl_factor needs a skew-symmetric store")
    work = store if inplace else store.copy()
    return CroutFactorizer(work, params, audit=audit).run()


def fill_of(L: SparseSymStore, D: BlockDiag, A: SparseSymStore) -> float:
    """``nnz(L + D + L^T) / nnz(A)`` with the unit diagonal of ``L`` not counted."""
    nnz_a = A.nnz_full
    return (2 * L.nnz + D.nnz()) / nnz_a if nnz_a else float("nan")
