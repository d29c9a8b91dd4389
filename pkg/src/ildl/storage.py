"""Lower-triangle sparse storage for symmetric and skew-symmetric matrices.

Columns are kept as a list of small numpy arrays (row indices and values),
rows as plain Python lists of column indices.  Two offset arrays,
``col_first`` and ``row_first``, split every column/row into the part that
lies before the current elimination step and the part that does not.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

SYMMETRIC = "symmetric"
SKEW = "skew"

_EMPTY_I = np.empty(0, dtype=np.int64)
_EMPTY_F = np.empty(0, dtype=np.float64)


@dataclass
class Permutation:
    """A permutation of ``0..n-1``.

    ``forward[new] = old``, so ``(P x)[i] = x[forward[i]]`` and
    ``(P A P^T)[a, b] = A[forward[a], forward[b]]``.
    """

    forward: np.ndarray
    inverse: np.ndarray

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        idx = np.arange(n, dtype=np.int64)
        return cls(idx, idx.copy())

    @classmethod
    def from_forward(cls, forward) -> "Permutation":
        forward = np.asarray(forward, dtype=np.int64)
        n = forward.size
        if not np.array_equal(np.sort(forward), np.arange(n)):
            raise ValueError("not a permutation of 0..n-1")
        inverse = np.empty_like(forward)
        inverse[forward] = np.arange(n, dtype=np.int64)
        return cls(forward, inverse)

    @property
    def n(self) -> int:
        return self.forward.size

    def then(self, other: "Permutation") -> "Permutation":
        """Permutation equal to applying ``self`` first and ``other`` second."""
        return Permutation.from_forward(self.forward[other.forward])

    def apply(self, x: np.ndarray) -> np.ndarray:
        return x[self.forward]

    def apply_transpose(self, x: np.ndarray) -> np.ndarray:
        out = np.empty_like(x)
        out[self.forward] = x
        return out

    def to_matrix(self) -> sp.csr_matrix:
        n = self.n
        return sp.csr_matrix((np.ones(n), (np.arange(n), self.forward)), shape=(n, n))


class SparseSymStore:
    """Symmetric or skew-symmetric matrix stored by its lower triangle.

    Symmetric stores may hold diagonal entries; skew stores never do.
    The same container holds the unit lower factor ``L`` (strictly lower,
    unit diagonal implicit), in which case ``kind`` only matters for how
    :meth:`to_scipy` mirrors the entries.
    """

    def __init__(self, n: int, kind: str = SYMMETRIC):
        if kind not in (SYMMETRIC, SKEW):
            raise ValueError(f"unknown symmetry kind {kind!r}")
        self.n = n
        self.kind = kind
        self.col_list = [_EMPTY_I for _ in range(n)]
        self.col_val = [_EMPTY_F for _ in range(n)]
        self.row_list: list[list[int]] = [[] for _ in range(n)]
        self.col_first = [0] * n
        self.row_first = [0] * n
        self.sorted_hint = False

    # ------------------------------------------------------------------
    # construction / conversion
    @classmethod
    def from_triplets(cls, n, rows, cols, vals, kind=SYMMETRIC, *, mirror=True):
        """Build a store from coordinate entries.

        Entries above the diagonal are mirrored into the lower triangle
        (negated for skew kind) when ``mirror`` is true.  Duplicates raise
        ``ValueError``; explicit zeros are dropped.
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if rows.size and (rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n):
            raise ValueError("index out of range")
        upper = rows < cols
        if upper.any():
            if not mirror:
                raise ValueError("entry above the diagonal")
            rows, cols = np.where(upper, cols, rows), np.where(upper, rows, cols)
            if kind == SKEW:
                vals = np.where(upper, -vals, vals)
        if kind == SKEW and np.any((rows == cols) & (vals != 0)):
            raise ValueError("nonzero diagonal entry in a skew-symmetric matrix")
        keep = vals != 0
        if kind == SKEW:
            keep &= rows != cols
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
        key = cols * n + rows
        order = np.argsort(key, kind="stable")
        key, rows, cols, vals = key[order], rows[order], cols[order], vals[order]
        if key.size > 1 and np.any(key[1:] == key[:-1]):
            dup = int(key[1:][key[1:] == key[:-1]][0])
            raise ValueError(f"duplicate entry ({dup % n + 1}, {dup // n + 1})")

        store = cls(n, kind)
        bounds = np.searchsorted(cols, np.arange(n + 1))
        for j in range(n):
            lo, hi = bounds[j], bounds[j + 1]
            if hi > lo:
                store.col_list[j] = rows[lo:hi].copy()
                store.col_val[j] = vals[lo:hi].copy()
        # rows sorted by column because entries are sorted column-major
        for r, c in zip(rows.tolist(), cols.tolist()):
            store.row_list[r].append(c)
        store.sorted_hint = True
        return store

    @classmethod
    def from_dense(cls, a, kind=SYMMETRIC):
        a = np.asarray(a, dtype=np.float64)
        r, c = np.nonzero(np.tril(a))
        return cls.from_triplets(a.shape[0], r, c, a[r, c], kind, mirror=False)

    @classmethod
    def from_scipy(cls, m, kind=SYMMETRIC):
        """Build from a full (both triangles) or lower-triangular scipy matrix."""
        low = sp.tril(sp.coo_matrix(m)).tocoo()
        return cls.from_triplets(m.shape[0], low.row, low.col, low.data, kind, mirror=False)

    def triplets(self):
        """Stored lower-triangle entries as ``(rows, cols, vals)`` arrays."""
        if self.n == 0:
            return _EMPTY_I, _EMPTY_I, _EMPTY_F
        lens = [c.size for c in self.col_list]
        rows = np.concatenate(self.col_list) if sum(lens) else _EMPTY_I
        vals = np.concatenate(self.col_val) if sum(lens) else _EMPTY_F
        cols = np.repeat(np.arange(self.n, dtype=np.int64), lens)
        return rows, cols, vals

    def to_scipy(self, full: bool = True) -> sp.csc_matrix:
        """Return the matrix as CSC; ``full`` mirrors the strict lower part."""
        r, c, v = self.triplets()
        n = self.n
        if not full:
            return sp.csc_matrix((v, (r, c)), shape=(n, n))
        off = r != c
        sign = -1.0 if self.kind == SKEW else 1.0
        rr = np.concatenate([r, c[off]])
        cc = np.concatenate([c, r[off]])
        vv = np.concatenate([v, sign * v[off]])
        return sp.csc_matrix((vv, (rr, cc)), shape=(n, n))

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def copy(self) -> "SparseSymStore":
        new = SparseSymStore(self.n, self.kind)
        new.col_list = [c.copy() for c in self.col_list]
        new.col_val = [v.copy() for v in self.col_val]
        new.row_list = [list(r) for r in self.row_list]
        new.col_first = list(self.col_first)
        new.row_first = list(self.row_first)
        new.sorted_hint = self.sorted_hint
        return new

    # ------------------------------------------------------------------
    # queries
    @property
    def nnz(self) -> int:
        """Number of stored (lower-triangle) entries."""
        return sum(c.size for c in self.col_list)

    @property
    def nnz_full(self) -> int:
        """Number of nonzeros of the full matrix, both triangles counted."""
        r, c, _ = self.triplets()
        diag = int(np.count_nonzero(r == c))
        return 2 * (r.size - diag) + diag

    def max_abs(self) -> float:
        return max((float(np.abs(v).max()) for v in self.col_val if v.size), default=0.0)

    def get(self, i: int, j: int) -> float:
        """Entry ``A[i, j]`` of the full matrix."""
        sign = 1.0
        if i < j:
            i, j = j, i
            sign = -1.0 if self.kind == SKEW else 1.0
        hit = np.flatnonzero(self.col_list[j] == i)
        return sign * float(self.col_val[j][hit[0]]) if hit.size else 0.0

    def subcolumn(self, i: int, start: int | None = None):
        """Entries of column ``i`` whose row index is at least the current step.

        Relies on the bi-index being current; ``start`` is accepted for
        readability and used only to filter when the offsets were never
        advanced (``col_first[i] == 0``).
        """
        f = self.col_first[i]
        rows, vals = self.col_list[i][f:], self.col_val[i][f:]
        if start is not None and f == 0 and rows.size and rows.min() < start:
            keep = rows >= start
            rows, vals = rows[keep], vals[keep]
        return list(zip(rows.tolist(), vals.tolist()))

    # ------------------------------------------------------------------
    # mutation
    def append_column(self, j: int, rows, vals) -> None:
        """Append entries to column ``j`` and register them in the row lists."""
        rows = np.asarray(rows, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if not rows.size:
            return
        self.col_list[j] = np.concatenate([self.col_list[j], rows])
        self.col_val[j] = np.concatenate([self.col_val[j], vals])
        rl = self.row_list
        for r in rows.tolist():
            rl[r].append(j)

    def scale(self, d: np.ndarray) -> None:
        """In-place ``A <- diag(d) A diag(d)``."""
        for j in range(self.n):
            if self.col_val[j].size:
                self.col_val[j] = self.col_val[j] * d[self.col_list[j]] * d[j]

    def swap_symmetric(self, p: int, q: int) -> None:
        """Exchange rows and columns ``p`` and ``q`` symmetrically.

        Both indices must be at or beyond the current elimination step.
        Column arrays of ``p`` and ``q`` are rebuilt by moving the existing
        arrays; entries of earlier columns are relabelled in place so the
        bi-index segments stay valid.
        """
        n = self.n
        if not (0 <= p < n and 0 <= q < n):
            raise IndexError(f"swap indices ({p}, {q}) out of range for n={n}")
        if p == q:
            return
        if p > q:
            p, q = q, p
        sign = -1.0 if self.kind == SKEW else 1.0
        cl, cv, rl = self.col_list, self.col_val, self.row_list
        old_rp, old_rq = rl[p], rl[q]

        # columns j < p: rows p and q trade labels in place
        for j in set(c for c in old_rp if c < p) | set(c for c in old_rq if c < p):
            rows = cl[j]
            at_p = rows == p
            at_q = rows == q
            rows[at_p] = q
            rows[at_q] = p

        rp, vp = cl[p], cv[p]
        rq, vq = cl[q], cv[q]
        diag_p = vp[rp == p]
        diag_q = vq[rq == q]
        qp = vp[rp == q]
        mid_mask = (rp > p) & (rp < q)
        mid_p_rows, mid_p_vals = rp[mid_mask], vp[mid_mask]  # old A(j, p)
        below_p = rp > q
        below_q = rq > q
        bp_rows, bp_vals = rp[below_p], vp[below_p]
        bq_rows, bq_vals = rq[below_q], vq[below_q]

        # old A(q, j) for p < j < q, read from row q
        mid_q_cols = [c for c in old_rq if p < c < q]
        mid_q_vals = []
        for j in mid_q_cols:
            pos = (cl[j] == q).argmax()
            mid_q_vals.append(cv[j][pos])

        # new column p: diag <- old (q,q); (q,p) <- sign*(q,p); (j,p) <- sign*A(q,j); below <- old col q
        new_rp = [np.array([p] if diag_q.size else [], dtype=np.int64)]
        new_vp = [diag_q.copy()]
        if qp.size:
            new_rp.append(np.array([q], dtype=np.int64))
            new_vp.append(sign * qp)
        if mid_q_cols:
            new_rp.append(np.array(mid_q_cols, dtype=np.int64))
            new_vp.append(sign * np.array(mid_q_vals))
        new_rp.append(bq_rows)
        new_vp.append(bq_vals)
        new_rq = [np.array([q] if diag_p.size else [], dtype=np.int64), bp_rows]
        new_vq = [diag_p.copy(), bp_vals]
        cl[p], cv[p] = np.concatenate(new_rp), np.concatenate(new_vp)
        cl[q], cv[q] = np.concatenate(new_rq), np.concatenate(new_vq)

        # columns p < j < q: entry (q, j) <- sign * old A(j, p)
        had_q = dict(zip(mid_q_cols, range(len(mid_q_cols))))
        new_q = dict(zip(mid_p_rows.tolist(), mid_p_vals.tolist()))
        for j in set(had_q) | set(new_q):
            rows, vals = cl[j], cv[j]
            if j in new_q and j in had_q:
                vals[(rows == q).argmax()] = sign * new_q[j]
            elif j in new_q:
                cl[j] = np.append(rows, q)
                cv[j] = np.append(vals, sign * new_q[j])
            else:
                pos = (rows == q).argmax()
                last = rows.size - 1
                rows[pos], vals[pos] = rows[last], vals[last]
                cl[j], cv[j] = rows[:last], vals[:last]

        # row lists
        new_row_p = [c for c in old_rq if c < p]
        if diag_q.size:
            new_row_p.append(p)
        new_row_q = [c for c in old_rp if c < p]
        if qp.size:
            new_row_q.append(p)
        new_row_q.extend(sorted(new_q))
        if diag_p.size:
            new_row_q.append(q)
        rl[p], rl[q] = new_row_p, new_row_q
        self.row_first[p], self.row_first[q] = self.row_first[q], self.row_first[p]
        self.col_first[p], self.col_first[q] = self.col_first[q], self.col_first[p]

        for j in set(had_q) ^ set(new_q):
            row = rl[j]
            # new (j, p) comes from old (q, j)
            if j in had_q:
                row.append(p)
            else:
                pos = row.index(p, self.row_first[j])
                row[pos] = row[-1]
                row.pop()

        in_p = set(bp_rows.tolist())
        in_q = set(bq_rows.tolist())
        for i in in_p ^ in_q:
            row = rl[i]
            if i in in_p:
                row[row.index(p, self.row_first[i])] = q
            else:
                row[row.index(q, self.row_first[i])] = p

    def advance_bi_index(self, k: int) -> None:
        """Move the offsets past everything indexed ``k``.

        Afterwards every column's prefix ``[:col_first[i]]`` holds the rows
        ``<= k`` and every row's prefix ``[:row_first[i]]`` holds the
        columns ``<= k``.
        """
        cl, cv, cf = self.col_list, self.col_val, self.col_first
        for i in self.row_list[k]:
            rows = cl[i]
            f = cf[i]
            mask = rows[f:] == k
            at = int(mask.argmax()) if mask.size else 0
            if not mask.size or not mask[at]:
                continue
            pos = f + at
            if pos != f:
                vals = cv[i]
                rows[f], rows[pos] = rows[pos], rows[f]
                vals[f], vals[pos] = vals[pos], vals[f]
            cf[i] = f + 1
        rl, rf = self.row_list, self.row_first
        for r in cl[k].tolist():
            row = rl[r]
            f = rf[r]
            try:
                pos = row.index(k, f)
            except ValueError:
                continue
            row[f], row[pos] = row[pos], row[f]
            rf[r] = f + 1

    def check_bi_index(self, k: int) -> bool:
        """Audit the segment property for step ``k`` over all columns and rows."""
        for i in range(self.n):
            rows = self.col_list[i]
            f = self.col_first[i]
            if np.any(rows[:f] >= k) or np.any(rows[f:] < k):
                return False
            row = self.row_list[i]
            g = self.row_first[i]
            if any(c >= k for c in row[:g]) or any(c < k for c in row[g:]):
                return False
        return True
