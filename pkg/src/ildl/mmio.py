"""Matrix Market coordinate I/O for symmetric and skew-symmetric matrices."""
from __future__ import annotations

import io
import os

import numpy as np
import scipy.sparse as sp

from .storage import SKEW, SYMMETRIC, Permutation, SparseSymStore

_SYMMETRY = {"symmetric": SYMMETRIC, "skew-symmetric": SKEW}


class MatrixMarketError(ValueError):
    """Malformed or unsupported Matrix Market input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="ascii", errors="replace"), True
    return source, False


def load_matrix_market(source) -> SparseSymStore:
    """Read a ``coordinate real symmetric|skew-symmetric`` file.

    ``source`` is a path or an open text stream.  Entries above the
    diagonal are mirrored into the lower triangle.
    """
    fh, close = _open_text(source)
    try:
        return _parse(fh)
    finally:
        if close:
            fh.close()


def _parse(fh) -> SparseSymStore:
    header = fh.readline()
    lineno = 1
    tokens = header.strip().split()
    if len(tokens) != 5 or tokens[0].lower() != "%%matrixmarket":
        raise MatrixMarketError("missing %%MatrixMarket header", lineno)
    obj, fmt, field, symmetry = (t.lower() for t in tokens[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise MatrixMarketError(f"unsupported format '{obj} {fmt}'", lineno)
    if field != "real":
        raise MatrixMarketError(f"unsupported field '{field}' (only real)", lineno)
    if symmetry not in _SYMMETRY:
        raise MatrixMarketError(f"unsupported symmetry '{symmetry}'", lineno)
    kind = _SYMMETRY[symmetry]

    size = None
    for line in fh:
        lineno += 1
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        try:
            size = tuple(int(t) for t in parts)
        except ValueError:
            raise MatrixMarketError(f"bad size line {s!r}", lineno) from None
        if len(size) != 3 or size[0] != size[1] or min(size) < 0:
            raise MatrixMarketError(f"bad size line {s!r}", lineno)
        break
    if size is None:
        raise MatrixMarketError("missing size line", lineno)
    n, _, nnz = size

    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.float64)
    seen: dict[tuple[int, int], int] = {}
    count = 0
    for line in fh:
        lineno += 1
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        if len(parts) != 3:
            raise MatrixMarketError(f"expected 'row col value', got {s!r}", lineno)
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise MatrixMarketError(f"cannot parse entry {s!r}", lineno) from None
        if not (1 <= i <= n and 1 <= j <= n):
            raise MatrixMarketError(f"index ({i}, {j}) out of range [1, {n}]", lineno)
        if count >= nnz:
            raise MatrixMarketError(f"more than {nnz} entries", lineno)
        if kind == SKEW and i == j and v != 0.0:
            raise MatrixMarketError(f"nonzero diagonal ({i}, {i}) in skew-symmetric matrix", lineno)
        key = (max(i, j), min(i, j))
        if key in seen:
            raise MatrixMarketError(f"duplicate entry ({i}, {j}), first at line {seen[key]}", lineno)
        seen[key] = lineno
        rows[count], cols[count], vals[count] = i - 1, j - 1, v
        count += 1
    if count != nnz:
        raise MatrixMarketError(f"expected {nnz} entries, found {count}", lineno)
    return SparseSymStore.from_triplets(n, rows, cols, vals, kind)


def format_matrix_market(store: SparseSymStore, comment: str | None = None) -> str:
    buf = io.StringIO()
    write_matrix_market(store, buf, comment)
    return buf.getvalue()


def write_matrix_market(store: SparseSymStore, target, comment: str | None = None) -> None:
    """Write the lower triangle, column-major, with round-trip exact values."""
    symmetry = "skew-symmetric" if store.kind == SKEW else "symmetric"
    r, c, v = store.triplets()
    order = np.lexsort((r, c))
    lines = [f"%%MatrixMarket matrix coordinate real {symmetry}"]
    if comment:
        lines.extend(f"% {t}" for t in comment.splitlines())
    lines.append(f"{store.n} {store.n} {r.size}")
    lines.extend(f"{i + 1} {j + 1} {x!r}" for i, j, x in zip(r[order].tolist(), c[order].tolist(), v[order].tolist()))
    _emit(target, "\n".join(lines) + "\n")


def write_general(matrix, target, comment: str | None = None) -> None:
    """Write any sparse matrix as ``coordinate real general``."""
    m = sp.coo_matrix(matrix)
    order = np.lexsort((m.row, m.col))
    lines = ["%%MatrixMarket matrix coordinate real general"]
    if comment:
        lines.extend(f"% {t}" for t in comment.splitlines())
    lines.append(f"{m.shape[0]} {m.shape[1]} {m.nnz}")
    lines.extend(
        f"{i + 1} {j + 1} {x!r}"
        for i, j, x in zip(m.row[order].tolist(), m.col[order].tolist(), m.data[order].tolist())
    )
    _emit(target, "\n".join(lines) + "\n")


def write_permutation(perm: Permutation, target) -> None:
    """One line of ``n`` whitespace-separated 1-based indices."""
    _emit(target, " ".join(str(i + 1) for i in perm.forward.tolist()) + "\n")


def read_permutation(source) -> Permutation:
    fh, close = _open_text(source)
    try:
        forward = np.array(fh.read().split(), dtype=np.int64) - 1
    finally:
        if close:
            fh.close()
    return Permutation.from_forward(forward)


def _emit(target, text: str) -> None:
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", encoding="ascii") as fh:
            fh.write(text)
    else:
        target.write(text)
