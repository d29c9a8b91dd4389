import numpy as np
import pytest

from ildl import SKEW, SYMMETRIC, SparseSymStore
from ildl.factor import ALPHA


def dense_random(n, seed, kind=SYMMETRIC, density=0.4):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n))
    g[rng.random((n, n)) > density] = 0.0
    return (g - g.T) / 2 if kind == SKEW else (g + g.T) / 2


def store_of(a, kind=SYMMETRIC):
    return SparseSymStore.from_dense(a, kind)


def entry_set(store):
    r, c, v = store.triplets()
    return sorted(zip(r.tolist(), c.tolist(), v.tolist()))


def _schur_oracle(f, original):
    """Active submatrix before step k, rebuilt from the final factors."""
    a = original.to_dense()
    p = f.perm.forward
    pap = a[np.ix_(p, p)]
    lo = f.unit_lower().toarray()
    d = f.D.to_sparse().toarray()

    def at(k):
        return pap[k:, k:] - lo[k:, :k] @ d[:k, :k] @ lo[k:, :k].T

    return at


def audit_violations(f, original, tol=1e-10):
    """Count rook/BK acceptance violations against an independent dense oracle."""
    at = _schur_oracle(f, original)
    bad = 0
    for k, size in zip(f.D.starts, f.D.sizes):
        s = at(k)
        scale = max(1.0, np.abs(s).max())
        if size == 1:
            w = np.abs(s[1:, 0]).max() if s.shape[0] > 1 else 0.0
            bad += abs(s[0, 0]) < ALPHA * w - tol * scale
        else:
            entry = abs(s[1, 0])
            for c in (0, 1):
                col = np.abs(s[:, c]).copy()
                col[c] = 0.0
                bad += entry < col.max() - tol * scale
    return bad


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
