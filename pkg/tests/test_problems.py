import numpy as np
import pytest

from ildl import SKEW, SYMMETRIC
from ildl.problems import (
    GridSpec,
    convdiff_skew_matrix,
    helmholtz_matrix,
    laplacian_2d_eigenvalues,
    peclet_numbers,
    random_dense,
    random_sparse,
    skew_spectrum,
)


def test_grid_spec():
    g = GridSpec(80)
    assert g.n == 6400 and g.h == pytest.approx(1 / 81)
    assert GridSpec(20, 3).n == 8000
    with pytest.raises(ValueError):
        GridSpec(1)
    with pytest.raises(ValueError):
        GridSpec(4, 4)


def test_peclet_numbers():
    assert peclet_numbers(GridSpec(9, 3), 2.0, 4.0, 0.0) == pytest.approx((0.1, 0.2, 0.0))


@pytest.mark.parametrize("m, n, nnz", [(3, 9, 33), (80, 6400, 31680)])
def test_helmholtz_counts(m, n, nnz):
    a = helmholtz_matrix(m, 0.3)
    assert (a.n, a.nnz_full) == (n, nnz)
    assert a.kind == SYMMETRIC


@pytest.mark.parametrize("m, n, nnz", [(2, 8, 24), (20, 8000, 45600)])
def test_convdiff_counts(m, n, nnz):
    a = convdiff_skew_matrix(m, (20.0, 2.0, 1.0))
    assert (a.n, a.nnz_full) == (n, nnz)
    assert a.kind == SKEW


def test_helmholtz_stencil_and_spectrum():
    a = helmholtz_matrix(2, 0.0).to_dense()
    assert np.array_equal(a, [[4, -1, -1, 0], [-1, 4, 0, -1], [-1, 0, 4, -1], [0, -1, -1, 4]])
    assert np.allclose(np.linalg.eigvalsh(a), [2, 4, 4, 6])
    for m, c in ((3, 0.3), (5, 1.7)):
        ev = np.linalg.eigvalsh(helmholtz_matrix(m, c).to_dense())
        assert np.allclose(ev, laplacian_2d_eigenvalues(m, c), atol=1e-12)


def test_convdiff_sign_convention():
    a = convdiff_skew_matrix(2, (3.0, 0.0, 0.0)).to_dense()
    assert a[0, 1] == 3.0 and a[1, 0] == -3.0
    assert np.array_equal(a, -a.T)
    assert convdiff_skew_matrix(2, (0.0, 0.0, 0.0)).nnz_full == 0


def test_skew_spectrum_examples():
    assert np.array_equal(skew_spectrum(3, (0.0, 0.0, 0.0)), np.zeros(27))
    vals = skew_spectrum(2, (1.0, 0.0, 0.0))
    assert np.allclose(vals, [-1.0] * 4 + [1.0] * 4)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_skew_spectrum_matches_dense(m):
    pe = (1.3, 0.4, 0.25)
    ev = np.linalg.eigvals(convdiff_skew_matrix(m, pe).to_dense())
    assert np.abs(ev.real).max() <= 1e-10
    assert np.allclose(np.sort(ev.imag), skew_spectrum(m, pe), atol=1e-10)


def test_random_generators_are_seeded_and_structured():
    assert np.array_equal(random_dense(7, 3), random_dense(7, 3))
    assert not np.array_equal(random_dense(7, 3), random_dense(7, 4))
    s = random_dense(7, 1, SKEW)
    assert np.array_equal(s, -s.T)
    for kind in (SYMMETRIC, SKEW):
        a = random_sparse(50, 0.05, 2, kind).to_dense()
        assert np.all(np.abs(a).max(axis=1) > 0)
        assert np.array_equal(a, a.T if kind == SYMMETRIC else -a.T)
