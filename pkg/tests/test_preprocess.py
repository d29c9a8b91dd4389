import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dense_random, store_of
from ildl import SKEW, SYMMETRIC
from ildl.preprocess import (
    ScalingDiag,
    amd_order,
    apply_scaling,
    bandwidth,
    bunch_equilibrate,
    exact_min_degree_order,
    permute,
    rcm_order,
    ruiz_equilibrate,
    scaled_row_maxima,
    symbolic_fill,
    unapply_scaling,
)
from ildl.problems import helmholtz_matrix, random_sparse


def test_scaling_diag_validation():
    with pytest.raises(ValueError):
        ScalingDiag(np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        ScalingDiag(np.array([1.0, np.inf]))


@pytest.mark.parametrize(
    "a, d",
    [
        (np.eye(3), [1.0, 1.0, 1.0]),
        (np.array([[4.0]]), [0.5]),
        (np.array([[0.0, 2.0], [2.0, 0.0]]), [1.0, 0.5]),
    ],
)
def test_bunch_examples(a, d):
    s = bunch_equilibrate(store_of(a))
    assert np.allclose(s.d, d, rtol=0, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 40), seed=st.integers(0, 10_000), kind=st.sampled_from([SYMMETRIC, SKEW]))
def test_bunch_bounds_entries(n, seed, kind):
    store = random_sparse(n, 0.2, seed, kind)
    d = bunch_equilibrate(store).d
    m = np.abs(apply_scaling(store, ScalingDiag(d)).to_dense())
    assert m.max() <= 1.0 + 1e-14
    # every row with a nonzero in its lower part attains 1 there
    low = np.tril(m)
    for i in range(n):
        if low[i].any():
            assert abs(low[i].max() - 1.0) <= 1e-14


def test_ruiz_examples():
    s = ruiz_equilibrate(store_of(np.array([[0.0, 1.0], [1.0, 0.0]])))
    assert np.allclose(s.d, [1.0, 1.0]) and s.converged and s.sweeps == 1
    s = ruiz_equilibrate(store_of(np.diag([4.0, 9.0])))
    assert np.allclose(s.d, [0.5, 1.0 / 3.0]) and s.sweeps == 1
    # the one-index-at-a-time iteration drives the product d0*d1 to 1/4
    a = np.array([[0.0, 4.0], [4.0, 0.0]])
    s = ruiz_equilibrate(store_of(a), epsilon=1e-8)
    scaled = np.diag(s.d) @ a @ np.diag(s.d)
    assert np.allclose(scaled, [[0, 1], [1, 0]], atol=1e-8)
    assert abs(s.d[0] * s.d[1] - 0.25) < 1e-8


def test_ruiz_errors_and_nonconvergence():
    with pytest.raises(ValueError):
        ruiz_equilibrate(store_of(np.diag([1.0, 0.0])))
    with pytest.raises(ValueError):
        ruiz_equilibrate(store_of(np.eye(2)), epsilon=0)
    a = np.array([[1e-8, 1.0], [1.0, 1e8]])
    s = ruiz_equilibrate(store_of(a), epsilon=1e-14, max_sweeps=1)
    assert not s.converged and s.sweeps == 1


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 40), seed=st.integers(0, 10_000), kind=st.sampled_from([SYMMETRIC, SKEW]))
def test_ruiz_contract(n, seed, kind):
    store = random_sparse(n, 0.2, seed, kind)
    s = ruiz_equilibrate(store)
    assert s.converged
    rows = scaled_row_maxima(store, s.d)
    assert np.all(np.abs(rows - 1.0) <= 1e-4)
    scaled = apply_scaling(store, s).to_dense()
    sign = -1.0 if kind == SKEW else 1.0
    assert np.array_equal(scaled, sign * scaled.T)


def test_scaling_is_pure_and_reversible():
    store = random_sparse(30, 0.2, 7)
    before = store.to_dense()
    s = ruiz_equilibrate(store)
    assert np.array_equal(store.to_dense(), before)
    back = unapply_scaling(apply_scaling(store, s), s).to_dense()
    assert np.allclose(back, before, rtol=1e-15, atol=0)


def test_rcm_examples():
    assert np.array_equal(rcm_order(store_of(np.eye(4))).forward, np.arange(4))
    # path 1-2-3 presented as vertices (2, 3, 1): edges 0-2 and 2-1 in 0-based labels
    a = np.eye(3)
    a[0, 2] = a[2, 0] = a[1, 2] = a[2, 1] = 1.0
    store = store_of(a)
    assert bandwidth(store) == 2
    assert bandwidth(store, rcm_order(store)) == 1
    star = np.eye(5)
    star[0, 1:] = star[1:, 0] = 1.0
    p = rcm_order(store_of(star))
    assert sorted(p.forward.tolist()) == list(range(5))
    assert bandwidth(store_of(star), p) <= 4


def test_rcm_reduces_bandwidth_of_shuffled_grid():
    g = helmholtz_matrix(6)
    shuffle = np.random.default_rng(0).permutation(g.n)
    from ildl import Permutation

    mixed = permute(g, Permutation.from_forward(shuffle))
    assert bandwidth(mixed, rcm_order(mixed)) <= bandwidth(g) + 2 < bandwidth(mixed)


def test_amd_examples():
    assert np.array_equal(amd_order(store_of(np.eye(5))).forward, np.arange(5))
    n = 8
    arrow = np.eye(n)
    arrow[0, :] = arrow[:, 0] = 1.0
    p = amd_order(store_of(arrow))
    # minimum degree defers the hub until the graph is down to one edge
    assert 0 in p.forward[-2:]
    assert symbolic_fill(store_of(arrow), p) == symbolic_fill(store_of(arrow), exact_min_degree_order(store_of(arrow)))
    assert symbolic_fill(store_of(arrow), p) == n - 1


def test_amd_grid_fill_not_worse_than_natural():
    g = helmholtz_matrix(4)
    assert symbolic_fill(g, amd_order(g)) <= symbolic_fill(g)
    g = helmholtz_matrix(12)
    assert symbolic_fill(g, amd_order(g)) < symbolic_fill(g)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 30), seed=st.integers(0, 10_000))
def test_orderings_are_bijections_and_close_to_exact_md(n, seed):
    store = random_sparse(n, 0.15, seed)
    for p in (amd_order(store), rcm_order(store)):
        assert sorted(p.forward.tolist()) == list(range(n))
    exact = symbolic_fill(store, exact_min_degree_order(store))
    approx = symbolic_fill(store, amd_order(store))
    assert approx <= 2 * exact + n


@pytest.mark.parametrize("kind", [SYMMETRIC, SKEW])
def test_permute_preserves_kind(kind):
    a = dense_random(10, 2, kind)
    store = store_of(a, kind)
    p = amd_order(store)
    out = permute(store, p)
    assert out.kind == kind
    assert np.array_equal(out.to_dense(), a[np.ix_(p.forward, p.forward)])
