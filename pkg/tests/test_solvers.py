import json
import math

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import dense_random, store_of
from ildl import SKEW, SYMMETRIC, BlockDiag, FactorParams, Permutation, ildl_factor
from ildl.preprocess import ScalingDiag, bunch_equilibrate
from ildl.solvers import (
    SolverError,
    SolverParams,
    factor_preconditioner,
    ldl_precond_apply,
    minres_solve,
    spd_preconditioner,
    sqmr_solve,
)
from ildl.transform import spd_transform

EXACT = FactorParams(drop_tol=0.0, fill_factor=math.inf)
SOLVERS = [sqmr_solve, minres_solve]


def _exact_pair(a, kind=SYMMETRIC):
    f = ildl_factor(store_of(a, kind), EXACT)
    return f, factor_preconditioner(f, f.perm), spd_preconditioner(spd_transform(f), f.perm)


def test_params_defaults_and_validation():
    p = SolverParams()
    assert (p.rtol, p.max_iter) == (1e-6, 1000)
    for bad in ({"rtol": 0.0}, {"max_iter": -1}, {"solver_kind": "gmres"}):
        with pytest.raises(ValueError):
            SolverParams(**bad)


def test_sqmr_identity():
    b = np.array([1.0, -2.0, 0.5])
    x, rep = sqmr_solve(np.eye(3), b)
    assert rep.status == "converged" and rep.iterations == 1
    assert np.allclose(x, b)


def test_minres_identity_unit_vector():
    x, rep = minres_solve(sp.identity(4).tocsr(), np.eye(4)[0])
    assert rep.status == "converged" and rep.iterations == 1
    assert np.allclose(x, np.eye(4)[0])


def test_minres_two_iterations_on_diag_plus_minus_one():
    a = np.diag([1.0, -1.0])
    _, _, spd = _exact_pair(a)
    x, rep = minres_solve(a, np.array([1.0, 2.0]), precond=spd)
    assert rep.converged and rep.iterations <= 2
    assert np.allclose(x, [1.0, -2.0])


@pytest.mark.parametrize("kind", [SYMMETRIC, SKEW])
def test_exact_preconditioner_converges_fast(kind):
    for seed in range(4):
        a = dense_random(60, seed, kind)
        _, ldl, spd = _exact_pair(a, kind)
        b = a @ np.ones(60)
        for solve, pre in ((sqmr_solve, ldl), (minres_solve, spd)):
            x, rep = solve(a, b, precond=pre, skew=kind == SKEW)
            assert rep.converged and rep.iterations <= 3, (solve.__name__, rep.iterations)
            assert rep.relres <= 1e-6


def test_minres_identity_precond_monotone():
    a = dense_random(80, 7)
    _, rep = minres_solve(a, np.ones(80), SolverParams(rtol=1e-10, max_iter=60))
    h = np.array(rep.precond_residuals)
    assert np.all(np.diff(h) <= 1e-12)


def test_skew_minres_identity_precond_monotone():
    a = dense_random(40, 2, SKEW)
    x, rep = minres_solve(a, np.ones(40), SolverParams(rtol=1e-8, max_iter=200), skew=True)
    assert np.all(np.diff(rep.precond_residuals) <= 1e-12)
    assert rep.converged


def _precond_for(solve, a, kind):
    f = ildl_factor(store_of(a, kind), FactorParams(drop_tol=1e-2, fill_factor=1.0))
    if solve is sqmr_solve:
        return factor_preconditioner(f, f.perm)
    return spd_preconditioner(spd_transform(f), f.perm)


def _histories(solve, kind, scale):
    a = dense_random(40, 3, kind)
    pre = _precond_for(solve, a, kind)
    b = np.random.default_rng(1).standard_normal(40)
    p = SolverParams(rtol=1e-8, max_iter=100)
    _, r1 = solve(a, b, p, pre, skew=kind == SKEW)
    _, r2 = solve(a, scale * b, p, pre, skew=kind == SKEW)
    return r1.relres_history, r2.relres_history


@pytest.mark.parametrize("solve", SOLVERS)
@pytest.mark.parametrize("kind", [SYMMETRIC, SKEW])
def test_scale_invariance_exact_for_powers_of_two(solve, kind):
    h1, h2 = _histories(solve, kind, 64.0)
    assert h1 == h2


@pytest.mark.parametrize("solve, kind", [(sqmr_solve, SYMMETRIC), (sqmr_solve, SKEW), (minres_solve, SYMMETRIC)])
def test_scale_invariance_general_constant(solve, kind):
    h1, h2 = _histories(solve, kind, 37.5)
    assert len(h1) == len(h2)
    assert np.allclose(h1, h2, rtol=0, atol=1e-12)


@pytest.mark.parametrize("kind", [SYMMETRIC, SKEW])
def test_minres_attains_minimal_preconditioned_residual(kind):
    a = dense_random(30, 8, kind)
    pre = _precond_for(minres_solve, a, kind)
    minv = np.column_stack([pre(e) for e in np.eye(30)])
    minv = (minv + minv.T) / 2
    w = np.linalg.cholesky(minv).T  # ||r||_{M^-1} = ||w r||
    b = np.random.default_rng(4).standard_normal(30)
    _, rep = minres_solve(a, b, SolverParams(rtol=1e-14, max_iter=10), pre, skew=kind == SKEW)
    basis = [minv @ b]
    for k in range(1, 11):
        q, _ = np.linalg.qr(np.column_stack(basis))
        y = np.linalg.lstsq(w @ a @ q, w @ b, rcond=None)[0]
        best = np.linalg.norm(w @ (b - a @ q @ y)) / np.linalg.norm(w @ b)
        assert rep.precond_residuals[k] == pytest.approx(best, rel=1e-6)
        basis.append(minv @ (a @ basis[-1]))


@pytest.mark.parametrize("solve", SOLVERS)
def test_report_consistency(solve):
    a = dense_random(100, 11)
    f = ildl_factor(store_of(a), FactorParams(drop_tol=1e-2, fill_factor=1.5))
    pre = factor_preconditioner(f, f.perm) if solve is sqmr_solve else spd_preconditioner(spd_transform(f), f.perm)
    b = a @ np.ones(100)
    x, rep = solve(a, b, SolverParams(rtol=1e-8), pre)
    true = np.linalg.norm(b - a @ x) / np.linalg.norm(b)
    assert rep.relres == pytest.approx(true)
    assert rep.relres_history[0] == 1.0 and len(rep.relres_history) == rep.iterations + 1
    assert (rep.status == "converged") == (rep.relres <= 1e-8)
    d = json.loads(rep.to_json())
    assert {"status", "iterations", "relres", "relres_history", "fill", "precond_seconds", "solve_seconds"} <= set(d)


def test_max_iter_and_zero_rhs():
    a = dense_random(50, 1)
    x, rep = sqmr_solve(a, np.ones(50), SolverParams(max_iter=2))
    assert rep.status == "max_iter" and rep.iterations == 2
    x, rep = minres_solve(a, np.zeros(50))
    assert rep.converged and not x.any()


def test_sqmr_breakdown():
    # first curvature q^T A q vanishes for b = e1 on the swap matrix
    _, rep = sqmr_solve(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([1.0, 0.0]))
    assert rep.status == "breakdown"
    assert rep.relres_history


@pytest.mark.parametrize("solve", SOLVERS)
def test_dimension_and_nan_errors(solve):
    with pytest.raises(SolverError):
        solve(np.eye(3), np.ones(4))
    with pytest.raises(SolverError):
        solve(lambda v: np.ones(2), np.ones(3))
    with pytest.raises(FloatingPointError):
        solve(lambda v: np.full(3, np.nan), np.ones(3))


def test_minres_rejects_indefinite_preconditioner():
    with pytest.raises(SolverError):
        minres_solve(np.eye(2), np.array([0.0, 1.0]), precond=np.diag([1.0, -1.0]))


def test_ldl_precond_apply_examples():
    ident = BlockDiag(3)
    for i in range(3):
        ident.set1(i, 1.0)
    r = np.array([3.0, 1.0, -2.0])
    assert np.array_equal(ldl_precond_apply(sp.identity(3), ident, Permutation.identity(3), None, r), r)
    d = BlockDiag(2, SKEW)
    d.set2(0, 0.0, -2.0, 0.0)
    out = ldl_precond_apply(sp.identity(2), d, Permutation.identity(2), ScalingDiag.identity(2), np.array([2.0, -2.0]))
    # [[0, 2], [-2, 0]] @ (1, 1) = (2, -2)
    assert np.allclose(out, [1.0, 1.0])


@pytest.mark.parametrize("kind", [SYMMETRIC, SKEW])
def test_ldl_precond_apply_inverts_exact_factors(kind):
    a = dense_random(40, 6, kind)
    store = store_of(a, kind)
    s = bunch_equilibrate(store) if kind == SYMMETRIC else ScalingDiag.identity(40)
    scaled = a * np.outer(s.d, s.d)
    f = ildl_factor(store_of(scaled, kind), EXACT)
    x = np.random.default_rng(2).standard_normal(40)
    y = ldl_precond_apply(f.L, f.D, f.perm, s, a @ x)
    assert np.linalg.norm(y - x) <= 1e-12 * np.linalg.norm(x) * 1e2
    assert np.allclose(y, x, atol=1e-10)
