"""Preconditioned Krylov solvers: symmetric QMR and MINRES.

Operators and preconditioners are plain callables ``v -> w`` (or objects
with an ``apply`` method).  ``sqmr_solve`` takes the indefinite ``L D L^T``
preconditioner as is; ``minres_solve`` needs a positive definite one.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .factor import BlockDiag
from .preprocess import ScalingDiag
from .storage import SKEW, Permutation

BREAKDOWN_TOL = 1e-30
RECOMPUTE_EVERY = 10
SOLVER_KINDS = ("sqmr", "minres")


class SolverError(ValueError):
    pass


@dataclass
class SolverParams:
    rtol: float = 1e-6
    max_iter: int = 1000
    solver_kind: str = "sqmr"

    def __post_init__(self):
        if not self.rtol > 0:
            raise ValueError("rtol must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")
        if self.solver_kind not in SOLVER_KINDS:
            raise ValueError(f"solver_kind must be one of {SOLVER_KINDS}")


@dataclass
class SolveReport:
    status: str
    iterations: int
    relres: float
    relres_history: list
    solver: str = ""
    fill: float | None = None
    precond_seconds: float = 0.0
    solve_seconds: float = 0.0
    precond_residuals: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_dict(self) -> dict:
        d = asdict(self)
        if not d["precond_residuals"]:
            del d["precond_residuals"]
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _as_apply(op, n):
    if op is None:
        return lambda v: v.copy()
    if sp.issparse(op) or isinstance(op, np.ndarray):
        return lambda v: op @ v
    if hasattr(op, "apply"):
        return op.apply
    return op


def _checked(fn, n, what):
    def call(v):
        w = np.asarray(fn(v), dtype=np.float64)
        if w.shape != (n,):
            raise SolverError(f"{what} returned shape {w.shape}, expected ({n},)")
        if not np.all(np.isfinite(w)):
            raise FloatingPointError(f"{what} produced a non-finite value")
        return w
    return call


def _setup(A, b, precond):
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 1:
        raise SolverError("right-hand side must be a vector")
    n = b.size
    if hasattr(A, "shape") and tuple(A.shape) != (n, n):
        raise SolverError(f"operator shape {A.shape} does not match rhs length {n}")
    return b, n, _checked(_as_apply(A, n), n, "operator"), _checked(_as_apply(precond, n), n, "preconditioner")


def _finish(name, x, res_norm_fn, bnorm, history, it, status, rtol, extra=None):
    relres = res_norm_fn(x) / bnorm
    if status != "breakdown":
        status = "converged" if relres <= rtol else "max_iter"
    if history:
        history[-1] = relres
    return x, SolveReport(status, it, relres, history, solver=name, precond_residuals=extra or [])


def sqmr_solve(A, b, params: SolverParams | None = None, precond=None, *, skew: bool = False,
               precond_transpose=None):
    """Symmetric QMR with an unsplit symmetric (possibly indefinite) preconditioner.

    With ``skew=True`` the iteration runs on the symmetric system
    ``[[0, A], [A^T, 0]] [y; x] = [b; c]`` with preconditioner
    ``[[0, M], [M^T, 0]]``; the preconditioned operator is then
    ``diag(M^{-1} A, M^{-1} A)``.  Convergence and residuals refer to
    ``A x = b``.  ``precond_transpose`` applies ``M^{-T}`` (defaults to
    ``-precond`` for a skew ``M`` given as a factorization-based object,
    else to ``precond``).
    """
    params = params or SolverParams(solver_kind="sqmr")
    t0 = time.perf_counter()
    b, n, apply_a, apply_m = _setup(A, b, precond)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), SolveReport("converged", 0, 0.0, [0.0], solver="sqmr")

    if skew:
        if precond_transpose is None:
            precond_transpose = getattr(precond, "apply_transpose", None) or _as_apply(precond, n)
        apply_mt = _checked(precond_transpose, n, "preconditioner transpose")

        def op(v):
            return np.concatenate([apply_a(v[n:]), -apply_a(v[:n])])

        def minv(v):
            return np.concatenate([apply_mt(v[n:]), apply_m(v[:n])])

        # Second block rhs c = u + (|u|/|Au|) A u with u = M^{-1} b: since u^T A u = 0,
        # the first Lanczos product is 2|u|^2 and never vanishes, and the A u
        # term keeps the first curvature q^T K q away from zero when M^{-1} ~ I.
        u = apply_m(b)
        au = apply_a(u)
        nau = float(np.linalg.norm(au))
        c2 = u + (float(np.linalg.norm(u)) / nau) * au if nau > 0 else u
        rhs = np.concatenate([b, c2])
        res_norm = lambda z: float(np.linalg.norm(b - apply_a(z[n:])))  # noqa: E731
        part = slice(n, 2 * n)
    else:
        op, minv, rhs = apply_a, apply_m, b
        res_norm = lambda z: float(np.linalg.norm(b - apply_a(z)))  # noqa: E731
        part = slice(0, n)

    def orig_res(res_full):
        return res_full[: n] if skew else res_full

    N = rhs.size
    x = np.zeros(N)
    r = rhs.copy()  # Lanczos residual
    res = rhs.copy()  # tracked true residual
    q = minv(r)
    rho = float(r @ q)
    tau = float(np.linalg.norm(r))
    theta = 0.0
    d = np.zeros(N)
    ad = np.zeros(N)
    history = [1.0]
    status = "max_iter"
    it = 0
    best = (1.0, x.copy())
    if abs(rho) < BREAKDOWN_TOL:
        status = "breakdown"
    while status != "breakdown" and it < params.max_iter:
        it += 1
        t = op(q)
        sigma = float(q @ t)
        if abs(sigma) < BREAKDOWN_TOL:
            status = "breakdown"
            it -= 1
            break
        alpha = rho / sigma
        r -= alpha * t
        theta_old = theta
        theta = float(np.linalg.norm(r)) / tau
        c = 1.0 / math.sqrt(1.0 + theta * theta)
        tau = tau * theta * c
        coef = c * c * theta_old * theta_old
        d = coef * d + (c * c * alpha) * q
        ad = coef * ad + (c * c * alpha) * t
        x += d
        res -= ad
        if it % RECOMPUTE_EVERY == 0:
            res = rhs - op(x)
        rel = float(np.linalg.norm(orig_res(res))) / bnorm
        if rel <= params.rtol:
            res = rhs - op(x)
            rel = float(np.linalg.norm(orig_res(res))) / bnorm
        history.append(rel)
        if rel < best[0]:
            best = (rel, x.copy())
        if rel <= params.rtol:
            status = "converged"
            break
        u = minv(r)
        rho_new = float(r @ u)
        if abs(rho_new) < BREAKDOWN_TOL:
            status = "breakdown"
            break
        beta = rho_new / rho
        q = u + beta * q
        rho = rho_new
    if status != "converged" and best[0] < history[-1]:
        x = best[1]
    sol = x[part].copy()
    out, report = _finish("sqmr", sol, lambda z: res_norm(_embed(z, n, skew)), bnorm, history, it, status,
                          params.rtol)
    report.solve_seconds = time.perf_counter() - t0
    return out, report


def _embed(z, n, skew):
    if not skew:
        return z
    full = np.zeros(2 * n)
    full[n:] = z
    return full


def minres_solve(A, b, params: SolverParams | None = None, precond=None, *, skew: bool = False):
    """Preconditioned MINRES with a symmetric positive definite preconditioner.

    For skew ``A`` the Lanczos matrix in the ``M``-inner product is skew
    tridiagonal (zero diagonal, superdiagonal ``-beta``); the same Givens
    QR then minimizes the preconditioned residual.
    """
    params = params or SolverParams(solver_kind="minres")
    t0 = time.perf_counter()
    b, n, apply_a, apply_m = _setup(A, b, precond)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), SolveReport("converged", 0, 0.0, [0.0], solver="minres")
    eps_sign = -1.0 if skew else 1.0

    x = np.zeros(n)
    res = b.copy()
    v = b.copy()
    z = apply_m(v)
    bz = float(v @ z)
    if bz < 0:
        raise SolverError("preconditioner is not positive definite")
    beta = math.sqrt(bz)
    v /= beta
    z /= beta
    v_old = np.zeros(n)
    beta1 = beta
    phibar = beta
    c_old, s_old = 1.0, 0.0  # rotation j-2
    c, s = 1.0, 0.0  # rotation j-1
    w_old = np.zeros(n)
    w_older = np.zeros(n)
    aw_old = np.zeros(n)
    aw_older = np.zeros(n)
    history = [1.0]
    pres = [1.0]
    status = "max_iter"
    it = 0
    while it < params.max_iter:
        it += 1
        p = apply_a(z)
        alpha = 0.0 if skew else float(z @ p)
        vt = p - alpha * v - (eps_sign * beta) * v_old
        zt = apply_m(vt)
        bz = float(vt @ zt)
        if bz < -1e-12 * float(np.linalg.norm(vt)) * float(np.linalg.norm(zt)):
            raise SolverError("preconditioner is not positive definite")
        beta_next = math.sqrt(max(bz, 0.0))

        # column j of the Lanczos matrix is (eps*beta_j, alpha_j, beta_{j+1})
        up = eps_sign * beta if it > 1 else 0.0
        eps_j = s_old * up
        x_mid = c_old * up
        delta = c * x_mid + s * alpha
        gamma = -s * x_mid + c * alpha
        rho = math.hypot(gamma, beta_next)
        if rho == 0.0:
            status = "breakdown"
            it -= 1
            break
        c_new, s_new = gamma / rho, beta_next / rho
        phi = c_new * phibar
        phibar = -s_new * phibar

        w = (z - delta * w_old - eps_j * w_older) / rho
        aw = (p - delta * aw_old - eps_j * aw_older) / rho
        x += phi * w
        res -= phi * aw
        if it % RECOMPUTE_EVERY == 0:
            res = b - apply_a(x)
        rel = float(np.linalg.norm(res)) / bnorm
        if rel <= params.rtol:
            res = b - apply_a(x)
            rel = float(np.linalg.norm(res)) / bnorm
        history.append(rel)
        pres.append(abs(phibar) / beta1)
        if rel <= params.rtol:
            status = "converged"
            break
        if beta_next <= 1e-14 * beta1:
            # invariant subspace reached; the iterate is as good as it gets
            break

        w_older, w_old = w_old, w
        aw_older, aw_old = aw_old, aw
        c_old, s_old, c, s = c, s, c_new, s_new
        v_old = v
        v = vt / beta_next
        z = zt / beta_next
        beta = beta_next
    x_out, report = _finish("minres", x, lambda y: float(np.linalg.norm(b - apply_a(y))), bnorm, history, it,
                            status, params.rtol, pres)
    report.solve_seconds = time.perf_counter() - t0
    return x_out, report


class Preconditioner:
    """``r -> S P^T (L D L^T)^{-1} P S r`` for the original system.

    ``solve`` acts on the scaled, permuted system; ``perm`` and ``scaling``
    describe how that system was derived from ``A``.
    """

    def __init__(self, solve, n: int, perm: Permutation | None = None, scaling: ScalingDiag | None = None,
                 solve_transpose=None):
        self.n = n
        self._solve = solve
        self._solve_t = solve_transpose
        self.perm = perm or Permutation.identity(n)
        self.s = scaling.d if scaling is not None else np.ones(n)

    def _wrap(self, inner, r):
        r = np.asarray(r, dtype=np.float64)
        y = inner(self.perm.apply(self.s * r))
        return self.s * self.perm.apply_transpose(y)

    def apply(self, r):
        return self._wrap(self._solve, r)

    def apply_transpose(self, r):
        return self._wrap(self._solve_t or self._solve, r)

    __call__ = apply


def ldl_precond_apply(L, D: BlockDiag, P: Permutation, scaling: ScalingDiag | None, r) -> np.ndarray:
    """``S P^T L^{-T} D^{-1} L^{-1} P S r`` with ``L`` unit lower triangular.

    ``L`` may be a scipy matrix (with or without its unit diagonal stored)
    or a strictly lower :class:`~ildl.storage.SparseSymStore`.
    """
    from scipy.sparse.linalg import spsolve_triangular

    if hasattr(L, "to_scipy"):
        L = L.to_scipy(full=False)
    L = sp.csr_matrix(L)
    n = L.shape[0]
    lo = (sp.tril(L, -1) + sp.eye(n)).tocsr()
    up = lo.T.tocsr()

    def inner(v):
        y = spsolve_triangular(lo, v, lower=True, unit_diagonal=True)
        return spsolve_triangular(up, D.solve(y), lower=False, unit_diagonal=True)

    return Preconditioner(inner, n, P, scaling).apply(r)


def factor_preconditioner(f, perm: Permutation | None = None, scaling: ScalingDiag | None = None) -> Preconditioner:
    """Indefinite preconditioner from a :class:`~ildl.factor.Factorization`."""
    return Preconditioner(f.solve, f.n, perm, scaling, solve_transpose=lambda v: f.solve(v, transpose=True))


def spd_preconditioner(spd, perm: Permutation | None = None, scaling: ScalingDiag | None = None) -> Preconditioner:
    return Preconditioner(spd.solve, spd.n, perm, scaling)


__all__ = [
    "SKEW",
    "Preconditioner",
    "SolveReport",
    "SolverError",
    "SolverParams",
    "factor_preconditioner",
    "ldl_precond_apply",
    "minres_solve",
    "spd_preconditioner",
    "sqmr_solve",
]
