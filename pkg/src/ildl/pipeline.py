"""End-to-end driver: load, equilibrate, reorder, factor, precondition, solve."""
from __future__ import annotations

import math
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import mmio, problems
from .factor import FactorParams, Factorization, fill_of, ildl_factor
from .preprocess import (
    ScalingDiag,
    amd_order,
    apply_scaling,
    bunch_equilibrate,
    permute,
    rcm_order,
    ruiz_equilibrate,
)
from .solvers import SolveReport, SolverParams, factor_preconditioner, minres_solve, spd_preconditioner, sqmr_solve
from .storage import SKEW, Permutation, SparseSymStore
from .transform import spd_transform

SCHEMA = 1
EXIT_OK, EXIT_INPUT, EXIT_MAXITER, EXIT_BREAKDOWN, EXIT_VERIFY = 0, 1, 2, 3, 4
VERIFY_TOL = 1e-10

PIVOTS = {"rook": "rook", "bk": "bunch_kaufman", "none": "none"}


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    input: str | None = None
    generate: str | None = None
    pivot: str = "rook"
    equil: str | None = None  # None: bunch for symmetric, none for skew
    reorder: str = "amd"
    drop_tol: float = 1e-4
    fill_factor: float = 2.0
    solver: str = "sqmr"
    rtol: float = 1e-6
    max_iter: int = 1000
    rhs: str = "ones-solution"
    output: str | None = None
    seed: int = 0
    export_factors: bool = False

    def validate(self) -> None:
        if (self.input is None) == (self.generate is None):
            raise ConfigError("give exactly one of an input file or a generator spec")
        if self.pivot not in PIVOTS:
            raise ConfigError(f"pivot must be one of {sorted(PIVOTS)}")
        if self.equil not in (None, "bunch", "ruiz", "none"):
            raise ConfigError("equil must be bunch, ruiz or none")
        if self.reorder not in ("amd", "rcm", "none"):
            raise ConfigError("reorder must be amd, rcm or none")
        if self.solver not in ("sqmr", "minres", "none"):
            raise ConfigError("solver must be sqmr, minres or none")
        if not 0.0 <= self.drop_tol < 1.0:
            raise ConfigError("drop-tol must lie in [0, 1)")
        if not self.fill_factor > 0:
            raise ConfigError("fill-factor must be positive")
        if not self.rtol > 0 or self.max_iter < 0:
            raise ConfigError("rtol must be positive and max-iter non-negative")

    def echo(self) -> dict:
        d = asdict(self)
        d["fill_factor"] = "inf" if math.isinf(self.fill_factor) else self.fill_factor
        return d


def parse_generator(spec: str) -> dict:
    """``"helmholtz:m=80,c=0.3"`` -> ``{"kind": "helmholtz", "m": 80, "c": 0.3}``."""
    kind, _, rest = spec.partition(":")
    out: dict = {"kind": kind.strip()}
    for item in filter(None, (t.strip() for t in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ConfigError(f"bad generator parameter {item!r}")
        try:
            out[key.strip()] = int(val)
        except ValueError:
            try:
                out[key.strip()] = float(val)
            except ValueError:
                out[key.strip()] = val.strip()
    return out


def generate(params: dict, seed: int = 0) -> SparseSymStore:
    p = dict(params)
    kind = p.pop("kind")
    try:
        if kind == "helmholtz":
            return problems.helmholtz_matrix(problems.GridSpec(int(p.get("m", 80)), 2), float(p.get("c", 0.3)))
        if kind == "convdiff":
            pe = (float(p.get("beta", 1.0)), float(p.get("gamma", 1.0)), float(p.get("delta", 1.0)))
            return problems.convdiff_skew_matrix(problems.GridSpec(int(p.get("m", 10)), 3), pe)
        if kind == "random":
            n = int(p.get("n", 100))
            skind = SKEW if p.get("type", "symmetric") == "skew" else "symmetric"
            density = float(p.get("density", 1.0))
            s = int(p.get("seed", seed))
            if density >= 1.0:
                return problems.random_skew(n, s) if skind == SKEW else problems.random_symmetric(n, s)
            return problems.random_sparse(n, density, s, skind)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad generator parameters: {exc}") from exc
    raise ConfigError(f"unknown generator {kind!r}")


def load_input(cfg: RunConfig) -> SparseSymStore:
    if cfg.input is not None:
        return mmio.load_matrix_market(cfg.input)
    return generate(parse_generator(cfg.generate), cfg.seed)


@dataclass
class Prepared:
    """Matrix after scaling and reordering, plus how to undo both."""

    original: SparseSymStore
    work: SparseSymStore
    scaling: ScalingDiag
    order: Permutation
    equil: str
    seconds: float = 0.0


def preprocess(A: SparseSymStore, equil: str | None, reorder: str) -> Prepared:
    t0 = time.perf_counter()
    if equil is None:
        equil = "none" if A.kind == SKEW else "bunch"
    if equil == "bunch":
        scaling = bunch_equilibrate(A)
    elif equil == "ruiz":
        scaling = ruiz_equilibrate(A)
    else:
        scaling = ScalingDiag.identity(A.n)
    work = apply_scaling(A, scaling) if equil != "none" else A.copy()
    if reorder == "amd":
        order = amd_order(work)
    elif reorder == "rcm":
        order = rcm_order(work)
    else:
        order = Permutation.identity(A.n)
    if reorder != "none":
        work = permute(work, order)
    return Prepared(A, work, scaling, order, equil, time.perf_counter() - t0)


@dataclass
class RunResult:
    exit_code: int
    report: dict
    factorization: Factorization | None = None
    x: np.ndarray | None = None
    total_perm: Permutation | None = None
    prepared: Prepared | None = None
    extras: dict = field(default_factory=dict)


def _factor(cfg: RunConfig, prep: Prepared):
    params = FactorParams(drop_tol=cfg.drop_tol, fill_factor=cfg.fill_factor, pivot_kind=PIVOTS[cfg.pivot])
    f = ildl_factor(prep.work, params)
    return f, prep.order.then(f.perm)


def _rhs(cfg: RunConfig, A: SparseSymStore) -> np.ndarray:
    if cfg.rhs == "ones-solution":
        return A.to_scipy() @ np.ones(A.n)
    b = np.loadtxt(cfg.rhs, dtype=np.float64, ndmin=1)
    if b.shape != (A.n,):
        raise ConfigError(f"rhs file has {b.size} entries, matrix order is {A.n}")
    return b


def run_pipeline(cfg: RunConfig) -> RunResult:
    """Run one configuration; write artifacts when ``cfg.output`` is set."""
    cfg.validate()
    A = load_input(cfg)
    b = _rhs(cfg, A)
    t0 = time.perf_counter()
    prep = preprocess(A, cfg.equil, cfg.reorder)
    f, total = _factor(cfg, prep)
    fill = fill_of(f.L, f.D, A)
    x = None
    if cfg.solver == "sqmr":
        pre = factor_preconditioner(f, total, prep.scaling)
        precond_seconds = time.perf_counter() - t0
        x, rep = sqmr_solve(A.to_scipy().tocsr(), b, SolverParams(cfg.rtol, cfg.max_iter, "sqmr"), pre,
                            skew=A.kind == SKEW)
    elif cfg.solver == "minres":
        pre = spd_preconditioner(spd_transform(f), total, prep.scaling)
        precond_seconds = time.perf_counter() - t0
        x, rep = minres_solve(A.to_scipy().tocsr(), b, SolverParams(cfg.rtol, cfg.max_iter, "minres"), pre,
                              skew=A.kind == SKEW)
    else:
        precond_seconds = time.perf_counter() - t0
        rep = SolveReport("none", 0, float("nan"), [], solver="none")
    rep.fill = fill
    rep.precond_seconds = precond_seconds

    n1, n2 = f.block_counts()
    report = {"schema": SCHEMA, **rep.to_dict()}
    if cfg.solver == "none":
        report["relres"] = None
    report.update(
        {
            "kind": A.kind,
            "n": A.n,
            "nnz_A": A.nnz_full,
            "nnz_L": f.L.nnz,
            "nnz_D": f.D.nnz(),
            "blocks_1x1": n1,
            "blocks_2x2": n2,
            "static_pivots": f.static_pivots,
            "equil": prep.equil,
            "config": cfg.echo(),
        }
    )
    code = {"converged": EXIT_OK, "none": EXIT_OK, "max_iter": EXIT_MAXITER, "breakdown": EXIT_BREAKDOWN}[rep.status]
    if cfg.output:
        write_artifacts(cfg, report, f, total)
    return RunResult(code, report, f, x, total, prep)


def write_artifacts(cfg: RunConfig, report: dict, f: Factorization, total: Permutation) -> None:
    import json

    os.makedirs(cfg.output, exist_ok=True)
    with open(os.path.join(cfg.output, "report.json"), "w", encoding="ascii") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if cfg.export_factors:
        mmio.write_general(f.unit_lower(), os.path.join(cfg.output, "L.mtx"))
        mmio.write_matrix_market(SparseSymStore.from_scipy(f.D.to_sparse(), f.kind), os.path.join(cfg.output, "D.mtx"))
        mmio.write_permutation(total, os.path.join(cfg.output, "P.vec"))


def verify_factors(cfg: RunConfig) -> tuple[int, float]:
    """Complete factorization check: ``||P A P^T - L D L^T||_F / ||A||_F``.

    Runs on the equilibrated, reordered matrix; exit code 0 iff the
    residual is at most ``1e-10`` (4 otherwise).
    """
    if cfg.drop_tol != 0 or not math.isinf(cfg.fill_factor):
        raise ConfigError("verify needs --drop-tol 0 and --fill-factor inf")
    cfg.validate()
    A = load_input(cfg)
    prep = preprocess(A, cfg.equil, cfg.reorder)
    f, _ = _factor(cfg, prep)
    res = f.relative_residual(prep.work)
    return (EXIT_OK if res <= VERIFY_TOL else EXIT_VERIFY), res


def defaults() -> dict:
    return RunConfig().echo()
