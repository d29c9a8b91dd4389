"""Command-line interface: ``ildl run``, ``ildl verify``, ``ildl gen``."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

from . import mmio, problems
from .mmio import MatrixMarketError
from .pipeline import EXIT_INPUT, ConfigError, RunConfig, defaults, run_pipeline, verify_factors
from .storage import SKEW


def _float_or_inf(text: str) -> float:
    try:
        return float(text)  # accepts "inf"
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _add_config_flags(p: argparse.ArgumentParser, verify: bool = False) -> None:
    d = RunConfig()
    p.add_argument("inputs", nargs="*", metavar="INPUT", help="Matrix Market file(s)")
    p.add_argument("--generate", metavar="SPEC", help="generator spec, e.g. helmholtz:m=80,c=0.3")
    p.add_argument("--pivot", choices=["rook", "bk", "none"], default=d.pivot)
    p.add_argument("--equil", choices=["bunch", "ruiz", "none"], default=None,
                   help="default: bunch for symmetric, none for skew input")
    p.add_argument("--reorder", choices=["amd", "rcm", "none"], default=d.reorder)
    p.add_argument("--drop-tol", type=float, default=0.0 if verify else d.drop_tol)
    p.add_argument("--fill-factor", type=_float_or_inf, default=math.inf if verify else d.fill_factor)
    p.add_argument("--seed", type=int, default=d.seed)
    if verify:
        return
    p.add_argument("--solver", choices=["sqmr", "minres", "none"], default=d.solver)
    p.add_argument("--rtol", type=float, default=d.rtol)
    p.add_argument("--max-iter", type=int, default=d.max_iter)
    p.add_argument("--rhs", default=d.rhs, help="'ones-solution' (b = A*1) or a text file with b")
    p.add_argument("--output", "-o", metavar="DIR", help="directory for report.json and factor files")
    p.add_argument("--export-factors", action="store_true", help="also write L.mtx, D.mtx and P.vec")
    p.add_argument("--jobs", type=int, default=1, help="run several inputs on N threads")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ildl", description="Incomplete LDL^T preconditioned solves.")
    parser.add_argument("--print-defaults", action="store_true", help="print the default configuration and exit")
    sub = parser.add_subparsers(dest="command")

    _add_config_flags(sub.add_parser("run", help="factor, precondition and solve"))
    _add_config_flags(sub.add_parser("verify", help="check a complete factorization"), verify=True)

    gen = sub.add_parser("gen", help="write a model problem as Matrix Market")
    gsub = gen.add_subparsers(dest="problem", required=True)
    h = gsub.add_parser("helmholtz")
    h.add_argument("--m", type=int, default=80)
    h.add_argument("--c", type=float, default=0.3, help="shift alpha = c / h^2")
    c = gsub.add_parser("convdiff")
    c.add_argument("--m", type=int, default=20)
    c.add_argument("--beta", type=float, default=20.0)
    c.add_argument("--gamma", type=float, default=2.0)
    c.add_argument("--delta", type=float, default=1.0)
    r = gsub.add_parser("random")
    r.add_argument("--n", type=int, default=100)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--kind", choices=["symmetric", "skew"], default="symmetric")
    r.add_argument("--density", type=float, default=1.0)
    for g in (h, c, r):
        g.add_argument("--out", "-o", metavar="FILE", help="output path (default: stdout)")
    return parser


def _configs(args) -> list[RunConfig]:
    base = dict(
        pivot=args.pivot, equil=args.equil, reorder=args.reorder, drop_tol=args.drop_tol,
        fill_factor=args.fill_factor, seed=args.seed,
    )
    if hasattr(args, "solver"):
        base.update(solver=args.solver, rtol=args.rtol, max_iter=args.max_iter, rhs=args.rhs,
                    output=args.output, export_factors=args.export_factors)
    if args.generate and args.inputs:
        raise ConfigError("give input files or --generate, not both")
    if args.generate:
        return [RunConfig(generate=args.generate, **base)]
    if not args.inputs:
        raise ConfigError("no input matrix given")
    cfgs = [RunConfig(input=path, **base) for path in args.inputs]
    if len(cfgs) > 1 and base.get("output"):
        cfgs = [replace(c, output=os.path.join(base["output"], os.path.splitext(os.path.basename(c.input))[0]))
                for c in cfgs]
    return cfgs


def _run_one(cfg: RunConfig) -> tuple[int, str]:
    try:
        res = run_pipeline(cfg)
    except (OSError, ConfigError, MatrixMarketError) as exc:
        return EXIT_INPUT, f"error: {exc}"
    rep = res.report
    label = cfg.input or cfg.generate
    relres = rep["relres"]
    tail = f" relres={relres:.3e}" if relres is not None else ""
    return res.exit_code, (
        f"{label}: status={rep['status']} iterations={rep['iterations']}{tail} fill={rep['fill']:.3f}"
    )


def _cmd_run(args) -> int:
    cfgs = _configs(args)
    jobs = max(1, args.jobs)
    if jobs == 1 or len(cfgs) == 1:
        results = [_run_one(c) for c in cfgs]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, cfgs))
    code = 0
    for rc, line in results:
        print(line, file=sys.stderr if rc == EXIT_INPUT else sys.stdout)
        code = max(code, rc)
    return code


def _cmd_verify(args) -> int:
    code = 0
    for cfg in _configs(args):
        rc, res = verify_factors(cfg)
        print(f"{cfg.input or cfg.generate}: relative residual {res:.3e}")
        code = max(code, rc)
    return code


def _cmd_gen(args) -> int:
    if args.problem == "helmholtz":
        store = problems.helmholtz_matrix(problems.GridSpec(args.m, 2), args.c)
        note = f"helmholtz m={args.m} c={args.c}"
    elif args.problem == "convdiff":
        store = problems.convdiff_skew_matrix(problems.GridSpec(args.m, 3), (args.beta, args.gamma, args.delta))
        note = f"convdiff m={args.m} beta={args.beta} gamma={args.gamma} delta={args.delta}"
    else:
        kind = SKEW if args.kind == "skew" else "symmetric"
        if args.density >= 1.0:
            store = problems.random_skew(args.n, args.seed) if kind == SKEW else problems.random_symmetric(args.n, args.seed)
        else:
            store = problems.random_sparse(args.n, args.density, args.seed, kind)
        note = f"random n={args.n} kind={args.kind} density={args.density} seed={args.seed}"
    mmio.write_matrix_market(store, args.out or sys.stdout, comment=note)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_defaults:
        print(json.dumps(defaults(), indent=2, sort_keys=True))
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_INPUT
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "verify":
            return _cmd_verify(args)
        return _cmd_gen(args)
    except (OSError, ConfigError, MatrixMarketError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
