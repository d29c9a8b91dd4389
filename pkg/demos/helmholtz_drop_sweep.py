"""Shifted 2D Laplacian (m = 80, alpha = 0.3/h^2): how the drop tolerance
trades fill against SQMR iterations.

Run:  python3 demos/helmholtz_drop_sweep.py
"""
import math

from ildl.pipeline import RunConfig, run_pipeline


def main():
    print(f"{'drop_tol':>9} {'fill':>6} {'its':>4} {'relres':>9} {'seconds':>8}")
    for tol in (1e-2, 3e-3, 1e-3):
        cfg = RunConfig(generate="helmholtz:m=80,c=0.3", drop_tol=tol, fill_factor=math.inf)
        rep = run_pipeline(cfg).report
        secs = rep["precond_seconds"] + rep["solve_seconds"]
        print(f"{tol:9.0e} {rep['fill']:6.2f} {rep['iterations']:4d} {rep['relres']:9.2e} {secs:8.2f}")
    # A matrix this indefinite has many negative pivots; count the 2x2 blocks too.
    res = run_pipeline(RunConfig(generate="helmholtz:m=80,c=0.3", drop_tol=3e-3, fill_factor=math.inf, solver="none"))
    print("pivot blocks at drop_tol 3e-3:", res.report["blocks_1x1"], "1x1,", res.report["blocks_2x2"], "2x2")


if __name__ == "__main__":
    main()
