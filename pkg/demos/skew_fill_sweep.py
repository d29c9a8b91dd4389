"""Skew-symmetric 3D convection operator (m = 20, Peclet numbers 20, 2, 1).

Sweeps the per-column fill budget at drop_tol = 1e-4, then compares the
indefinite preconditioner under SQMR with its positive definite variant
under MINRES.
"""
from ildl.pipeline import RunConfig, run_pipeline

SPEC = "convdiff:m=20,beta=20,gamma=2,delta=1"


def main():
    print(f"{'ff':>4} {'fill':>6} {'sqmr its':>8}")
    for ff in (2.0, 4.0, 6.0):
        rep = run_pipeline(RunConfig(generate=SPEC, fill_factor=ff)).report
        print(f"{ff:4.0f} {rep['fill']:6.2f} {rep['iterations']:8d}")
    rep = run_pipeline(RunConfig(generate=SPEC, fill_factor=6.0, solver="minres")).report
    print(f"MINRES with |D| preconditioner at ff=6: {rep['iterations']} iterations, status {rep['status']}")


if __name__ == "__main__":
    main()
