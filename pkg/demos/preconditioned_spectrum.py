"""Eigenvalues of the preconditioned matrix for a random symmetric n = 300
problem (fill factor 2, drop tolerance 1e-4).

With the positive definite preconditioner M = L|D|L^T, the spectrum of
M^{-1} A concentrates near +1 and -1.  The script prints the range of the
original spectrum and a coarse text histogram of the preconditioned one.
"""
import numpy as np

from ildl.pipeline import RunConfig, run_pipeline


def histogram(values, edges):
    counts, _ = np.histogram(values, bins=edges)
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        print(f"  [{lo:5.1f}, {hi:5.1f})  {'#' * int(np.ceil(c / 4))} {c}")


def main():
    res = run_pipeline(RunConfig(generate="random:n=300,seed=0", solver="minres"))
    a = res.prepared.original.to_dense()
    from ildl.solvers import spd_preconditioner
    from ildl.transform import spd_transform

    pre = spd_preconditioner(spd_transform(res.factorization), res.total_perm, res.prepared.scaling)
    minv_a = np.column_stack([pre(col) for col in a.T])
    before = np.linalg.eigvalsh(a)
    after = np.linalg.eigvals(minv_a).real
    edges = np.linspace(-3, 3, 13)
    print(f"A: eigenvalues in [{before.min():.1f}, {before.max():.1f}], "
          f"smallest magnitude {np.abs(before).min():.2e}")
    print("M^-1 A:")
    histogram(np.clip(after, -2.99, 2.99), edges)
    near = np.mean(np.minimum(abs(after - 1), abs(after + 1)) < 0.25)
    print(f"fraction within 0.25 of +-1: {near:.2f}; MINRES iterations: {res.report['iterations']}")


if __name__ == "__main__":
    main()
