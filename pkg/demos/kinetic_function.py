"""Measure the kinetic function of DG p = 5, s = 5 on a coarse u_L grid and fit a line."""

import sys

import numpy as np

from sbp_kinetic.analysis.kinetic import fit_affine, run_kinetic_sweep
from sbp_kinetic.entropy_pairs import cubic_law
from sbp_kinetic.problems import SchemeConfig, bounded_riemann_problem, build_run


def main(n=128):
    law = cubic_law()
    scheme = SchemeConfig("dg_lobatto", degree=5, filter_order=5)
    samples = run_kinetic_sweep(
        lambda u_left: build_run(bounded_riemann_problem(law, u_left, -2.0), scheme, n),
        np.arange(2.0, 8.01, 1.0), -2.0)
    for s in samples:
        shown = f"{s.u_middle:8.4f}" if s.detected else "       -"
        print(f"u_L = {s.u_left:4.1f}  u_M = {shown}  within bounds: {s.within_bounds}")
    fit = fit_affine(samples)
    print(f"u_M ~ {fit.slope:.4f} u_L {fit.offset:+.4f}   r^2 = {fit.r_squared:.6f}")


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:]))
