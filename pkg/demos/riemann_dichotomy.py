"""Cubic Riemann problem u_L = 5, u_R = -2 with DG p = 1 and p = 5.

The low-order run picks the classical shock; the p = 5 run keeps a
nonclassical middle state and ends with more L2 entropy.
"""

import sys

from sbp_kinetic.analysis.kinetic import measure_sample
from sbp_kinetic.entropy_pairs import cubic_law
from sbp_kinetic.problems import SchemeConfig, bounded_riemann_problem, build_run, solve


def main(n=128):
    law = cubic_law()
    for label, scheme in (("DG p=1", SchemeConfig("dg_lobatto", degree=1)),
                          ("DG p=5 s=5", SchemeConfig("dg_lobatto", degree=5, filter_order=5))):
        run = build_run(bounded_riemann_problem(law, 5.0, -2.0), scheme, n, trace_entropy="L2")
        state, trace = solve(run)
        s = measure_sample(run.coordinates(), state.values, 5.0, -2.0)
        middle = f"u_M = {s.u_middle:.4f} in [{s.bound_lo}, {s.bound_hi}]" if s.detected else "no middle state"
        print(f"{label:12s} {middle:34s} final entropy {trace[-1][1]:.4f}")


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:]))
