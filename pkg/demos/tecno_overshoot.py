"""TeCNO(3) on u0 = -sin(pi x) at T = 1: L2 dissipation stays inside the
classical envelope, L4 dissipation leaves overshoots next to the shocks."""

import sys

import numpy as np

from sbp_kinetic.analysis.overshoot import envelope_overshoot
from sbp_kinetic.analysis.riemann import cell_centers, godunov_fv_reference
from sbp_kinetic.entropy_pairs import cubic_law
from sbp_kinetic.problems import SchemeConfig, build_run, sine_problem, solve


def main(n=512):
    law = cubic_law()
    x = cell_centers(-1.0, 1.0, 16 * n)
    reference = godunov_fv_reference(law, -np.sin(np.pi * x), -1.0, 1.0, 1.0, periodic=True)
    for entropy in ("L2", "L4", "L2L4"):
        run = build_run(sine_problem(law), SchemeConfig("tecno", order=3, entropy=entropy), n)
        state, _ = solve(run)
        excess = envelope_overshoot(state.values, reference, max(1, round(0.01 * n / 2)))
        print(f"TeCNO(3) {entropy:5s} overshoot beyond the classical envelope: {excess:.4f}")


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:]))
