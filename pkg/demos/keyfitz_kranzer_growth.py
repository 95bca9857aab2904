"""First-order FV on the Keyfitz-Kranzer system: max|u2| grows with N."""

from sbp_kinetic.analysis.kinetic import singular_growth_diagnostic
from sbp_kinetic.entropy_pairs import keyfitz_kranzer_law
from sbp_kinetic.problems import SchemeConfig, build_run, keyfitz_kranzer_problem, solve


def main():
    law = keyfitz_kranzer_law()
    runs = []
    for n in (64, 128, 256):
        run = build_run(keyfitz_kranzer_problem(law), SchemeConfig("fv_kk"), n)
        state, _ = solve(run)
        runs.append((n, state))
    table = singular_growth_diagnostic(runs)
    for row in table.rows:
        print(f"N = {row.n:4d}  max|u1| = {row.max_abs_u1:7.3f}  max|u2| = {row.max_abs_u2:7.3f}")
    print("max|u2| strictly increasing:", table.increasing_u2)


if __name__ == "__main__":
    main()
