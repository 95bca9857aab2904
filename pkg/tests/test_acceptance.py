"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The lines are printed again in the terminal summary. Slow criteria (6, 8, 9)
run parameter sweeps at reduced N and take several minutes each.
"""

import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from sbp_kinetic import time_integration as ti
from sbp_kinetic.analysis.kinetic import fit_affine, measure_sample, run_kinetic_sweep
from sbp_kinetic.analysis.overshoot import envelope_overshoot, max_abs_excess
from sbp_kinetic.analysis.riemann import (
    cell_centers,
    classical_riemann_solution,
    godunov_fv_reference,
    rankine_hugoniot_residual,
)
from sbp_kinetic.dissipation import (
    apply_modal_filter,
    fd_artificial_dissipation,
    legendre_dissipation,
    modal_exponential_filter,
    spectral_viscosity,
)
from sbp_kinetic.entropy_pairs import (
    cubic_law,
    entropy_pair,
    keyfitz_kranzer_law,
    quartic_law,
    semidiscrete_entropy_rate,
    total_entropy,
)
from sbp_kinetic.num_fluxes import (
    central_flux_l4_cubic,
    ec_flux_cubic,
    ec_flux_keyfitz_kranzer,
    ec_flux_l2l4_cubic,
    ec_flux_quartic,
    ec_residual,
)
from sbp_kinetic.problems import (
    SchemeConfig,
    bounded_riemann_problem,
    build_run,
    fourier_riemann_problem,
    keyfitz_kranzer_problem,
    sine_problem,
    solve,
)
from sbp_kinetic.sbp_ops import (
    fd_sbp,
    fourier_operator,
    lobatto_collocation,
    lobatto_nodes_weights,
    periodic_central_fd,
    sbp_residual,
)
from sbp_kinetic.semidisc import check_boundary_entropy_condition, volume_flux_differencing, volume_split_cubic

CUBIC, QUARTIC, KK = cubic_law(), quartic_law(), keyfitz_kranzer_law()


def _line(values, fmt="{:.3g}"):
    return ", ".join(fmt.format(v) for v in values)


# ---------------------------------------------------------------------------
# 1-4: discrete identities

def test_criterion_01_sbp_identities(report):
    ops = [(f"periodic FD {p}", periodic_central_fd(p, 64, 2 / 64)) for p in (2, 4, 6)]
    ops += [(f"FD-SBP {p}, {n} nodes", fd_sbp(p, n, 2.0)) for p in (2, 4, 6) for n in (30, 100)]
    ops += [(f"Lobatto {p}", lobatto_collocation(p)) for p in range(1, 7)]
    ops += [(f"Fourier {n}", fourier_operator(n, 2.0)) for n in range(16, 257, 2)]
    residuals = {name: sbp_residual(op) for name, op in ops}
    worst = max(residuals, key=residuals.get)
    passed = residuals[worst] <= 1e-12
    report(1, passed, f"{len(ops)} operators, worst {residuals[worst]:.2e} ({worst}) <= 1e-12")
    assert passed


EC_FLUXES = [
    ("cubic L2", ec_flux_cubic(), entropy_pair("L2", CUBIC), CUBIC),
    ("cubic L4 central", central_flux_l4_cubic(), entropy_pair("L4", CUBIC), CUBIC),
    ("cubic L2L4", ec_flux_l2l4_cubic(0.01), entropy_pair("L2L4", CUBIC, 0.01), CUBIC),
    ("quartic L2", ec_flux_quartic(), entropy_pair("L2", QUARTIC), QUARTIC),
    ("Keyfitz-Kranzer", ec_flux_keyfitz_kranzer(), entropy_pair("KK", KK), KK),
]


def test_criterion_02_ec_flux_identities(report):
    rng = np.random.default_rng(2)
    worst_ec, worst_diag = 0.0, 0.0
    for _, flux, pair, law in EC_FLUXES:
        shape = (1000,) if law.is_scalar else (1000, 2)
        um, up = rng.uniform(-3, 3, shape), rng.uniform(-3, 3, shape)
        jump_psi = pair.psi(up) - pair.psi(um)
        worst_ec = max(worst_ec, float(np.max(np.abs(ec_residual(flux, pair, um, up)) / (1 + np.abs(jump_psi)))))
        f = np.asarray(law.f(um))
        diag = np.abs(flux.evaluate(um, um) - f) / (1 + np.abs(f))
        worst_diag = max(worst_diag, float(np.max(diag)))
    passed = worst_ec <= 1e-11 and worst_diag <= 1e-12
    report(2, passed, f"{len(EC_FLUXES)} fluxes x 1000 pairs: residual {worst_ec:.2e} <= 1e-11, "
                      f"diagonal {worst_diag:.2e} <= 1e-12")
    assert passed


def test_criterion_03_semidiscrete_entropy_conservation(report):
    rng = np.random.default_rng(3)
    pair = entropy_pair("L2", CUBIC)
    schemes = [SchemeConfig("fourier")] + [SchemeConfig("periodic_fd", order=p) for p in (2, 4, 6)]
    worst_rate = 0.0
    for scheme in schemes:
        run = build_run(sine_problem(CUBIC), scheme, 64, use_compiled=False)
        for _ in range(100):
            u = rng.uniform(-2, 2, run.initial.values.shape)
            k = run.rhs.rhs(u, 0.0)
            norm = np.sqrt(np.sum(run.mass * k * k))
            worst_rate = max(worst_rate, abs(semidiscrete_entropy_rate(u, k, run.mass, pair)) / norm)
    worst_split = 0.0
    for op in [fourier_operator(64, 2.0)] + [periodic_central_fd(p, 64, 2 / 64) for p in (2, 4, 6)]:
        for _ in range(20):
            u = rng.uniform(-2, 2, (1, 64))
            fd = volume_flux_differencing(op, ec_flux_cubic(), u)
            split = volume_split_cubic(op, u)
            worst_split = max(worst_split, float(np.max(np.abs(fd - split)) / max(1.0, np.max(np.abs(split)))))
    passed = worst_rate <= 1e-10 and worst_split <= 1e-13
    report(3, passed, f"|w'M rhs|/|rhs| {worst_rate:.2e} <= 1e-10; split vs flux differencing "
                      f"{worst_split:.2e} <= 1e-13 (relative to max|split|)")
    assert passed


def _dissipation_defects(op, mass, shape, rng):
    u = rng.standard_normal((1000,) + shape)
    du = op.apply(u)
    axes = tuple(range(1, u.ndim))
    scale = np.sum(mass * np.abs(u * du), axis=axes) + 1
    quad = np.max(np.sum(mass * u * du, axis=axes) / scale)
    mean = np.max(np.abs(np.sum(mass * du, axis=axes)) / (np.sum(mass * np.abs(du), axis=axes) + 1))
    return float(quad), float(mean)


def test_criterion_04_entropy_dissipativity(report):
    rng = np.random.default_rng(4)
    n = 256
    cases = []
    for order in (2, 4, 6):
        for eps in (100, 200, 300, 400):
            cases.append((f"FD{order} eps {eps} periodic", fd_artificial_dissipation(order, eps / n, n, 2 / n, True)))
            w = fd_sbp(order, n, 4.0).weights
            cases.append((f"FD{order} eps {eps} bounded",
                          fd_artificial_dissipation(order, eps / n, n, 4 / (n - 1), False, weights=w)))
    for variant in ("standard", "convergent"):
        for c in (10, 50, 100):
            cases.append((f"SV {variant} {c}/N", spectral_viscosity(n, c / n, variant, 12.0)))
    for p in range(1, 7):
        cases.append((f"Legendre p{p}", legendre_dissipation(p)))
    worst_quad, worst_mean = -np.inf, 0.0
    for name, op in cases:
        shape = op.mass.shape
        quad, mean = _dissipation_defects(op, op.mass, shape, rng)
        worst_quad, worst_mean = max(worst_quad, quad), max(worst_mean, mean)
    # modal filters act after a step: the discrete norm must not grow
    for p in (1, 3, 5):
        _, weights = lobatto_nodes_weights(p)
        for s in (1, 4, 5):
            f = modal_exponential_filter(p, s, 1e-3)
            u = rng.standard_normal((1000, p + 1))
            v = apply_modal_filter(f, u)
            before = np.sum(weights * u * u, axis=1)
            growth = (np.sum(weights * v * v, axis=1) - before) / (before + 1)
            worst_quad = max(worst_quad, float(np.max(growth)))
            shift = np.abs(v @ weights - u @ weights) / (np.abs(u) @ weights + 1)
            worst_mean = max(worst_mean, float(np.max(shift)))
    passed = worst_quad <= 1e-12 and worst_mean <= 1e-11
    report(4, passed, f"{len(cases) + 9} operators x 1000 inputs: u'M DISS(u) {worst_quad:.2e} <= 1e-12, "
                      f"mean {worst_mean:.2e} <= 1e-11")
    assert passed


# ---------------------------------------------------------------------------
# 5-7: kinetic behaviour of the cubic law

DG_CASES = {
    "p1": SchemeConfig("dg_lobatto", degree=1),
    "p5s0": SchemeConfig("dg_lobatto", degree=5),
    "p5s5": SchemeConfig("dg_lobatto", degree=5, filter_order=5),
}


@pytest.fixture(scope="module")
def dg_riemann_runs():
    out = {}
    for name, scheme in DG_CASES.items():
        run = build_run(bounded_riemann_problem(CUBIC, 5.0, -2.0), scheme, 256, trace_entropy="L2")
        state, trace = solve(run)
        sample = measure_sample(run.coordinates(), state.values, 5.0, -2.0)
        out[name] = (sample, trace[-1][1])
    return out


def test_criterion_05_classical_nonclassical_dichotomy(report, dg_riemann_runs):
    started = time.perf_counter()
    p1 = dg_riemann_runs["p1"][0]
    high = [dg_riemann_runs[k][0] for k in ("p5s0", "p5s5")]
    ok_a = not p1.detected
    ok_b = all(s.detected and -5.0 <= s.u_middle <= -2.5 for s in high)
    fd = []
    for eps in (100, 400):
        scheme = SchemeConfig("fd_sbp", order=2, fd_dissipation=((2, eps),))
        run = build_run(bounded_riemann_problem(CUBIC, 5.0, -2.0), scheme, 1024)
        state, _ = solve(run)
        fd.append(measure_sample(run.coordinates(), state.values, 5.0, -2.0))
    ok_c = not any(s.detected for s in fd)
    middles = _line([s.u_middle for s in high]) if all(s.detected for s in high) else "missing"
    report(5, ok_a and ok_b and ok_c,
           f"(a) DG p1 detected={p1.detected}; (b) DG p5 s0/s5 u_M = {middles} in [-5, -2.5]; "
           f"(c) FD p2 eps2 100/400 detected={[s.detected for s in fd]} "
           f"[{time.perf_counter() - started:.0f} s + shared runs]")
    assert ok_a and ok_b and ok_c


def test_criterion_06_kinetic_function_affinity(report):
    started = time.perf_counter()
    scheme = SchemeConfig("dg_lobatto", degree=5, filter_order=5)
    u_lefts = np.arange(2.0, 8.0 + 1e-9, 0.25)
    fits, violations = {}, 0
    for n in (256, 512):
        samples = run_kinetic_sweep(
            lambda u_left: build_run(bounded_riemann_problem(CUBIC, u_left, -2.0), scheme, n), u_lefts, -2.0)
        violations += sum(1 for s in samples if s.within_bounds is False)
        try:
            fits[n] = fit_affine(samples)
        except ValueError as err:
            report(6, False, f"N={n}: {err}")
            pytest.fail(str(err))
    a, b = fits[256], fits[512]
    drift = abs(a.slope - b.slope)
    passed = all(f.r_squared >= 0.99 and abs(f.offset) <= 0.1 for f in (a, b)) and drift <= 0.05
    report(6, passed,
           f"N=256 slope {a.slope:.4f} offset {a.offset:+.4f} r2 {a.r_squared:.6f} ({a.n_samples} hits); "
           f"N=512 slope {b.slope:.4f} offset {b.offset:+.4f} r2 {b.r_squared:.6f} ({b.n_samples} hits); "
           f"drift {drift:.4f} <= 0.05; bound violations {violations} "
           f"[{time.perf_counter() - started:.0f} s]")
    assert passed


def test_criterion_07_entropy_ordering(report, dg_riemann_runs):
    classical = dg_riemann_runs["p1"][1]
    margins = {k: dg_riemann_runs[k][1] - classical for k in ("p5s0", "p5s5")}
    passed = all(m >= 1e-3 for m in margins.values())
    report(7, passed, f"final L2 entropy p1 {classical:.4f}; p5 s0/s5 exceed it by "
                      f"{_line(margins.values(), '{:.4f}')} (margin >= 1e-3)")
    assert passed


# ---------------------------------------------------------------------------
# 8: TeCNO overshoots

def _tecno_final(entropy, n):
    run = build_run(sine_problem(CUBIC), SchemeConfig("tecno", order=3, entropy=entropy), n)
    state, _ = solve(run)
    return state.values


def test_criterion_08_tecno_entropy_dichotomy(report):
    started = time.perf_counter()
    ref_n = 16384
    x = cell_centers(-1.0, 1.0, ref_n)
    reference = godunov_fv_reference(CUBIC, -np.sin(np.pi * x), -1.0, 1.0, 1.0, periodic=True)
    # envelope radius |x - y| <= 0.01 in cells
    overshoot = lambda u: envelope_overshoot(u, reference, round(0.01 * u.size / 2.0))
    l2 = _tecno_final("L2", 1024)
    l4 = _tecno_final("L4", 1024)
    l4_fine = _tecno_final("L4", 4096)
    values = [overshoot(l2), overshoot(l4), overshoot(l4_fine)]
    literal = [max_abs_excess(u, reference) for u in (l2, l4, l4_fine)]
    passed = values[0] <= 0.02 and values[1] >= 0.05 and values[2] >= 0.05
    report(8, passed, f"local overshoot L2@1024 {values[0]:.4f} <= 0.02, L4@1024 {values[1]:.4f} and "
                      f"L4@4096 {values[2]:.4f} >= 0.05 (max|u| excess: {_line(literal, '{:.4f}')}) "
                      f"[{time.perf_counter() - started:.0f} s]")
    assert passed


# ---------------------------------------------------------------------------
# 9: Fourier spectral viscosity

SV_SWEEP = (3.0, 4.0, 5.0, 6.0)


def _fourier_sv(variant, c):
    return SchemeConfig("fourier", volume="split", sv_variant=variant, sv_strength=c)


def test_criterion_09_fourier_spectral_viscosity(report):
    started = time.perf_counter()
    scheme = _fourier_sv("standard", 10.0)
    sweeps = {}
    for n in (1024, 4096):
        sweeps[n] = run_kinetic_sweep(
            lambda u_left: build_run(fourier_riemann_problem(CUBIC, u_left, -2.0), scheme, n), SV_SWEEP, -2.0)
    hits = {n: [s.u_left for s in sweeps[n] if s.detected] for n in sweeps}
    both = [(a, b) for a, b in zip(sweeps[1024], sweeps[4096]) if a.detected and b.detected]
    deltas = [abs(a.u_middle - b.u_middle) for a, b in both]
    ok_sweep = bool(hits[1024]) and bool(hits[4096]) and bool(both) and max(deltas) <= 0.05

    entropies = {}
    pair = entropy_pair("L2", CUBIC)
    for variant, c in (("standard", 10.0), ("convergent", 0.2)):
        run = build_run(sine_problem(CUBIC), _fourier_sv(variant, c), 4096)
        state, _ = solve(run)
        entropies[variant] = total_entropy(state.values, run.mass, pair)
    ok_entropy = entropies["convergent"] < entropies["standard"]
    report(9, ok_sweep and ok_entropy,
           f"standard SV 10/N: detected u_L at N=1024 {hits[1024]}, N=4096 {hits[4096]}; "
           f"|du_M| on common hits {_line(deltas, '{:.4f}') or 'none'} <= 0.05; "
           f"sine N=4096 final entropy convergent 1/(5N) {entropies['convergent']:.6f} < "
           f"standard {entropies['standard']:.6f} [{time.perf_counter() - started:.0f} s]")
    assert ok_sweep and ok_entropy


# ---------------------------------------------------------------------------
# 10: Keyfitz-Kranzer

def test_criterion_10_keyfitz_kranzer_growth(report):
    started = time.perf_counter()
    pair = entropy_pair("KK", KK)
    growth, worst = [], {}
    for n in (128, 256, 512):
        box, seen = {}, [-np.inf]

        def check(t, u):
            sd = box["sd"]
            for side, datum, trace in (("left", sd.boundary.left_state(t), u[0, 0]),
                                       ("right", sd.boundary.right_state(t), u[-1, -1])):
                if datum is not None:
                    seen[0] = max(seen[0], float(check_boundary_entropy_condition(
                        sd.surface_flux, pair, datum, trace, side)))

        run = build_run(keyfitz_kranzer_problem(KK), SchemeConfig("fv_kk"), n, step_callback=check)
        box["sd"] = run.rhs
        state, _ = solve(run)
        growth.append(float(np.max(np.abs(state.values[..., 1]))))
        worst[n] = seen[0]
    increasing = all(b > a for a, b in zip(growth[:-1], growth[1:]))
    boundary_ok = all(v <= 1e-12 for v in worst.values())
    report(10, increasing and boundary_ok,
           f"max|u2| at N=128/256/512 {_line(growth, '{:.2f}')} strictly increasing={increasing}; "
           f"worst per-step boundary term {_line(worst.values(), '{:.2e}')} <= 1e-12 "
           f"[{time.perf_counter() - started:.0f} s]")
    assert increasing and boundary_ok


# ---------------------------------------------------------------------------
# 11-12: integrator and oracle

def _van_der_pol(u, t, mu=0.5):
    return np.array([u[1], mu * (1 - u[0] ** 2) * u[1] - u[0]])


def test_criterion_11_time_integrator_order(report):
    t_end = 2.0
    exact = solve_ivp(lambda t, u: _van_der_pol(u, t), (0.0, t_end), [2.0, 0.0], method="DOP853",
                      rtol=1e-13, atol=1e-14).y[:, -1]
    errors = []
    for dt in (0.2, 0.1, 0.05, 0.025):
        u = np.array([2.0, 0.0])
        for i in range(int(round(t_end / dt))):
            u = ti.ssprk104_step(_van_der_pol, u, dt, i * dt)
        errors.append(float(np.max(np.abs(u - exact))))
    rates = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    passed = abs(rates[-1] - 4.0) <= 0.1
    report(11, passed, f"Van der Pol mu=0.5 vs DOP853: observed orders {_line(rates, '{:.3f}')}, "
                       f"finest {rates[-1]:.3f} in 4.0 +- 0.1")
    assert passed


def test_criterion_12_oracle_soundness(report):
    started = time.perf_counter()
    rng = np.random.default_rng(12)
    n = 16384
    x = cell_centers(-1.0, 1.0, n)
    worst_rh, worst_l1 = 0.0, 0.0
    for law in (CUBIC, QUARTIC):
        for _ in range(100):
            u_left, u_right = rng.uniform(-3, 3, 2)
            sol = classical_riemann_solution(law, u_left, u_right)
            scale = max(1.0, abs(float(law.f(u_left))), abs(float(law.f(u_right))))
            worst_rh = max(worst_rh, rankine_hugoniot_residual(law, sol) / scale)
            lo, hi = min(u_left, u_right), max(u_left, u_right)
            speed = float(np.max(law.max_wave_speed(np.linspace(lo, hi, 2001))))
            t = 0.4 / speed
            u = godunov_fv_reference(law, np.where(x < 0, u_left, u_right), -1.0, 1.0, t)
            l1 = np.sum(np.abs(u - sol(x / t))) * (2.0 / n) / abs(u_left - u_right)
            worst_l1 = max(worst_l1, float(l1))
    passed = worst_rh <= 1e-6 and worst_l1 <= 2e-2
    report(12, passed, f"200 cubic/quartic pairs: RH residual {worst_rh:.2e} <= 1e-6 (relative to max|f|), "
                       f"L1 vs Godunov N=16384 {worst_l1:.2e} <= 2e-2 (relative to |u_L - u_R|) "
                       f"[{time.perf_counter() - started:.0f} s]")
    assert passed
