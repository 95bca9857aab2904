import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sbp_kinetic.analysis.denoise import total_variation, tv_denoise, tv_optimality_violation
from sbp_kinetic.analysis.detection import (
    DetectionParameters,
    default_denoise_strength,
    default_detection,
    detect_discontinuities,
    extract_middle_state,
    kinetic_bounds_scalar_cubic,
    plateaus_above,
    within_bounds,
)
from sbp_kinetic.analysis.kinetic import (
    KineticSample,
    MeasurementSettings,
    fit_affine,
    fit_constant,
    measure_sample,
    quartic_settings,
    run_kinetic_sweep,
    singular_growth_diagnostic,
)
from sbp_kinetic.analysis.overshoot import envelope_overshoot, max_abs_excess
from sbp_kinetic.analysis.riemann import (
    cell_centers,
    classical_riemann_oracle,
    classical_riemann_solution,
    godunov_fv_reference,
    rankine_hugoniot_residual,
)
from sbp_kinetic.entropy_pairs import cubic_law, keyfitz_kranzer_law, quartic_law
from sbp_kinetic.semidisc import NodalState
from sbp_kinetic.time_integration import BlowUpError

CUBIC, QUARTIC = cubic_law(), quartic_law()
RNG = np.random.default_rng(21)


# ---------------------------------------------------------------------------
# total variation and denoising

def test_total_variation_values():
    assert total_variation(np.full(5, 3.0)) == 0.0
    assert total_variation([0, 1, 0]) == 2.0
    v = np.sort(RNG.standard_normal(20))
    assert total_variation(v) == pytest.approx(v[-1] - v[0])


def test_denoise_trivial_cases():
    y = RNG.standard_normal(30)
    np.testing.assert_array_equal(tv_denoise(y, 0.0), y)
    np.testing.assert_array_equal(tv_denoise(np.full(7, 1.5), 3.0), np.full(7, 1.5))
    with pytest.raises(ValueError):
        tv_denoise(y, -1.0)
    with pytest.raises(ValueError):
        tv_denoise([0.0, np.nan], 1.0)


def test_denoise_two_points_closed_form():
    np.testing.assert_allclose(tv_denoise([0.0, 1.0], 0.25), [0.25, 0.75], atol=1e-15)
    # past lam = 1/2 both points meet at the mean
    np.testing.assert_allclose(tv_denoise([0.0, 1.0], 0.8), [0.5, 0.5], atol=1e-15)


def _dual_coordinate_descent(y, lam, sweeps=6000):
    """Projected Gauss-Seidel on the dual ``min |y - D^T z|^2 / 2, |z| <= lam``.

    Works on a batch of rows at once; the primal point is ``x = y - D^T z``.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    n = y.shape[1]
    z = np.zeros((y.shape[0], n - 1))
    x = y.copy()
    for _ in range(sweeps):
        for j in range(n - 1):
            new = np.clip(z[:, j] + 0.5 * (x[:, j + 1] - x[:, j]), -lam, lam)
            delta = new - z[:, j]
            # (D^T z)_j = z_(j-1) - z_j, so x_j gains delta and x_(j+1) loses it
            x[:, j] += delta
            x[:, j + 1] -= delta
            z[:, j] = new
    return x


def test_denoise_matches_dual_coordinate_descent():
    rng = np.random.default_rng(8)
    checked = 0
    for n in range(2, 13):
        count = 1000 // 11 + (1 if n <= 1000 % 11 + 1 else 0)
        y = rng.standard_normal((count, n)) * rng.uniform(0.1, 5, (count, 1))
        lam = 0.3
        ref = _dual_coordinate_descent(y, lam)
        for row, expect in zip(y, ref):
            got = tv_denoise(row, lam)
            assert np.max(np.abs(got - expect)) <= 1e-10
            assert tv_optimality_violation(row, got, lam) <= 1e-10
            checked += 1
    assert checked == 1000


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=40), st.floats(0, 5))
def test_denoise_kkt(values, lam):
    y = np.array(values)
    x = tv_denoise(y, lam)
    assert tv_optimality_violation(y, x, lam) <= 1e-9 * (1 + np.max(np.abs(y)))
    assert total_variation(x) <= total_variation(y) + 1e-12
    assert abs(x.mean() - y.mean()) <= 1e-12 * (1 + np.max(np.abs(y)))


def test_optimality_checker_rejects_wrong_answer():
    y = np.array([0.0, 1.0])
    assert tv_optimality_violation(y, np.array([0.1, 0.9]), 0.25) > 0.1


# ---------------------------------------------------------------------------
# detection and middle states

X = np.linspace(-1.0, 3.0, 1536)


def _plateaus(levels, widths, x=X):
    u = np.empty(x.size)
    edges = np.cumsum([0] + list(widths))
    for level, a, b in zip(levels, edges[:-1], edges[1:]):
        u[a:b] = level
    return u


def test_smooth_ramp_has_no_jumps():
    u = np.linspace(5.0, -2.0, X.size)
    assert detect_discontinuities(X, u, 7, 0.7) == []


def test_single_step_detected_at_the_step():
    u = _plateaus([5.0, -2.0], [700, 836])
    found = detect_discontinuities(X, u, 7, 0.7)
    assert len(found) == 1
    d = found[0]
    assert d.index == 699 and d.sign == -1 and d.size == pytest.approx(7.0)


def test_three_plateaus_bracket_the_middle():
    u = _plateaus([5.0, -3.0, -2.0], [600, 200, 736])
    found = detect_discontinuities(X, u, 7, 0.7)
    assert [d.index for d in found] == [599, 799]
    assert extract_middle_state(X, u, found, 5.0, -2.0) == -3.0


def test_default_threshold_finds_the_small_second_jump():
    u = _plateaus([5.0, -3.0, -2.0], [600, 200, 736])
    params = default_detection(u.size, 5.0, -2.0)
    assert params.window == 7 and params.jump_threshold == pytest.approx(0.7)
    assert len(detect_discontinuities(X, u, params.window, params.jump_threshold)) == 2
    # 0.2 |u_L - u_R| = 1.4 exceeds the second jump
    assert len(detect_discontinuities(X, u, params.window, 1.4)) == 1


def test_classical_structure_has_no_middle_state():
    u = _plateaus([5.0, 1.0, -2.0], [600, 200, 736])
    found = detect_discontinuities(X, u, 7, 0.7)
    assert len(found) == 2
    assert extract_middle_state(X, u, found, 5.0, -2.0) is None


def test_oscillatory_plateau_after_denoising():
    u = _plateaus([5.0, -3.0, -2.0], [600, 200, 736])
    u += 0.05 * (-1.0) ** np.arange(u.size)
    sample = measure_sample(X, u, 5.0, -2.0)
    assert sample.detected and abs(sample.u_middle + 3.0) <= 0.02


def test_noise_free_plateau_shift_is_two_lambda_over_width():
    # a TV minimizer lifts a plateau between two higher ones by 2 lam / width
    lam = default_denoise_strength(X, 5.0)
    for width in (20, 40, 100):
        u = _plateaus([5.0, -3.5, -2.0], [500, width, X.size - 500 - width])
        sample = measure_sample(X, u, 5.0, -2.0)
        assert sample.u_middle == pytest.approx(-3.5 + 2 * lam / width, abs=1e-12)


@pytest.mark.xfail(strict=True, reason="the TV shift 2 lam / width is 2.6e-3 at width 20 on this grid")
def test_synthetic_recovery_within_1e3():
    u = _plateaus([5.0, -3.5, -2.0], [500, 20, X.size - 520])
    sample = measure_sample(X, u, 5.0, -2.0)
    assert abs(sample.u_middle + 3.5) <= 1e-3


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, -3), st.integers(20, 300), st.floats(0, 0.05), st.integers(0, 2 ** 31 - 1))
def test_synthetic_recovery_bound(u_middle, width, amplitude, seed):
    rng = np.random.default_rng(seed)
    u = _plateaus([5.0, u_middle, -2.0], [500, width, X.size - 500 - width])
    u += rng.uniform(-amplitude, amplitude, u.size)
    sample = measure_sample(X, u, 5.0, -2.0)
    lam = default_denoise_strength(X, 5.0)
    assert sample.detected
    # bias of the minimizer plus the sampling error of a median over the plateau
    assert abs(sample.u_middle - u_middle) <= 2 * lam / width + 2.5 * amplitude / np.sqrt(0.8 * width) + 1e-9


def test_below_left_mode_and_above_diagnostic():
    # quartic-like: u_L -> below u_L -> above u_R -> u_R
    u = _plateaus([-2.0, -3.0, 3.0, 2.0], [500, 200, 200, 636])
    found = detect_discontinuities(X, u, 7, 0.4)
    assert extract_middle_state(X, u, found, -2.0, 2.0) is None
    value = extract_middle_state(X, u, found, -2.0, 2.0, require_right_state=False, mode="below_left")
    assert value == -3.0
    assert plateaus_above(u, found, 2.0, 0.4) == [3.0]
    sample = measure_sample(X, u, -2.0, 2.0, quartic_settings(denoise=0.0, jump_threshold=0.4))
    assert sample.detected and sample.u_middle == -3.0 and sample.within_bounds is None
    assert "above u_R: 3" in sample.diagnostic
    with pytest.raises(ValueError):
        extract_middle_state(X, u, found, -2.0, 2.0, mode="sideways")


def test_kinetic_bounds():
    assert kinetic_bounds_scalar_cubic(5.0) == (-5.0, -2.5)
    assert kinetic_bounds_scalar_cubic(2.0) == (-2.0, -1.0)
    assert within_bounds(-5.0, (-5.0, -2.5)) and within_bounds(-2.5, (-5.0, -2.5))
    assert not within_bounds(-5.01, (-5.0, -2.5))
    with pytest.raises(ValueError):
        kinetic_bounds_scalar_cubic(-1.0)


def test_detection_parameters_defaults():
    tol, width = DetectionParameters(window=5, jump_threshold=0.8).resolved()
    assert tol == 0.2 and width == 20


# ---------------------------------------------------------------------------
# kinetic fits and sweeps

def _samples(pairs):
    return [KineticSample(ul, -2.0, um, um is not None, 2 if um is not None else 1) for ul, um in pairs]


def test_fit_exact_line():
    fit = fit_affine(_samples([(u, -0.8 * u) for u in np.arange(2, 8, 0.5)]))
    assert fit.slope == pytest.approx(-0.8) and fit.offset == pytest.approx(0.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0) and fit.n_samples == 12


def test_fit_two_points_and_errors():
    assert fit_affine(_samples([(2.0, -1.5), (3.0, -2.0)])).r_squared == 1.0
    with pytest.raises(ValueError):
        fit_affine(_samples([(2.0, -1.5), (3.0, None)]))
    with pytest.raises(ValueError):
        fit_affine(_samples([(2.0, -1.5), (2.0, -1.6)]))
    fit = fit_constant(_samples([(-3.0, -1.0), (-2.0, -1.2), (-1.0, None)]))
    assert fit.mean == pytest.approx(-1.1) and fit.n_samples == 2


def test_sample_invariants():
    with pytest.raises(ValueError):
        KineticSample(5.0, -2.0, None, True, 2)
    with pytest.raises(ValueError):
        KineticSample(5.0, -2.0, None, False, 1, within_bounds=True)


class _FakeRun:
    def __init__(self, u_left):
        self.u_left = u_left

    def coordinates(self):
        return X


def test_sweep_records_blowups_and_keeps_order():
    def fake_solve(run):
        if run.u_left > 6:
            raise BlowUpError("too big", 0.5, None)
        um = -0.9 * run.u_left
        u = _plateaus([run.u_left, um, -2.0], [600, 200, 736])
        return NodalState(1.0, u), []

    lefts = [3.0, 5.0, 7.0, 4.0]
    for threads in (1, 3):
        samples = run_kinetic_sweep(_FakeRun, lefts, -2.0, threads=threads, solve=fake_solve)
        assert [s.u_left for s in samples] == lefts
        assert [s.detected for s in samples] == [True, True, False, True]
        assert "aborted" in samples[2].diagnostic
        assert samples[1].u_middle == pytest.approx(-4.5, abs=1e-2) and samples[1].within_bounds
    with pytest.raises(ValueError):
        run_kinetic_sweep(_FakeRun, [], -2.0, solve=fake_solve)


def test_growth_diagnostic():
    flat = NodalState(1.0, np.ones((4, 1, 2)))
    table = singular_growth_diagnostic([(128, flat), (256, flat)])
    assert not table.increasing_u1 and not table.increasing_u2
    grow = [(n, NodalState(1.0, np.full((4, 1, 2), float(n)))) for n in (512, 128, 256)]
    table = singular_growth_diagnostic(grow)
    assert [r.n for r in table.rows] == [128, 256, 512] and table.increasing_u2
    with pytest.raises(ValueError):
        singular_growth_diagnostic([(128, flat)])


def test_growth_flag_false_for_bounded_scalar_runs():
    runs = [(n, NodalState(1.0, np.clip(np.linspace(3, -2, n), -2, 3)[:, None])) for n in (64, 128)]
    table = singular_growth_diagnostic(runs)
    assert not table.increasing_u1


# ---------------------------------------------------------------------------
# classical Riemann oracle

def test_oracle_constant_and_far_field():
    assert classical_riemann_oracle(CUBIC, 0.7, 0.7, 3.0) == 0.7
    sol = classical_riemann_solution(CUBIC, 1.0, -1.0)
    assert sol(-100.0) == 1.0 and sol(100.0) == -1.0


def test_oracle_rarefaction_closed_form():
    xi = np.linspace(0.0, 12.0, 41)
    np.testing.assert_allclose(classical_riemann_oracle(CUBIC, 0.0, 2.0, xi), np.sqrt(xi / 3), atol=1e-12)
    assert classical_riemann_oracle(CUBIC, 0.0, 2.0, -1.0) == 0.0
    assert classical_riemann_oracle(CUBIC, 0.0, 2.0, 13.0) == 2.0


def test_oracle_cubic_shock_rarefaction_tangency():
    # u_L > 0 > u_R: a rarefaction from u_L to -u_L/2 then a shock tangent there
    for ul in (1.0, 3.0, 5.0):
        ur = -ul  # tangency point -u_L/2 lies above u_R
        sol = classical_riemann_solution(CUBIC, ul, ur)
        kinds = [w.kind for w in sol.waves]
        assert kinds == ["shock", "rarefaction"]
        shock = sol.waves[0]
        assert shock.u_plus == pytest.approx(-ul / 2, rel=1e-12)
        assert shock.speed == pytest.approx(0.75 * ul ** 2, rel=1e-12)


def test_oracle_single_shock_when_u_right_is_above_tangency():
    sol = classical_riemann_solution(CUBIC, 5.0, -2.0)
    assert [w.kind for w in sol.waves] == ["shock"]
    assert sol.waves[0].speed == pytest.approx((-8.0 - 125.0) / -7.0)


def test_oracle_tiny_jump_has_no_empty_waves():
    # f is linear to machine precision on this interval
    sol = classical_riemann_solution(QUARTIC, 0.0, -4.959938362778964e-124)
    assert sol.waves and all(w.u_minus != w.u_plus for w in sol.waves)
    assert all(np.isfinite([w.speed_minus, w.speed_plus]).all() for w in sol.waves)


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.sampled_from(["cubic", "quartic"]))
def test_oracle_rankine_hugoniot_and_entropy(ul, ur, name):
    law = CUBIC if name == "cubic" else QUARTIC
    sol = classical_riemann_solution(law, ul, ur)
    scale = 1.0 + max(abs(ul), abs(ur)) ** (4 if name == "quartic" else 3)
    assert rankine_hugoniot_residual(law, sol) <= 1e-6 * scale
    speeds = [s for w in sol.waves for s in (w.speed_minus, w.speed_plus)]
    assert all(b >= a - 1e-9 * scale for a, b in zip(speeds[:-1], speeds[1:]))
    # Oleinik: every shock lies on the correct side of f between its states
    for w in sol.shocks():
        lo, hi = sorted((w.u_minus, w.u_plus))
        t = np.linspace(lo, hi, 101)[1:-1]
        chord = law.f(w.u_minus) + w.speed * (t - w.u_minus)
        gap = (law.f(t) - chord) * (1 if w.u_minus < w.u_plus else -1)
        assert np.all(gap >= -1e-6 * scale)


def test_oracle_rejects_systems():
    with pytest.raises(ValueError):
        classical_riemann_solution(keyfitz_kranzer_law(), 0.0, 1.0)


def test_godunov_reference_matches_oracle():
    n, t = 2000, 0.1
    x = cell_centers(-1.0, 1.0, n)
    u0 = np.where(x < 0, 1.0, -1.0)
    u = godunov_fv_reference(CUBIC, u0, -1.0, 1.0, t)
    exact = classical_riemann_oracle(CUBIC, 1.0, -1.0, x / t)
    assert np.sum(np.abs(u - exact)) * (2.0 / n) / 2.0 <= 2e-2
    # inflow f(1) at the left, outflow f(-1) at the right
    assert np.sum(u) * (2.0 / n) == pytest.approx(np.sum(u0) * (2.0 / n) + t * 2.0, abs=1e-12)


def test_godunov_step_sees_fan_speeds():
    # |f'| is 10.3 at the data but about 20 inside the fan (inflection at -1.29)
    n, t, ul, ur = 4096, 0.02, 0.2339, -2.023
    x = cell_centers(-1.0, 1.0, n)
    u = godunov_fv_reference(QUARTIC, np.where(x < 0, ul, ur), -1.0, 1.0, t)
    exact = classical_riemann_oracle(QUARTIC, ul, ur, x / t)
    assert np.sum(np.abs(u - exact)) * (2.0 / n) <= 1e-2
    assert np.all((u >= ur - 1e-12) & (u <= ul + 1e-12))


def test_godunov_reference_bad_inputs():
    with pytest.raises(ValueError):
        godunov_fv_reference(keyfitz_kranzer_law(), np.zeros(4), 0, 1, 0.1)
    with pytest.raises(ValueError):
        godunov_fv_reference(CUBIC, np.zeros(4), 0, 1, 0.1, cfl=1.5)


# ---------------------------------------------------------------------------
# overshoot metrics

def test_envelope_overshoot():
    ref = np.repeat([0.0, 1.0, 0.0, 0.0], 4)
    assert envelope_overshoot(np.array([0.0, 1.0, 0.0, 0.0]), ref, 0) == 0.0
    assert envelope_overshoot(np.array([0.0, 1.2, 0.0, 0.0]), ref, 0) == pytest.approx(0.2)
    # a jump one cell late is absorbed by radius 1
    assert envelope_overshoot(np.array([0.0, 0.0, 1.0, 0.0]), ref, 0) == pytest.approx(1.0)
    assert envelope_overshoot(np.array([0.0, 0.0, 1.0, 0.0]), ref, 1) == 0.0
    # dips below the local minimum count as well
    assert envelope_overshoot(np.array([-0.1, 1.0, 0.0, 0.0]), ref, 0) == pytest.approx(0.1)
    assert envelope_overshoot(np.array([0.0, 0.5, 0.0, 0.0]), ref, 0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        envelope_overshoot(np.zeros(3), ref, 1)
    with pytest.raises(ValueError):
        envelope_overshoot(np.zeros(4), ref, -1)


def test_max_abs_excess():
    assert max_abs_excess(np.array([0.5, -1.2]), np.array([1.0, 0.0])) == pytest.approx(0.2)
