"""Property checks on a discretized run: SBP identities, EC flux residuals,
entropy rate, conservation and the boundary entropy condition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .entropy_pairs import entropy_pair, semidiscrete_entropy_rate
from .num_fluxes import ec_residual
from .problems import Run, ec_volume_flux
from .sbp_ops import sbp_residual
from .semidisc import PERIODIC, Semidiscretization, check_boundary_entropy_condition


@dataclass(frozen=True)
class AuditResult:
    name: str
    passed: bool
    value: float  # the measured residual
    tolerance: float
    detail: str = ""

    def as_dict(self):
        return {"name": self.name, "passed": self.passed, "value": self.value,
                "tolerance": self.tolerance, "detail": self.detail}


def _state_range(run: Run):
    u0 = np.asarray(run.initial.values, dtype=float)
    if run.problem.law.is_scalar:
        lo, hi = float(u0.min()), float(u0.max())
        pad = 0.1 * max(1.0, hi - lo)
        return lo - pad, hi + pad
    return None


def _random_states(run: Run, rng, count, shape):
    """Random states in the range of the initial data (perturbations of it for systems)."""
    span = _state_range(run)
    if span is not None:
        return rng.uniform(span[0], span[1], size=(count,) + shape)
    u0 = np.asarray(run.initial.values, dtype=float)
    return u0[None] + 0.05 * rng.standard_normal((count,) + u0.shape)


def _pair_for(run: Run):
    law = run.problem.law
    if law.name == "keyfitz_kranzer":
        return entropy_pair("KK", law)
    if run.scheme.kind == "tecno":
        return entropy_pair(run.scheme.entropy, law, run.scheme.alpha)
    return entropy_pair("L2", law)


def audit_sbp(run: Run, tolerance=1e-12, corrupt=None):
    """``corrupt(op) -> op`` lets tests feed a broken operator."""
    rhs = run.rhs
    if not isinstance(rhs, Semidiscretization):
        return AuditResult("sbp", True, 0.0, tolerance, "no SBP operator in this scheme")
    op = rhs.operator if corrupt is None else corrupt(rhs.operator)
    value = sbp_residual(op)
    return AuditResult("sbp", value <= tolerance, value, tolerance)


def audit_ec_flux(run: Run, rng, samples=1000, tolerance=1e-11):
    """``|ec_residual| <= tolerance (1 + |jump psi|)`` on random pairs."""
    pair = _pair_for(run)
    law = run.problem.law
    if run.scheme.kind == "tecno":
        flux = run.rhs.ec_flux
    else:
        flux = ec_volume_flux(law)
    states = _random_states(run, rng, 2 * samples, ())
    if law.is_scalar:
        um, up = states[:samples], states[samples:]
    else:
        flat = states.reshape(-1, law.n_components)
        pick = rng.integers(0, flat.shape[0], size=(2, samples))
        um, up = flat[pick[0]], flat[pick[1]]
    res = np.abs(np.asarray(ec_residual(flux, pair, um, up)))
    scale = 1.0 + np.abs(pair.psi(up) - pair.psi(um))
    worst = float(np.max(res / scale))
    return AuditResult("ec_flux", worst <= tolerance, worst, tolerance, f"{flux.name}, entropy {pair.kind}")


def _tendency(run: Run, u):
    return run.rhs.rhs(u, 0.0) if isinstance(run.rhs, Semidiscretization) else run.rhs(u, 0.0)


def audit_entropy_rate(run: Run, rng, samples=100, tolerance=1e-10):
    """The entropy rate minus what the boundaries may supply is ``<= 0``.

    Periodic schemes without any dissipation must conserve entropy, so there
    the check is on ``|rate|``. Values are relative to ``sum M |w . rhs|``.
    """
    pair = _pair_for(run)
    shape = np.asarray(run.initial.values).shape
    states = _random_states(run, rng, samples, shape)
    sd = run.rhs if isinstance(run.rhs, Semidiscretization) else None
    conservative = (sd is not None and sd.operator.periodic and not sd.dissipation
                    and sd.surface_flux is None)
    worst = -np.inf
    for u in states:
        k = _tendency(run, u)
        rate = semidiscrete_entropy_rate(u, k, run.mass, pair)
        w = pair.w(u)
        local = np.abs(w * k) if run.problem.law.is_scalar else np.abs(np.sum(w * k, axis=-1))
        scale = float(np.sum(run.mass * local)) + 1e-300
        if sd is not None and sd.boundary != PERIODIC:
            gl, gr = sd.boundary_states(u)
            rate -= _boundary_supply(sd, pair, u, gl, gr)
        worst = max(worst, (abs(rate) if conservative else rate) / scale)
    kind = "conserved" if conservative else "non-increasing"
    return AuditResult("entropy_rate", worst <= tolerance, float(worst), tolerance, f"entropy {kind}")


def _boundary_supply(sd, pair, u, gl, gr):
    """Largest entropy gain an ES scheme allows through the two ends.

    ``F(g_L) - F(g_R)`` plus the boundary terms of
    :func:`check_boundary_entropy_condition`; an outflow end uses the interior
    trace, where that term vanishes.
    """
    gain = float(np.sum(pair.F(np.asarray(gl))) - np.sum(pair.F(np.asarray(gr))))
    gain += float(check_boundary_entropy_condition(sd.surface_flux, pair, gl, u[0, 0], "left"))
    gain += float(check_boundary_entropy_condition(sd.surface_flux, pair, gr, u[-1, -1], "right"))
    return gain


def audit_conservation(run: Run, rng, samples=20, tolerance=1e-12):
    """``sum M rhs`` equals the net boundary flux (zero when periodic)."""
    shape = np.asarray(run.initial.values).shape
    states = _random_states(run, rng, samples, shape)
    sd = run.rhs if isinstance(run.rhs, Semidiscretization) else None
    worst = 0.0
    for u in states:
        k = _tendency(run, u)
        mass = np.asarray(run.mass)
        nodes = tuple(range(mass.ndim))
        if k.ndim > mass.ndim:
            mass = mass[..., None]
        total = np.sum(mass * k, axis=nodes)
        net = 0.0
        if sd is not None:
            fl, fr = sd.boundary_fluxes(u)
            net = np.asarray(fl) - np.asarray(fr)
        scale = 1.0 + float(np.sum(np.abs(mass * k)))
        worst = max(worst, float(np.max(np.abs(total - net))) / scale)
    return AuditResult("conservation", worst <= tolerance, worst, tolerance)


def audit_boundary_condition(run: Run, tolerance=1e-12):
    """``w(g) . (f_num(g, u) - f(g)) <= tolerance`` for every end that carries data.

    The condition is not sign-definite in the interior trace (LLF dissipation
    can violate it for traces away from the datum), so it is checked on the
    initial state. Per-step checks along a run use ``step_callback``.
    """
    sd = run.rhs if isinstance(run.rhs, Semidiscretization) else None
    if sd is None or sd.boundary == PERIODIC or sd.operator.periodic:
        return AuditResult("boundary_condition", True, 0.0, tolerance, "no boundary data")
    pair = _pair_for(run)
    states = [np.asarray(run.initial.values, dtype=float)]
    worst = -np.inf
    for u in states:
        for side, datum, trace in (("left", sd.boundary.left_state(0.0), u[0, 0]),
                                   ("right", sd.boundary.right_state(0.0), u[-1, -1])):
            if datum is None:
                continue
            value = float(check_boundary_entropy_condition(sd.surface_flux, pair, datum, trace, side))
            worst = max(worst, value)
    if worst == -np.inf:
        return AuditResult("boundary_condition", True, 0.0, tolerance, "outflow only")
    return AuditResult("boundary_condition", worst <= tolerance, worst, tolerance)


def run_audits(run: Run, seed=0, corrupt=None):
    rng = np.random.default_rng(seed)
    return [
        audit_sbp(run, corrupt=corrupt),
        audit_ec_flux(run, rng),
        audit_entropy_rate(run, rng),
        audit_conservation(run, rng),
        audit_boundary_condition(run),
    ]
