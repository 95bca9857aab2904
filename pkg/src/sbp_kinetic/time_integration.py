"""Explicit time stepping with step-size policies, filters and entropy traces."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dissipation import ModalFilter, apply_modal_filter
from .entropy_pairs import EntropyPair, total_entropy
from .semidisc import NodalState, NonFiniteStateError, Semidiscretization


class BlowUpError(RuntimeError):
    """The solution exceeded the blow-up limit."""

    def __init__(self, message, time, state):
        super().__init__(message)
        self.time = time
        self.state = state


# ---------------------------------------------------------------------------
# steppers; ``rhs(u, t)`` returns the tendency

def _check_stage(k, stage, t):
    if not np.isfinite(k.sum()) and not np.all(np.isfinite(k)):
        raise NonFiniteStateError(f"non-finite tendency in stage {stage} at t={t:.6g}", t)


def ssprk104_step(rhs, u, dt, t=0.0):
    """One step of the ten-stage fourth-order SSP method, two-register form.

    Stage times follow the abscissae of the method: ``(i-1)/6`` for the first
    five stages and ``(i-4)/6`` for the last five.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    u = np.asarray(u, dtype=float)
    q1 = u.copy()
    q2 = u.copy()
    h = dt / 6.0
    for stage in range(5):
        k = rhs(q1, t + stage * h)
        _check_stage(k, stage + 1, t)
        q1 += h * k
    q2 = 0.04 * q2 + 0.36 * q1
    q1 = 15.0 * q2 - 5.0 * q1
    for stage in range(5, 9):
        k = rhs(q1, t + (stage - 3) * h)
        _check_stage(k, stage + 1, t)
        q1 += h * k
    k = rhs(q1, t + dt)
    _check_stage(k, 10, t)
    return q2 + 0.6 * q1 + 0.1 * dt * k


def euler_step(rhs, u, dt, t=0.0):
    if not dt > 0:
        raise ValueError("dt must be positive")
    u = np.asarray(u, dtype=float)
    k = rhs(u, t)
    _check_stage(k, 1, t)
    return u + dt * k


# ---------------------------------------------------------------------------
# step sizes

@dataclass(frozen=True)
class DtPolicy:
    """Constant step ``dt`` or an adaptive rule ``rule(u) -> dt``."""

    name: str
    dt: Optional[float] = None
    rule: Optional[Callable] = field(default=None, repr=False, compare=False)

    @property
    def adaptive(self):
        return self.rule is not None

    def __call__(self, u):
        if self.rule is not None:
            return float(self.rule(u))
        return self.dt


def fixed(dt) -> DtPolicy:
    if not dt > 0:
        raise ValueError("dt must be positive")
    return DtPolicy("fixed", dt=float(dt))


def cubic_periodic(n) -> DtPolicy:
    return DtPolicy("cubic_periodic", dt=1.0 / (5.0 * n))


def dg(n, degree) -> DtPolicy:
    return DtPolicy("dg", dt=1.0 / (n * (degree ** 2 + 1.0)))


def fd_ibvp(n) -> DtPolicy:
    return DtPolicy("fd_ibvp", dt=1.0 / n)


def riemann(n, degree, speed) -> DtPolicy:
    """``1/((p^2+1) N speed)`` for DG, ``1/(N speed)`` when ``degree`` is None."""
    factor = 1.0 if degree is None else degree ** 2 + 1.0
    return DtPolicy("riemann", dt=1.0 / (factor * n * speed))


def kk_adaptive(dx, law) -> DtPolicy:
    """``dx / (2 max wave speed)`` recomputed from the current state."""
    speed = law.max_wave_speed
    return DtPolicy("kk_adaptive", rule=lambda u: dx / (2.0 * float(np.max(speed(u)))))


@dataclass(frozen=True)
class TimeLoopConfig:
    final_time: float
    dt_policy: DtPolicy
    method: str = "ssprk104"
    post_step_filter: Optional[ModalFilter] = None
    trace_entropy: Optional[EntropyPair] = None
    trace_stride: int = 10
    blowup_limit: Optional[float] = 1e12
    step_callback: Optional[Callable] = field(default=None, repr=False, compare=False)
    use_compiled: bool = True


def _step_sizes(t0, final_time, dt):
    span = final_time - t0
    n = max(1, math.ceil(span / dt - 1e-9))
    return n, span - (n - 1) * dt


def integrate(rhs, state: NodalState, config: TimeLoopConfig, mass=None):
    """Advance ``state`` to ``config.final_time``.

    ``rhs`` is a :class:`Semidiscretization` or any callable ``rhs(u, t)``.
    Returns the final state and the entropy trace as a list of ``(t, entropy)``.
    """
    if isinstance(rhs, Semidiscretization):
        if mass is None:
            mass = rhs.mass
        if config.use_compiled and config.method == "ssprk104":
            from ._compiled_loop import compiled_integrate

            result = compiled_integrate(rhs, state, config)
            if result is not None:
                return result
        func = rhs.rhs
    else:
        func = rhs
    if config.trace_entropy is not None and mass is None:
        raise ValueError("entropy tracing needs the mass weights")
    stepper = {"ssprk104": ssprk104_step, "euler": euler_step}[config.method]
    filt = config.post_step_filter
    pair = config.trace_entropy
    t = float(state.time)
    u = np.array(state.values, dtype=float)
    trace = []
    if pair is not None:
        trace.append((t, total_entropy(u, mass, pair)))
    if config.final_time <= t:
        return NodalState(t, u), trace

    policy = config.dt_policy
    if not policy.adaptive:
        n_steps, last_dt = _step_sizes(t, config.final_time, policy.dt)
    step = 0
    t0 = t
    while True:
        if policy.adaptive:
            dt = policy(u)
            if not dt > 0:
                raise ValueError(f"non-positive step size {dt} at t={t:.6g}")
            done = t + dt >= config.final_time * (1 - 1e-14)
            if done:
                dt = config.final_time - t
        else:
            done = step == n_steps - 1
            dt = last_dt if done else policy.dt
        u = stepper(func, u, dt, t)
        if filt is not None:
            u = apply_modal_filter(filt, u)
        step += 1
        t = config.final_time if done else (t0 + step * policy.dt if not policy.adaptive else t + dt)
        if config.blowup_limit is not None:
            peak = float(np.max(np.abs(u)))
            if not peak <= config.blowup_limit:
                raise BlowUpError(f"|u| = {peak:.3e} exceeds {config.blowup_limit:.1e} at t={t:.6g}",
                                  t, NodalState(t, u))
        if config.step_callback is not None:
            config.step_callback(t, u)
        if pair is not None and (step % config.trace_stride == 0 or done):
            trace.append((t, total_entropy(u, mass, pair)))
        if done:
            break
    return NodalState(t, u), trace
