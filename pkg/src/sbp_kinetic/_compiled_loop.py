"""Compiled kernels for scalar multi-element runs with small dense operators.

Arrays are held node-major, shape ``(K, n_elements)``, so the inner loops run
over elements and vectorize. The reference route is the numpy assembly in
:mod:`semidisc` and the Python time loop in :mod:`time_integration`.
"""

from __future__ import annotations

import math

import numba
import numpy as np

from .num_fluxes import ec_flux_l2_polynomial

# reassociation and contraction only: NaN and inf checks must survive
FASTMATH = {"reassoc", "contract", "arcp", "nsz"}

OK, NON_FINITE, BLOW_UP = 0, 1, 2


@numba.njit(fastmath=FASTMATH)
def _horner(desc, x):
    acc = 0.0
    for c in desc:
        acc = acc * x + c
    return acc


@numba.njit(fastmath=FASTMATH)
def rhs_kernel(uT, D, inv_jac, vol, pointwise_only, flux_desc, surf, periodic,
               left_value, right_value, inv_m0, inv_mK, outT):
    """``outT`` = volume + SAT tendency. ``left_value``/``right_value`` NaN means outflow."""
    K, nel = uT.shape
    if K == 1:
        for e in range(nel):
            outT[0, e] = 0.0
    elif pointwise_only:
        for i in range(K):
            for e in range(nel):
                outT[i, e] = 0.0
        for k in range(K):
            for e in range(nel):
                fk = _horner(flux_desc, uT[k, e])
                for i in range(K):
                    outT[i, e] -= D[i, k] * fk
        for i in range(K):
            for e in range(nel):
                outT[i, e] *= inv_jac[e]
    else:
        for i in range(K):
            dii = D[i, i]
            for e in range(nel):
                x = uT[i, e]
                outT[i, e] = dii * vol(x, x)
        for i in range(K):
            for k in range(i + 1, K):
                dik = D[i, k]
                dki = D[k, i]
                for e in range(nel):
                    f = vol(uT[i, e], uT[k, e])
                    outT[i, e] += dik * f
                    outT[k, e] += dki * f
        for i in range(K):
            for e in range(nel):
                outT[i, e] *= -2.0 * inv_jac[e]

    last = K - 1
    for j in range(nel + 1):
        if j == 0:
            if periodic:
                um = uT[last, nel - 1]
            elif math.isnan(left_value):
                um = uT[0, 0]
            else:
                um = left_value
        else:
            um = uT[last, j - 1]
        if j == nel:
            if periodic:
                up = uT[0, 0]
            elif math.isnan(right_value):
                up = uT[last, nel - 1]
            else:
                up = right_value
        else:
            up = uT[0, j]
        fn = surf(um, up)
        if j > 0:
            outT[last, j - 1] -= (fn - _horner(flux_desc, um)) * inv_mK[j - 1]
        if j < nel:
            outT[0, j] += (fn - _horner(flux_desc, up)) * inv_m0[j]


@numba.njit(fastmath=FASTMATH)
def _all_finite(a):
    s = 0.0
    for x in a.flat:
        s += x
    return not (math.isnan(s) or math.isinf(s))


@numba.njit(fastmath=FASTMATH)
def _entropy(uT, massT, entropy_desc):
    s = 0.0
    K, nel = uT.shape
    for i in range(K):
        for e in range(nel):
            s += massT[i, e] * _horner(entropy_desc, uT[i, e])
    return s


@numba.njit(fastmath=FASTMATH)
def ssprk104_loop(uT, t0, dt, n_steps, last_dt, D, inv_jac, vol, pointwise_only,
                  flux_desc, surf, periodic, left_value, right_value, inv_m0, inv_mK,
                  filter_matrix, use_filter, entropy_desc, massT, trace_stride,
                  blowup_limit):
    """Run ``n_steps`` steps in place on ``uT``.

    Returns ``(status, steps_done, trace_times, trace_values)``; on failure
    ``uT`` holds the last accepted state.
    """
    K, nel = uT.shape
    q1 = np.empty_like(uT)
    q2 = np.empty_like(uT)
    k = np.empty_like(uT)
    tmp = np.empty_like(uT)
    trace_on = entropy_desc.shape[0] > 0
    n_trace = 1 + n_steps // trace_stride + 1 if trace_on else 0
    times = np.empty(n_trace)
    values = np.empty(n_trace)
    n_rec = 0
    if trace_on:
        times[0] = t0
        values[0] = _entropy(uT, massT, entropy_desc)
        n_rec = 1
    for step in range(n_steps):
        h_full = last_dt if step == n_steps - 1 else dt
        h = h_full / 6.0
        q1[:, :] = uT
        q2[:, :] = uT
        for stage in range(5):
            rhs_kernel(q1, D, inv_jac, vol, pointwise_only, flux_desc, surf, periodic,
                       left_value, right_value, inv_m0, inv_mK, k)
            if not _all_finite(k):
                return NON_FINITE, step, times[:n_rec], values[:n_rec]
            q1 += h * k
        for i in range(K):
            for e in range(nel):
                q2[i, e] = 0.04 * q2[i, e] + 0.36 * q1[i, e]
                q1[i, e] = 15.0 * q2[i, e] - 5.0 * q1[i, e]
        for stage in range(4):
            rhs_kernel(q1, D, inv_jac, vol, pointwise_only, flux_desc, surf, periodic,
                       left_value, right_value, inv_m0, inv_mK, k)
            if not _all_finite(k):
                return NON_FINITE, step, times[:n_rec], values[:n_rec]
            q1 += h * k
        rhs_kernel(q1, D, inv_jac, vol, pointwise_only, flux_desc, surf, periodic,
                   left_value, right_value, inv_m0, inv_mK, k)
        if not _all_finite(k):
            return NON_FINITE, step, times[:n_rec], values[:n_rec]
        for i in range(K):
            for e in range(nel):
                tmp[i, e] = q2[i, e] + 0.6 * q1[i, e] + 0.1 * h_full * k[i, e]
        if use_filter:
            for i in range(K):
                for e in range(nel):
                    acc = 0.0
                    for m in range(K):
                        acc += filter_matrix[i, m] * tmp[m, e]
                    q1[i, e] = acc
            uT[:, :] = q1
        else:
            uT[:, :] = tmp
        peak = 0.0
        for x in uT.flat:
            if not abs(x) <= peak:
                peak = abs(x)
        if not peak <= blowup_limit:
            return BLOW_UP, step + 1, times[:n_rec], values[:n_rec]
        if trace_on and ((step + 1) % trace_stride == 0 or step == n_steps - 1):
            times[n_rec] = t0 + (step + 1) * dt if step < n_steps - 1 else t0 + step * dt + last_dt
            values[n_rec] = _entropy(uT, massT, entropy_desc)
            n_rec += 1
    return OK, n_steps, times[:n_rec], values[:n_rec]


# ---------------------------------------------------------------------------
# plans

class CompiledPlan:
    """Everything the kernels need for one semi-discretization."""

    def __init__(self, sd, vol, pointwise_only):
        op = sd.operator
        jac = sd.jacobians
        self.sd = sd
        self.D = np.ascontiguousarray(op.D, dtype=float)
        self.inv_jac = 1.0 / jac
        self.inv_m0 = 1.0 / (op.weights[0] * jac)
        self.inv_mK = 1.0 / (op.weights[-1] * jac)
        self.vol = vol
        self.pointwise_only = pointwise_only
        self.flux_desc = np.array(sd.law.coefficients[::-1], dtype=float)
        self.surf = sd.surface_flux.kernel
        from .semidisc import PERIODIC

        self.periodic = sd.boundary == PERIODIC

    def boundary_values(self, t):
        if self.periodic:
            return math.nan, math.nan
        b = self.sd.boundary
        left, right = b.left_state(t), b.right_state(t)
        return (math.nan if left is None else float(left)), (math.nan if right is None else float(right))

    def constant_boundary(self):
        if self.periodic:
            return True
        b = self.sd.boundary
        return not (callable(b.left) or callable(b.right))

    def rhs(self, u, t):
        uT = np.ascontiguousarray(u.T)
        outT = np.empty_like(uT)
        left, right = self.boundary_values(t)
        rhs_kernel(uT, self.D, self.inv_jac, self.vol, self.pointwise_only, self.flux_desc,
                   self.surf, self.periodic, left, right, self.inv_m0, self.inv_mK, outT)
        return np.ascontiguousarray(outT.T)


def compiled_plan(sd):
    """A :class:`CompiledPlan` when ``sd`` fits the compiled route, else ``None``."""
    if "plan" in sd._cache:
        return sd._cache["plan"]
    plan = None
    op = sd.operator
    eligible = (
        sd.use_compiled
        and sd.law.is_scalar
        and not op.periodic
        and op.dense is not None
        and sd.law.coefficients is not None
        and sd.surface_flux is not None
        and sd.surface_flux.kernel is not None
    )
    if eligible:
        strategy = sd.volume_strategy
        if strategy == "flux_differencing":
            vol, pointwise_only = sd.volume_flux.kernel, False
        elif strategy.startswith("split"):
            # flux differencing with the L2 EC flux is the split form
            vol, pointwise_only = ec_flux_l2_polynomial(sd.law).kernel, False
        else:
            vol, pointwise_only = sd.surface_flux.kernel, True
        if vol is not None:
            plan = CompiledPlan(sd, vol, pointwise_only)
    sd._cache["plan"] = plan
    return plan


def compiled_integrate(sd, state, config):
    """Compiled SSPRK(10,4) loop, or ``None`` when the run does not qualify."""
    from .semidisc import NodalState, NonFiniteStateError
    from .time_integration import BlowUpError, _step_sizes

    plan = compiled_plan(sd)
    if (
        plan is None
        or sd.dissipation
        or config.dt_policy.adaptive
        or config.step_callback is not None
        or not plan.constant_boundary()
    ):
        return None
    pair = config.trace_entropy
    if pair is not None:
        if pair.w_poly is None:
            return None
        entropy_poly = pair.w_poly.integ()
        entropy_poly = entropy_poly - entropy_poly(0.0)
        if not np.allclose(entropy_poly(np.linspace(-2, 2, 7)), pair.U(np.linspace(-2, 2, 7)), rtol=1e-12, atol=1e-14):
            return None
        entropy_desc = np.array(entropy_poly.coef[::-1], dtype=float)
    else:
        entropy_desc = np.zeros(0)
    filt = config.post_step_filter
    K = sd.n_nodes
    filter_matrix = np.ascontiguousarray(filt.matrix) if filt is not None else np.eye(K)
    t0 = float(state.time)
    uT = np.ascontiguousarray(np.asarray(state.values, dtype=float).T)
    if config.final_time <= t0:
        return None
    n_steps, last_dt = _step_sizes(t0, config.final_time, config.dt_policy.dt)
    left, right = plan.boundary_values(t0)
    massT = np.ascontiguousarray(sd.mass.T)
    limit = math.inf if config.blowup_limit is None else float(config.blowup_limit)
    status, done, times, values = ssprk104_loop(
        uT, t0, float(config.dt_policy.dt), int(n_steps), float(last_dt), plan.D, plan.inv_jac,
        plan.vol, plan.pointwise_only, plan.flux_desc, plan.surf, plan.periodic, left, right,
        plan.inv_m0, plan.inv_mK, filter_matrix, filt is not None, entropy_desc, massT,
        int(config.trace_stride), limit,
    )
    u = np.ascontiguousarray(uT.T)
    t = config.final_time if done == n_steps else t0 + done * config.dt_policy.dt
    if status == NON_FINITE:
        raise NonFiniteStateError(f"non-finite tendency in step {done + 1} at t={t:.6g}", t)
    if status == BLOW_UP:
        peak = float(np.max(np.abs(u))) if np.all(np.isfinite(u)) else math.inf
        raise BlowUpError(f"|u| = {peak:.3e} exceeds {config.blowup_limit:.1e} at t={t:.6g}",
                          t, NodalState(t, u))
    trace = list(zip(times.tolist(), values.tolist()))
    return NodalState(config.final_time, u), trace
