"""Classical entropy solutions of scalar Riemann problems and a Godunov
finite-volume reference solver.

The classical solution follows the lower convex envelope of ``f`` between the
states when ``u_L < u_R`` and the upper concave envelope when ``u_L > u_R``.
Straight pieces of the envelope are shocks, pieces where the envelope touches
``f`` are rarefactions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from scipy.optimize import brentq

from ..entropy_pairs import ConservationLaw

HULL_POINTS = 10_000


@dataclass(frozen=True)
class Wave:
    kind: str  # "shock" or "rarefaction"
    u_minus: float
    u_plus: float
    speed_minus: float
    speed_plus: float

    @property
    def speed(self):
        return self.speed_minus if self.kind == "shock" else None


@dataclass(frozen=True)
class RiemannSolution:
    law: ConservationLaw
    u_left: float
    u_right: float
    waves: tuple

    def __call__(self, xi):
        """Self-similar value at ``xi = x / t`` (scalar or array)."""
        xi_arr = np.asarray(xi, dtype=float)
        out = np.vectorize(self._at, otypes=[float])(xi_arr)
        return float(out) if out.ndim == 0 else out

    def _at(self, xi):
        u = self.u_left
        for wave in self.waves:
            if xi < wave.speed_minus:
                return u
            if wave.kind == "shock":
                u = wave.u_plus
                continue
            if xi <= wave.speed_plus:
                return _invert_speed(self.law, xi, wave.u_minus, wave.u_plus)
            u = wave.u_plus
        return u

    def shocks(self):
        return [w for w in self.waves if w.kind == "shock"]


def _invert_speed(law, xi, a, b):
    lo, hi = min(a, b), max(a, b)
    g = lambda v: float(law.jacobian(v)) - xi
    ga, gb = g(lo), g(hi)
    if ga == 0:
        return lo
    if gb == 0:
        return hi
    if ga * gb > 0:
        # rounding at the fan edges
        return lo if abs(ga) < abs(gb) else hi
    return brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _lower_hull(u, f):
    """Indices of the lower convex hull of sorted points (monotone chain)."""
    hull = []
    for i in range(u.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (u[b] - u[a]) * (f[i] - f[a]) - (f[b] - f[a]) * (u[i] - u[a])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def _tangent_refine(law, anchor, guess, lo, hi, h):
    """Point ``t`` near ``guess`` where the chord from ``anchor`` touches ``f``."""
    f, df = law.f, law.jacobian
    g = lambda t: float(df(t)) * (t - anchor) - (float(f(t)) - float(f(anchor)))
    a, b = max(lo, guess - h), min(hi, guess + h)
    ga, gb = g(a), g(b)
    if ga * gb > 0 or a == b:
        return guess
    return brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def classical_riemann_solution(law: ConservationLaw, u_left, u_right, n_points=HULL_POINTS) -> RiemannSolution:
    if not law.is_scalar:
        raise ValueError("the classical Riemann oracle handles scalar laws")
    u_left, u_right = float(u_left), float(u_right)
    if u_left == u_right:
        return RiemannSolution(law, u_left, u_right, ())
    lo, hi = min(u_left, u_right), max(u_left, u_right)
    grid = np.linspace(lo, hi, n_points)
    fvals = np.asarray(law.f(grid), dtype=float)
    # the concave envelope is minus the convex envelope of -f
    sign = 1.0 if u_left < u_right else -1.0
    hull = _lower_hull(grid, sign * fvals)
    h = 2.0 * (hi - lo) / (n_points - 1)

    # pieces in increasing u: (kind, a, b)
    pieces = []
    start = hull[0]
    for prev, cur in zip(hull[:-1], hull[1:]):
        if cur - prev > 1:
            if prev > start:
                pieces.append(["rarefaction", grid[start], grid[prev]])
            pieces.append(["shock", grid[prev], grid[cur]])
            start = cur
    if hull[-1] > start:
        pieces.append(["rarefaction", grid[start], grid[hull[-1]]])

    # refine tangency points of every shock whose ends are not the data
    for _ in range(3):
        for n, piece in enumerate(pieces):
            if piece[0] != "shock":
                continue
            a, b = piece[1], piece[2]
            if b != hi:
                b = _tangent_refine(law, a, b, lo, hi, h)
            if a != lo:
                a = _tangent_refine(law, b, a, lo, hi, h)
            piece[1], piece[2] = a, b
            if n > 0:
                pieces[n - 1][2] = a
            if n + 1 < len(pieces):
                pieces[n + 1][1] = b
    # zero-length pieces appear when f is numerically linear on [lo, hi]
    pieces = [p for p in pieces if p[2] > p[1]]

    if sign < 0:
        # traverse from u_left (the upper state) downwards
        pieces = [[kind, b, a] for kind, a, b in reversed(pieces)]
    waves = []
    for kind, a, b in pieces:
        if kind == "shock":
            s = (float(law.f(b)) - float(law.f(a))) / (b - a)
            waves.append(Wave("shock", a, b, s, s))
        else:
            waves.append(Wave("rarefaction", a, b, float(law.jacobian(a)), float(law.jacobian(b))))
    return RiemannSolution(law, u_left, u_right, tuple(waves))


def classical_riemann_oracle(law: ConservationLaw, u_left, u_right, xi):
    """Classical entropy solution of the Riemann problem at ``xi = x/t``."""
    return classical_riemann_solution(law, u_left, u_right)(xi)


def rankine_hugoniot_residual(law, solution: RiemannSolution) -> float:
    """Largest ``|s [u] - [f]|`` over the shocks of ``solution``."""
    worst = 0.0
    for w in solution.shocks():
        jump_f = float(law.f(w.u_plus)) - float(law.f(w.u_minus))
        worst = max(worst, abs(w.speed * (w.u_plus - w.u_minus) - jump_f))
    return worst


# ---------------------------------------------------------------------------
# first-order Godunov finite volumes

@numba.njit(cache=False)
def _horner(desc, x):
    acc = 0.0
    for c in desc:
        acc = acc * x + c
    return acc


@numba.njit(cache=False)
def _godunov_loop(u, dx, final_time, cfl, flux_desc, speed_desc, crit, f_crit, inflections,
                  periodic, left_value, right_value):
    n = u.shape[0]
    fu = np.empty(n + 2)
    ue = np.empty(n + 2)
    fluxes = np.empty(n + 1)
    t = 0.0
    steps = 0
    while t < final_time:
        # fan speeds peak at the ends of the state range or at inflection points inside it
        lo = min(left_value, right_value)
        hi = max(left_value, right_value)
        for i in range(n):
            lo = min(lo, u[i])
            hi = max(hi, u[i])
        smax = max(1e-300, abs(_horner(speed_desc, lo)), abs(_horner(speed_desc, hi)))
        for k in range(inflections.shape[0]):
            if lo < inflections[k] < hi:
                smax = max(smax, abs(_horner(speed_desc, inflections[k])))
        dt = cfl * dx / smax
        if t + dt >= final_time:
            dt = final_time - t
        # extended state with ghost cells at both ends
        ue[0] = u[n - 1] if periodic else left_value
        ue[n + 1] = u[0] if periodic else right_value
        for i in range(n):
            ue[i + 1] = u[i]
        for i in range(n + 2):
            fu[i] = _horner(flux_desc, ue[i])
        for j in range(n + 1):
            a = ue[j]
            b = ue[j + 1]
            fa = fu[j]
            fb = fu[j + 1]
            if a <= b:
                best = min(fa, fb)
                for k in range(crit.shape[0]):
                    if a < crit[k] < b and f_crit[k] < best:
                        best = f_crit[k]
            else:
                best = max(fa, fb)
                for k in range(crit.shape[0]):
                    if b < crit[k] < a and f_crit[k] > best:
                        best = f_crit[k]
            fluxes[j] = best
        for i in range(n):
            u[i] -= dt / dx * (fluxes[i + 1] - fluxes[i])
        t += dt
        steps += 1
        if dt <= 0.0:
            break
    return steps


def godunov_fv_reference(law: ConservationLaw, cell_values, x_left, x_right, final_time,
                         cfl=0.9, periodic=False, left_value=None, right_value=None):
    """First-order Godunov scheme with forward Euler steps.

    Steps use the largest |f'| over the current state range, inflection
    points included. Non-periodic runs hold the ghost states at
    ``left_value``/``right_value`` (default: the initial edge values).
    Returns the cell averages at ``final_time``.
    """
    if law.coefficients is None:
        raise ValueError("the reference solver needs a polynomial scalar law")
    if not 0 < cfl <= 1:
        raise ValueError("cfl must lie in (0, 1]")
    u = np.array(cell_values, dtype=float)
    dx = (x_right - x_left) / u.size
    poly = law.polynomial
    flux_desc = np.array(poly.coef[::-1], dtype=float)
    speed_desc = np.array(poly.deriv().coef[::-1], dtype=float)
    crit = np.asarray(law.critical_points(), dtype=float)
    f_crit = np.asarray(poly(crit), dtype=float)
    roots = poly.deriv(2).roots() if poly.degree() > 2 else np.array([])
    inflections = np.real(roots[np.abs(np.imag(roots)) < 1e-12]).astype(float)
    lv = float(u[0] if left_value is None else left_value)
    rv = float(u[-1] if right_value is None else right_value)
    if periodic:
        lv = rv = float(u[0])
    _godunov_loop(u, dx, float(final_time), float(cfl), flux_desc, speed_desc, crit, f_crit,
                  inflections, bool(periodic), lv, rv)
    return u


def cell_centers(x_left, x_right, n):
    dx = (x_right - x_left) / n
    return x_left + dx * (np.arange(n) + 0.5)
