"""Two-point numerical fluxes ``f_num(u_minus, u_plus)``.

Every flux evaluates on numpy arrays. Scalar fluxes also carry a factory for a
compiled scalar kernel that the fast assembly path in :mod:`semidisc` uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numba
import numpy as np

from .entropy_pairs import ConservationLaw, EntropyPair

LOGMEAN_SERIES_THRESHOLD = 1e-4


@dataclass(frozen=True, eq=False)
class TwoPointFlux:
    name: str
    evaluate: Callable
    law: ConservationLaw
    declared_symmetric: bool = False
    declared_ec_for: Optional[str] = None
    declared_es_for: Optional[str] = None
    kernel_factory: Optional[Callable] = field(default=None, repr=False)

    def __call__(self, u_minus, u_plus):
        return self.evaluate(u_minus, u_plus)

    @property
    def kernel(self):
        """Compiled ``(float, float) -> float`` version, or ``None``."""
        if self.kernel_factory is None:
            return None
        cached = self.__dict__.get("_kernel")
        if cached is None:
            cached = self.kernel_factory()
            object.__setattr__(self, "_kernel", cached)
        return cached


def _arr(u):
    return np.asarray(u, dtype=float)


def _njit_pair(func):
    return lambda: numba.njit(cache=False, fastmath=False)(func)


# ---------------------------------------------------------------------------
# cubic and quartic fluxes

def _ec_cubic(a, b):
    return 0.25 * (b * b * b + b * b * a + b * a * a + a * a * a)


def ec_flux_cubic(law=None) -> TwoPointFlux:
    from .entropy_pairs import cubic_law

    return TwoPointFlux(
        name="ec_cubic",
        evaluate=lambda a, b: _ec_cubic(_arr(a), _arr(b)),
        law=law or cubic_law(),
        declared_symmetric=True,
        declared_ec_for="L2",
        kernel_factory=_njit_pair(_ec_cubic),
    )


def _central_l4(a, b):
    return 0.5 * (b * b * b + a * a * a)


def central_flux_l4_cubic(law=None) -> TwoPointFlux:
    from .entropy_pairs import cubic_law

    return TwoPointFlux(
        name="central_l4_cubic",
        evaluate=lambda a, b: _central_l4(_arr(a), _arr(b)),
        law=law or cubic_law(),
        declared_symmetric=True,
        declared_ec_for="L4",
        kernel_factory=_njit_pair(_central_l4),
    )


def ec_flux_l2l4_cubic(alpha=0.01, law=None) -> TwoPointFlux:
    from .entropy_pairs import cubic_law

    if not alpha > 0:
        raise ValueError("alpha must be positive")
    alpha = float(alpha)

    def flux(a, b):
        a2, b2 = a * a, b * b
        top = (b2 * b2 * b + b2 * b2 * a + b2 * b * a2 + b2 * a2 * a + b * a2 * a2 + a2 * a2 * a
               + 0.5 * alpha * (b2 * b + b2 * a + b * a2 + a2 * a))
        return 0.5 * top / (b2 + b * a + a2 + alpha)

    def evaluate(a, b):
        a, b = _arr(a), _arr(b)
        return np.where(a == b, a * a * a, flux(a, b))

    def factory():
        inner = numba.njit(flux)

        def kernel(a, b):
            if a == b:
                return a * a * a
            return inner(a, b)

        return numba.njit(kernel)

    return TwoPointFlux(
        name="ec_l2l4_cubic",
        evaluate=evaluate,
        law=law or cubic_law(),
        declared_symmetric=True,
        declared_ec_for="L2L4",
        kernel_factory=factory,
    )


def _ec_quartic(a, b):
    a2, b2 = a * a, b * b
    return ((b2 * b2 + a * b2 * b + a2 * b2 + a2 * a * b + a2 * a2) / 5.0
            - 10.0 * (b2 + a * b + a2) / 3.0
            + 1.5 * (b + a))


def ec_flux_quartic(law=None) -> TwoPointFlux:
    from .entropy_pairs import quartic_law

    return TwoPointFlux(
        name="ec_quartic",
        evaluate=lambda a, b: _ec_quartic(_arr(a), _arr(b)),
        law=law or quartic_law(),
        declared_symmetric=True,
        declared_ec_for="L2",
        kernel_factory=_njit_pair(_ec_quartic),
    )


def ec_flux_l2_polynomial(law: ConservationLaw) -> TwoPointFlux:
    """L2 entropy-conservative flux of any polynomial law.

    For ``f = sum c_n u^n`` this is ``sum c_n (sum_j a^j b^(n-j)) / (n+1)``,
    the exact divided difference of the flux potential.
    """
    if law.coefficients is None:
        raise ValueError(f"law {law.name} has no polynomial flux")
    coeffs = np.array(law.coefficients, dtype=float)

    def evaluate(a, b):
        a, b = _arr(a), _arr(b)
        out = np.zeros(np.broadcast(a, b).shape)
        for n, c in enumerate(coeffs):
            if c == 0.0:
                continue
            acc = np.zeros_like(out)
            for j in range(n + 1):
                acc = acc + a ** j * b ** (n - j)
            out = out + c * acc / (n + 1)
        return out

    def factory():
        cs = coeffs.copy()

        def kernel(a, b):
            # running sum S_n = sum_j a^j b^(n-j) obeys S_n = b S_(n-1) + a^n
            total = 0.0
            s = 0.0
            an = 1.0
            for n in range(cs.shape[0]):
                s = b * s + an
                total += cs[n] * s / (n + 1)
                an *= a
            return total

        return numba.njit(kernel)

    return TwoPointFlux(
        name=f"ec_l2_{law.name}",
        evaluate=evaluate,
        law=law,
        declared_symmetric=True,
        declared_ec_for="L2",
        kernel_factory=factory,
    )


def godunov_flux_scalar(law: ConservationLaw) -> TwoPointFlux:
    """Exact Riemann flux: min of f on [a, b] if a <= b, else max on [b, a]."""
    if not law.is_scalar:
        raise ValueError("Godunov flux is implemented for scalar laws only")
    crit = law.critical_points()
    f_crit = law.f(crit) if crit.size else np.array([])
    coeffs = np.array(law.coefficients, dtype=float)
    f = law.f

    def evaluate(a, b):
        a, b = _arr(a), _arr(b)
        fa, fb = f(a), f(b)
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        fmin, fmax = np.minimum(fa, fb), np.maximum(fa, fb)
        for c, fc in zip(crit, f_crit):
            inside = (lo <= c) & (c <= hi)
            fmin = np.where(inside & (fc < fmin), fc, fmin)
            fmax = np.where(inside & (fc > fmax), fc, fmax)
        return np.where(a <= b, fmin, fmax)

    def factory():
        cs = coeffs[::-1].copy()
        cp = np.array(crit, dtype=float)
        fcp = np.array(f_crit, dtype=float)

        def horner(u):
            acc = 0.0
            for c in cs:
                acc = acc * u + c
            return acc

        horner_j = numba.njit(horner)

        def kernel(a, b):
            fa = horner_j(a)
            fb = horner_j(b)
            if a <= b:
                best = min(fa, fb)
                for k in range(cp.shape[0]):
                    if a <= cp[k] <= b and fcp[k] < best:
                        best = fcp[k]
            else:
                best = max(fa, fb)
                for k in range(cp.shape[0]):
                    if b <= cp[k] <= a and fcp[k] > best:
                        best = fcp[k]
            return best

        return numba.njit(kernel)

    return TwoPointFlux(
        name=f"godunov_{law.name}",
        evaluate=evaluate,
        law=law,
        declared_symmetric=False,
        declared_es_for="all",
        kernel_factory=factory,
    )


# ---------------------------------------------------------------------------
# Keyfitz-Kranzer

def logarithmic_mean(a_minus, a_plus):
    """``(a+ - a-) / (log a+ - log a-)`` with a series branch near ``a+ = a-``."""
    a, b = _arr(a_minus), _arr(a_plus)
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("logarithmic mean needs positive arguments")
    ratio = (b - a) / (b + a)
    u = ratio * ratio
    small = np.abs(ratio) <= LOGMEAN_SERIES_THRESHOLD
    series = 0.5 * (a + b) / (1.0 + u / 3.0 + u * u / 5.0 + u * u * u / 7.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        # b - a is exact near the crossover, log1p keeps the quotient accurate
        direct = (b - a) / np.log1p((b - a) / a)
    out = np.where(small, series, direct)
    return out if out.ndim else float(out)


def _d_coth_d(d):
    # mean(e^x) / logmean(e^x) over an exponent jump of 2d, overflow free
    d = _arr(d)
    small = np.abs(d) < 1e-4
    d2 = d * d
    series = 1.0 + d2 / 3.0 - d2 * d2 / 45.0 + 2.0 * d2 * d2 * d2 / 945.0
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = d / np.tanh(d)
    return np.where(small, series, direct)


def ec_flux_keyfitz_kranzer(law=None) -> TwoPointFlux:
    from .entropy_pairs import keyfitz_kranzer_law

    def evaluate(um, up):
        um, up = _arr(um), _arr(up)
        a1, a2 = um[..., 0], um[..., 1]
        b1, b2 = up[..., 0], up[..., 1]
        log_a = 0.5 * a1 * a1 - a2
        log_b = 0.5 * b1 * b1 - b2
        mean1 = 0.5 * (a1 + b1)
        f1 = (b1 * b1 + b1 * a1 + a1 * a1) / 6.0 + 0.5 * (log_a + log_b)
        mean_g = 0.5 * (a1 ** 3 / 6.0 + a1 * log_a + b1 ** 3 / 6.0 + b1 * log_b)
        ratio = _d_coth_d(0.5 * (log_b - log_a))
        f2 = mean1 * f1 - mean_g - ratio * mean1
        return np.stack([f1, f2], axis=-1)

    return TwoPointFlux(
        name="ec_keyfitz_kranzer",
        evaluate=evaluate,
        law=law or keyfitz_kranzer_law(),
        declared_symmetric=True,
        declared_ec_for="KK",
    )


# ---------------------------------------------------------------------------
# dissipation and residuals

def llf_dissipative_flux(base: TwoPointFlux, law: ConservationLaw = None) -> TwoPointFlux:
    """``base - lambda/2 (u+ - u-)`` with the larger local wave speed."""
    law = law or base.law
    speed = law.max_wave_speed

    def evaluate(um, up):
        um, up = _arr(um), _arr(up)
        lam = np.maximum(speed(um), speed(up))
        if not law.is_scalar:
            lam = lam[..., None]
        return base.evaluate(um, up) - 0.5 * lam * (up - um)

    factory = None
    if law.is_scalar and base.kernel_factory is not None and law.coefficients is not None:
        coeffs = np.array(law.polynomial.deriv().coef[::-1], dtype=float)

        def factory():
            inner = base.kernel
            cs = coeffs.copy()

            def speed_j(u):
                acc = 0.0
                for c in cs:
                    acc = acc * u + c
                return abs(acc)

            speed_k = numba.njit(speed_j)

            def kernel(a, b):
                lam = max(speed_k(a), speed_k(b))
                return inner(a, b) - 0.5 * lam * (b - a)

            return numba.njit(kernel)

    return TwoPointFlux(
        name=f"llf({base.name})",
        evaluate=evaluate,
        law=law,
        declared_symmetric=False,
        declared_es_for=base.declared_ec_for,
        kernel_factory=factory,
    )


def ec_residual(flux: TwoPointFlux, pair: EntropyPair, u_minus, u_plus):
    """Signed ``jump(w) . f_num - jump(psi)``; zero for EC, non-positive for ES."""
    um, up = _arr(u_minus), _arr(u_plus)
    jump_w = pair.w(up) - pair.w(um)
    fnum = flux.evaluate(um, up)
    jump_psi = pair.psi(up) - pair.psi(um)
    if pair.law.is_scalar:
        out = jump_w * fnum - jump_psi
    else:
        out = np.sum(jump_w * fnum, axis=-1) - jump_psi
    return out if np.ndim(out) else float(out)
