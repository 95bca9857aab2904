"""Conservation laws, entropy pairs and discrete entropy functionals.

Scalar states are plain arrays. System states carry the components on the
last axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import Polynomial

# exp overflows just above this exponent
LOG_OVERFLOW = 709.0


class EntropyOverflowError(FloatingPointError):
    """Raised when an exponential entropy would overflow double precision."""


@dataclass(frozen=True, eq=False)
class ConservationLaw:
    name: str
    n_components: int
    f: Callable
    max_wave_speed: Callable
    jacobian: Callable
    admissible_set: str = "all real states"
    coefficients: Optional[tuple] = None

    @property
    def is_scalar(self) -> bool:
        return self.n_components == 1

    @property
    def polynomial(self) -> Optional[Polynomial]:
        if self.coefficients is None:
            return None
        return Polynomial(self.coefficients)

    def critical_points(self) -> np.ndarray:
        """Real zeros of ``f'`` for polynomial scalar laws, sorted."""
        return _critical_points(self)


def _critical_points(law):
    cached = law.__dict__.get("_critical_cache")
    if cached is not None:
        return cached
    if law.coefficients is None:
        raise ValueError(f"law {law.name} has no polynomial flux")
    df = law.polynomial.deriv()
    ddf = df.deriv()
    if df.degree() < 1:
        roots = np.array([])
    else:
        raw = df.roots()
        scale = max(1.0, np.max(np.abs(raw)))
        roots = np.sort(raw[np.abs(raw.imag) <= 1e-7 * scale].real)
        polished = []
        for r in roots:
            for _ in range(4):
                slope = ddf(r)
                if slope == 0:
                    break
                r = r - df(r) / slope
            if abs(df(r)) > 1e-8 * max(1.0, np.max(np.abs(df.coef)) * scale ** df.degree()):
                raise ArithmeticError(f"critical point of {law.name} flux did not converge near {r}")
            polished.append(r)
        roots = np.unique(np.array(polished))
    object.__setattr__(law, "_critical_cache", roots)
    return roots


def polynomial_law(coefficients, name="polynomial") -> ConservationLaw:
    """Scalar law with ``f(u) = sum_k c_k u**k``, coefficients in ascending order."""
    coefficients = tuple(float(c) for c in coefficients)
    poly = Polynomial(coefficients)
    dpoly = poly.deriv()
    return ConservationLaw(
        name=name,
        n_components=1,
        f=lambda u: poly(np.asarray(u, dtype=float)),
        max_wave_speed=lambda u: np.abs(dpoly(np.asarray(u, dtype=float))),
        jacobian=lambda u: dpoly(np.asarray(u, dtype=float)),
        coefficients=coefficients,
    )


def cubic_law() -> ConservationLaw:
    law = polynomial_law([0.0, 0.0, 0.0, 1.0], name="cubic")
    return ConservationLaw(
        name="cubic",
        n_components=1,
        f=lambda u: np.asarray(u, dtype=float) ** 3,
        max_wave_speed=lambda u: 3.0 * np.asarray(u, dtype=float) ** 2,
        jacobian=lambda u: 3.0 * np.asarray(u, dtype=float) ** 2,
        coefficients=law.coefficients,
    )


def quartic_law() -> ConservationLaw:
    def flux(u):
        u = np.asarray(u, dtype=float)
        u2 = u * u
        return u2 * (u2 - 10.0) + 3.0 * u

    def speed(u):
        u = np.asarray(u, dtype=float)
        return 4.0 * u ** 3 - 20.0 * u + 3.0

    return ConservationLaw(
        name="quartic",
        n_components=1,
        f=flux,
        max_wave_speed=lambda u: np.abs(speed(u)),
        jacobian=speed,
        coefficients=(0.0, 3.0, -10.0, 0.0, 1.0),
    )


def keyfitz_kranzer_law() -> ConservationLaw:
    def flux(u):
        u = np.asarray(u, dtype=float)
        u1, u2 = u[..., 0], u[..., 1]
        return np.stack([u1 * u1 - u2, u1 ** 3 / 3.0 - u1], axis=-1)

    def jacobian(u):
        u = np.asarray(u, dtype=float)
        u1 = u[..., 0]
        out = np.zeros(u.shape[:-1] + (2, 2))
        out[..., 0, 0] = 2.0 * u1
        out[..., 0, 1] = -1.0
        out[..., 1, 0] = u1 * u1 - 1.0
        return out

    return ConservationLaw(
        name="keyfitz_kranzer",
        n_components=2,
        f=flux,
        max_wave_speed=lambda u: np.abs(np.asarray(u, dtype=float)[..., 0]) + 1.0,
        jacobian=jacobian,
    )


# ---------------------------------------------------------------------------
# entropy pairs

@dataclass(frozen=True, eq=False)
class EntropyPair:
    kind: str
    law: ConservationLaw
    U: Callable
    w: Callable
    F: Callable
    psi: Callable
    alpha: Optional[float] = None
    hessian: Optional[Callable] = field(default=None, repr=False)
    # polynomial representations for scalar laws (w and psi in terms of u)
    w_poly: Optional[Polynomial] = field(default=None, repr=False)
    psi_poly: Optional[Polynomial] = field(default=None, repr=False)


def _scalar_pair(kind, law, entropy, alpha=None):
    if law.coefficients is None:
        raise ValueError(f"scalar entropy pairs need a polynomial flux, law {law.name} has none")
    flux = law.polynomial
    w_poly = entropy.deriv()
    # d psi/du = f(u) w'(u) and psi(0) = 0
    psi_poly = (flux * w_poly.deriv()).integ()
    psi_poly = psi_poly - psi_poly(0.0)

    def F(u):
        u = np.asarray(u, dtype=float)
        return w_poly(u) * law.f(u) - psi_poly(u)

    return EntropyPair(
        kind=kind,
        law=law,
        U=lambda u: entropy(np.asarray(u, dtype=float)),
        w=lambda u: w_poly(np.asarray(u, dtype=float)),
        F=F,
        psi=lambda u: psi_poly(np.asarray(u, dtype=float)),
        alpha=alpha,
        hessian=lambda u: entropy.deriv(2)(np.asarray(u, dtype=float)),
        w_poly=w_poly,
        psi_poly=psi_poly,
    )


def _kk_log_entropy(u):
    u = np.asarray(u, dtype=float)
    return 0.5 * u[..., 0] ** 2 - u[..., 1]


def _kk_exp(u):
    exponent = _kk_log_entropy(u)
    if np.any(exponent > LOG_OVERFLOW):
        worst = float(np.max(exponent))
        raise EntropyOverflowError(f"Keyfitz-Kranzer entropy exp({worst:.6g}) overflows")
    return np.exp(exponent)


def _kk_pair(law):
    def w(u):
        u = np.asarray(u, dtype=float)
        U = _kk_exp(u)
        return np.stack([u[..., 0] * U, -U], axis=-1)

    def F(u):
        u = np.asarray(u, dtype=float)
        return u[..., 0] * _kk_exp(u)

    def psi(u):
        u = np.asarray(u, dtype=float)
        u1, u2 = u[..., 0], u[..., 1]
        return (2.0 / 3.0 * u1 ** 3 - u1 * u2) * _kk_exp(u)

    def hessian(u):
        u = np.asarray(u, dtype=float)
        U = _kk_exp(u)
        u1 = u[..., 0]
        out = np.empty(u.shape[:-1] + (2, 2))
        out[..., 0, 0] = (1.0 + u1 * u1) * U
        out[..., 0, 1] = -u1 * U
        out[..., 1, 0] = -u1 * U
        out[..., 1, 1] = U
        return out

    return EntropyPair(kind="KK", law=law, U=_kk_exp, w=w, F=F, psi=psi, hessian=hessian)


def entropy_pair(kind, law, alpha=0.01) -> EntropyPair:
    """Entropy pair of the given kind: ``"L2"``, ``"L4"``, ``"L2L4"`` or ``"KK"``."""
    kind = kind.upper()
    if kind == "KK":
        if law.name != "keyfitz_kranzer":
            raise ValueError("the KK entropy belongs to the Keyfitz-Kranzer system")
        return _kk_pair(law)
    if not law.is_scalar:
        raise ValueError(f"entropy kind {kind} is only defined for scalar laws")
    if kind == "L2":
        return _scalar_pair(kind, law, Polynomial([0.0, 0.0, 0.5]))
    if kind == "L4":
        return _scalar_pair(kind, law, Polynomial([0.0, 0.0, 0.0, 0.0, 0.25]))
    if kind == "L2L4":
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        return _scalar_pair(kind, law, Polynomial([0.0, 0.0, 0.5 * alpha, 0.0, 0.25]), alpha=float(alpha))
    raise ValueError(f"unknown entropy kind {kind!r}")


# ---------------------------------------------------------------------------
# discrete functionals

def _check_mass(values, mass, pair):
    values = np.asarray(values, dtype=float)
    mass = np.asarray(mass, dtype=float)
    node_shape = values.shape if pair.law.is_scalar else values.shape[:-1]
    if not pair.law.is_scalar and values.shape[-1] != pair.law.n_components:
        raise ValueError(f"state has {values.shape[-1]} components, law needs {pair.law.n_components}")
    try:
        np.broadcast_to(mass, node_shape)
    except ValueError:
        raise ValueError(f"mass shape {mass.shape} does not match nodal shape {node_shape}") from None
    if mass.ndim > len(node_shape) or (mass.ndim and mass.shape[-1] != node_shape[-1]):
        raise ValueError(f"mass shape {mass.shape} does not match nodal shape {node_shape}")
    return values, mass


def total_entropy(values, mass, pair) -> float:
    """Quadrature of the entropy: ``sum M_ii U(u_i)`` over all elements."""
    values, mass = _check_mass(values, mass, pair)
    return float(np.sum(mass * pair.U(values)))


def semidiscrete_entropy_rate(values, rhs_values, mass, pair) -> float:
    """``sum w(u_i) . M_ii rhs_i``, the time derivative of the total entropy."""
    values, mass = _check_mass(values, mass, pair)
    rhs_values = np.asarray(rhs_values, dtype=float)
    if rhs_values.shape != values.shape:
        raise ValueError(f"rhs shape {rhs_values.shape} differs from state shape {values.shape}")
    w = pair.w(values)
    if pair.law.is_scalar:
        local = w * rhs_values
    else:
        local = np.sum(w * rhs_values, axis=-1)
    return float(np.sum(mass * local))
