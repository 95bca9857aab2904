"""Interior dissipation: FD artificial dissipation, spectral viscosity,
Legendre dissipation and modal filters.

Every :class:`DissipationOperator` acts along the last axis and stores the
diagonal of the norm it is dissipative in, so ``u . (mass * apply(u)) <= 0`` and
``sum(mass * apply(u)) == 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import legendre as npleg

from .sbp_ops import fd_sbp, lobatto_nodes_weights

MACHINE_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True, eq=False)
class DissipationOperator:
    kind: str
    parameters: dict
    mass: np.ndarray
    apply_fn: Callable = field(repr=False)

    def apply(self, u):
        return self.apply_fn(np.asarray(u, dtype=float))

    __call__ = apply


# ---------------------------------------------------------------------------
# finite differences

def _forward_difference(u, periodic):
    if periodic:
        return np.roll(u, -1, axis=-1) - u
    return np.diff(u, axis=-1)


def _forward_difference_transpose(v, periodic):
    if periodic:
        return np.roll(v, 1, axis=-1) - v
    pad = [(0, 0)] * (v.ndim - 1) + [(1, 1)]
    return -np.diff(np.pad(v, pad), axis=-1)


def fd_artificial_dissipation(order, strength, n_nodes, dx, periodic, weights=None) -> DissipationOperator:
    """``-strength M^-1 D_s^T D_s`` with ``D_s`` the s-th undivided difference.

    Bounded grids use the one-sided narrowing where ``D_s`` only has the
    ``n - s`` rows that fit inside the grid. ``weights`` defaults to ``dx`` on
    periodic grids and to the diagonal FD-SBP norm of the same order otherwise.
    """
    if order not in (2, 4, 6):
        raise ValueError(f"unsupported dissipation order {order}; choose 2, 4 or 6")
    if strength < 0:
        raise ValueError("strength must be non-negative")
    s = order // 2
    if n_nodes <= order:
        raise ValueError(f"need more than {order} nodes, got {n_nodes}")
    if weights is None:
        if periodic:
            weights = np.full(n_nodes, float(dx))
        else:
            weights = fd_sbp(order, n_nodes, dx * (n_nodes - 1)).weights
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (n_nodes,):
        raise ValueError("weights must have one entry per node")
    inv_weights = 1.0 / weights
    strength = float(strength)

    def apply(u):
        v = u
        for _ in range(s):
            v = _forward_difference(v, periodic)
        for _ in range(s):
            v = _forward_difference_transpose(v, periodic)
        return -strength * inv_weights * v

    return DissipationOperator(
        kind="fd_artificial",
        parameters=dict(order=order, strength=strength, dx=float(dx), periodic=bool(periodic)),
        mass=weights,
        apply_fn=apply,
    )


# ---------------------------------------------------------------------------
# spectral viscosity

def spectral_viscosity_coefficients(n_nodes, variant):
    """``Q_k`` for the non-negative rfft modes ``k = 0 .. N/2``."""
    k = np.arange(n_nodes // 2 + 1, dtype=float)
    m = float(np.floor(np.sqrt(n_nodes)))
    q = np.zeros_like(k)
    above = k > m
    with np.errstate(divide="ignore"):
        if variant == "standard":
            q[above] = np.exp(-((n_nodes - k[above]) ** 2) / (k[above] - m) ** 2)
        elif variant == "convergent":
            ramp = above & (k < 2 * m)
            q[ramp] = np.exp(-((2 * m - k[ramp]) ** 2) / (k[ramp] - m) ** 2)
            q[k >= 2 * m] = 1.0
        else:
            raise ValueError(f"unknown spectral viscosity variant {variant!r}")
    return q


def spectral_viscosity(n_nodes, strength, variant="standard", domain_length=2.0) -> DissipationOperator:
    """Fourier multiplier ``-strength k^2 Q_k`` with physical wavenumbers ``k``."""
    if n_nodes % 2:
        raise ValueError("spectral viscosity needs an even node count")
    if strength < 0:
        raise ValueError("strength must be non-negative")
    q = spectral_viscosity_coefficients(n_nodes, variant)
    k = 2 * np.pi / domain_length * np.arange(n_nodes // 2 + 1)
    multiplier = -float(strength) * k ** 2 * q

    def apply(u):
        return np.fft.irfft(multiplier * np.fft.rfft(u, axis=-1), n=n_nodes, axis=-1)

    return DissipationOperator(
        kind="spectral_viscosity",
        parameters=dict(variant=variant, strength=float(strength), n_nodes=n_nodes,
                        cutoff=int(np.floor(np.sqrt(n_nodes))), domain_length=float(domain_length)),
        mass=np.full(n_nodes, domain_length / n_nodes),
        apply_fn=apply,
    )


# ---------------------------------------------------------------------------
# Legendre modes on Lobatto nodes

def legendre_vandermonde(degree):
    """``V[i, n] = P_n(x_i)`` on the Lobatto nodes of the given degree."""
    nodes, _ = lobatto_nodes_weights(degree)
    return npleg.legvander(nodes, degree)


def legendre_projection(degree):
    """Nodal-to-modal map built from Lobatto quadrature.

    The discrete norm of ``P_p`` on ``p + 1`` Lobatto nodes is ``2/p`` instead
    of ``2/(2p+1)``; using it makes the projection the exact inverse of the
    Vandermonde matrix.
    """
    nodes, weights = lobatto_nodes_weights(degree)
    V = npleg.legvander(nodes, degree)
    norms = 2.0 / (2.0 * np.arange(degree + 1) + 1.0)
    norms[-1] = 2.0 / degree
    return (V * weights[:, None]).T / norms[:, None]


def legendre_dissipation(degree, strength=1.0) -> DissipationOperator:
    """Nodal form of ``d/dx((1 - x^2) du/dx)`` on the reference element."""
    if degree < 0:
        raise ValueError("degree must be non-negative")
    if degree == 0:
        matrix = np.zeros((1, 1))
        weights = np.array([2.0])
    else:
        _, weights = lobatto_nodes_weights(degree)
        n = np.arange(degree + 1)
        matrix = legendre_vandermonde(degree) @ np.diag(-n * (n + 1.0)) @ legendre_projection(degree)
    matrix = float(strength) * matrix

    return DissipationOperator(
        kind="legendre",
        parameters=dict(degree=int(degree), strength=float(strength)),
        mass=weights,
        apply_fn=lambda u: u @ matrix.T,
    )


@dataclass(frozen=True, eq=False)
class ModalFilter:
    coefficients: np.ndarray
    degree: int
    filter_order: int
    strength: float
    dt: float
    matrix: np.ndarray = field(repr=False)


def modal_exponential_filter(degree, filter_order, dt, machine_eps=MACHINE_EPS) -> ModalFilter:
    """``sigma_n = exp(-eps dt (n(n+1))^s)`` with ``sigma_p = machine_eps``."""
    if degree < 1:
        raise ValueError("filter needs degree >= 1")
    if filter_order < 1:
        raise ValueError("filter order must be >= 1")
    if not dt > 0:
        raise ValueError("dt must be positive")
    p, s = int(degree), int(filter_order)
    n = np.arange(p + 1, dtype=float)
    eps_dt = -np.log(machine_eps) / (p * (p + 1.0)) ** s
    sigma = np.exp(-eps_dt * (n * (n + 1.0)) ** s)
    sigma[-1] = machine_eps
    matrix = legendre_vandermonde(p) @ (sigma[:, None] * legendre_projection(p))
    return ModalFilter(
        coefficients=sigma,
        degree=p,
        filter_order=s,
        strength=float(eps_dt / dt),
        dt=float(dt),
        matrix=matrix,
    )


def apply_modal_filter(filt: ModalFilter, values):
    """Filter each element's nodal values (last axis holds the p + 1 nodes)."""
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != filt.degree + 1:
        raise ValueError(f"expected {filt.degree + 1} values per element, got {values.shape[-1]}")
    return values @ filt.matrix.T
