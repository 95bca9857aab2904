"""TeCNO schemes on periodic uniform grids.

The interface flux is an entropy-conservative flux minus ``lambda/2`` times the
jump of ENO-reconstructed entropy variables. ENO reconstruction uses the
cell-average tables, so each cell yields a left and a right face value.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .entropy_pairs import ConservationLaw, EntropyPair
from .num_fluxes import TwoPointFlux, central_flux_l4_cubic, ec_flux_cubic, ec_flux_l2l4_cubic

# right-face weights c[r][j]: v_{i+1/2} = sum_j c[r][j] v_{i-r+j}
_RIGHT_FACE = {
    2: {
        -1: (Fraction(3, 2), Fraction(-1, 2)),
        0: (Fraction(1, 2), Fraction(1, 2)),
        1: (Fraction(-1, 2), Fraction(3, 2)),
    },
    3: {
        -1: (Fraction(11, 6), Fraction(-7, 6), Fraction(1, 3)),
        0: (Fraction(1, 3), Fraction(5, 6), Fraction(-1, 6)),
        1: (Fraction(-1, 6), Fraction(5, 6), Fraction(1, 3)),
        2: (Fraction(1, 3), Fraction(-7, 6), Fraction(11, 6)),
    },
}


def _weights(order):
    table = _RIGHT_FACE[order]
    right = np.array([[float(c) for c in table[r]] for r in range(order)])
    # v_{i-1/2} uses the table shifted by one stencil
    left = np.array([[float(c) for c in table[r - 1]] for r in range(order)])
    return left, right


def _check_order(order):
    if order not in (2, 3):
        raise ValueError(f"ENO order must be 2 or 3, got {order}")


def eno_stencil_shift(values, order, index) -> int:
    """Left shift ``r`` of the ENO stencil of cell ``index``: cells ``index - r .. index - r + order - 1``."""
    _check_order(order)
    v = np.asarray(values, dtype=float)
    n = v.size
    get = lambda j: v[j % n]
    left = index
    # level one: first differences
    if abs(get(left) - get(left - 1)) <= abs(get(left + 1) - get(left)):
        left -= 1
    if order == 3:
        d_left = get(left + 1) - 2 * get(left) + get(left - 1)
        d_right = get(left + 2) - 2 * get(left + 1) + get(left)
        if abs(d_left) <= abs(d_right):
            left -= 1
    return index - left


def eno_reconstruct(values, order, index):
    """Face values ``(left, right)`` of cell ``index`` from periodic cell averages."""
    _check_order(order)
    v = np.asarray(values, dtype=float)
    n = v.size
    if n < 2 * order - 1:
        raise ValueError(f"need at least {2 * order - 1} cells for order {order}")
    r = eno_stencil_shift(v, order, index)
    stencil = np.array([v[(index - r + j) % n] for j in range(order)])
    left_w, right_w = _weights(order)
    return float(left_w[r] @ stencil), float(right_w[r] @ stencil)


def eno_faces(values, order):
    """Vectorized :func:`eno_reconstruct` over all cells, returns ``(left, right)`` arrays."""
    _check_order(order)
    v = np.asarray(values, dtype=float)
    if v.ndim != 1:
        raise ValueError("eno_faces expects a 1-D periodic array")
    n = v.size
    if n < 2 * order - 1:
        raise ValueError(f"need at least {2 * order - 1} cells for order {order}")
    shifted = lambda s: np.roll(v, -s)  # shifted(s)[i] = v[i + s]
    d1 = shifted(1) - v  # d1[i] = v[i+1] - v[i]
    # r counts how far the stencil moved left
    r = (np.abs(np.roll(d1, 1)) <= np.abs(d1)).astype(int)
    if order == 3:
        d2 = shifted(1) - 2 * v + np.roll(v, 1)  # second difference centred at i
        start = (np.arange(n) - r) % n
        r = r + (np.abs(d2[start]) <= np.abs(d2[(start + 1) % n])).astype(int)
    left_w, right_w = _weights(order)
    face_l = np.zeros_like(v)
    face_r = np.zeros_like(v)
    for j in range(order):
        # value at offset j of the stencil, for every possible shift
        vals_by_shift = [shifted(j - shift) for shift in range(order)]
        vals = np.choose(r, vals_by_shift)
        face_l += left_w[r, j] * vals
        face_r += right_w[r, j] * vals
    return face_l, face_r


# ---------------------------------------------------------------------------
# fluxes

def default_ec_flux(law: ConservationLaw, pair: EntropyPair) -> TwoPointFlux:
    """The EC flux of the cubic law matching the entropy kind."""
    if law.name != "cubic":
        raise ValueError("default EC fluxes are provided for the cubic law only; pass ec_flux")
    if pair.kind == "L2":
        return ec_flux_cubic(law)
    if pair.kind == "L4":
        return central_flux_l4_cubic(law)
    if pair.kind == "L2L4":
        return ec_flux_l2l4_cubic(pair.alpha, law)
    raise ValueError(f"no cubic EC flux for entropy {pair.kind}")


def ec_interior_flux(ec_flux: TwoPointFlux, u, order):
    """EC flux at every interface ``i + 1/2``.

    Order 2 is the two-point flux itself. Order 3 uses the fourth-order
    combination ``4/3 f(u_i, u_i+1) - 1/6 (f(u_i-1, u_i+1) + f(u_i, u_i+2))``.
    """
    up1 = np.roll(u, -1, axis=-1)
    f01 = ec_flux(u, up1)
    if order == 2:
        return f01
    um1 = np.roll(u, 1, axis=-1)
    up2 = np.roll(u, -2, axis=-1)
    return 4.0 / 3.0 * f01 - (ec_flux(um1, up1) + ec_flux(u, up2)) / 6.0


def reconstructed_jumps(pair: EntropyPair, u, order):
    """``[w]_{i+1/2}`` from ENO faces and the cell jumps ``w_{i+1} - w_i``."""
    w = pair.w(u)
    face_l, face_r = eno_faces(w, order)
    recon = np.roll(face_l, -1, axis=-1) - face_r
    cell = np.roll(w, -1, axis=-1) - w
    return recon, cell


def interface_fluxes(law, pair, u, order, ec_flux=None):
    ec_flux = ec_flux or default_ec_flux(law, pair)
    u = np.asarray(u, dtype=float)
    recon, _ = reconstructed_jumps(pair, u, order)
    speed = law.max_wave_speed(u)
    lam = np.maximum(speed, np.roll(speed, -1, axis=-1))
    return ec_interior_flux(ec_flux, u, order) - 0.5 * lam * recon


def tecno_interface_flux(ec_flux: TwoPointFlux, pair: EntropyPair, law, cells, order, interface=None):
    """Flux at ``interface + 1/2`` of a periodic window of cell values.

    ``interface`` defaults to the middle of the window, i.e. between cells
    ``len(cells)//2 - 1`` and ``len(cells)//2``.
    """
    cells = np.asarray(cells, dtype=float)
    if interface is None:
        interface = cells.size // 2 - 1
    return float(interface_fluxes(law, pair, cells, order, ec_flux)[interface])


def tecno_rhs(law, pair, order, values, dx, ec_flux=None):
    """Conservative tendency ``-(f_{i+1/2} - f_{i-1/2}) / dx``."""
    _check_order(order)
    if not dx > 0:
        raise ValueError("dx must be positive")
    flux = interface_fluxes(law, pair, values, order, ec_flux)
    return -(flux - np.roll(flux, 1, axis=-1)) / dx


@dataclass(frozen=True)
class TecnoScheme:
    """Callable ``rhs(u, t)`` for the time loop."""

    law: ConservationLaw
    pair: EntropyPair
    order: int
    dx: float
    ec_flux: TwoPointFlux = None

    def __post_init__(self):
        _check_order(self.order)
        if self.ec_flux is None:
            object.__setattr__(self, "ec_flux", default_ec_flux(self.law, self.pair))

    def __call__(self, u, t=0.0):
        return tecno_rhs(self.law, self.pair, self.order, u, self.dx, self.ec_flux)

    @property
    def mass(self):
        return self.dx
