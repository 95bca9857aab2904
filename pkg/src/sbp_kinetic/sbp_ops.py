"""Summation-by-parts derivative operators.

Periodic operators satisfy ``M D + D^T M = 0``; bounded ones satisfy
``M D + D^T M = R^T B R`` with ``B = diag(-1, 1)`` and ``R`` picking the two
boundary nodes. All mass matrices used here are diagonal, so operators store
the diagonal as ``weights``.

Small operators keep a dense ``D``; above :data:`DENSE_LIMIT` nodes the
derivative is applied through a sparse band or an FFT.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction as Fr
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import legendre as npleg

DENSE_LIMIT = 64

BOUNDARY_MATRIX = np.diag([-1.0, 1.0])


@dataclass(frozen=True, eq=False)
class PeriodicSbpOperator:
    """Periodic derivative operator on ``K`` equispaced nodes.

    ``nodes`` are offsets ``j * dx`` from the left end of the period.
    """

    nodes: np.ndarray
    weights: np.ndarray
    accuracy_order: int
    family: str
    period: float
    dense: Optional[np.ndarray] = None
    matrix_free: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    stencil: Optional[np.ndarray] = None
    periodic = True

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def D(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense
        return _dense_from_apply(self.matrix_free, self.n_nodes)

    @property
    def M(self) -> np.ndarray:
        return np.diag(self.weights)

    def apply(self, u):
        """Differentiate along the last axis."""
        if self.dense is not None:
            return u @ self.dense.T
        return self.matrix_free(u)

    def apply_dense(self, u):
        return u @ self.D.T


@dataclass(frozen=True, eq=False)
class SbpOperator:
    """Bounded SBP operator whose nodes include both interval endpoints.

    ``interval`` is the coordinate range the operator was built on; the
    semi-discretization maps it affinely onto each element.
    """

    nodes: np.ndarray
    weights: np.ndarray
    accuracy_order: int
    family: str
    interval: tuple = (-1.0, 1.0)
    dense: Optional[np.ndarray] = None
    sparse: Optional[sp.csr_matrix] = field(default=None, repr=False)
    interior_order: Optional[int] = None
    periodic = False

    def __post_init__(self):
        if self.dense is None and self.sparse is None:
            raise ValueError("operator needs a dense or sparse derivative matrix")
        if np.any(self.weights <= 0):
            raise ValueError("mass matrix diagonal must be strictly positive")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def D(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense
        return self.sparse.toarray()

    @property
    def M(self) -> np.ndarray:
        return np.diag(self.weights)

    @property
    def R(self) -> np.ndarray:
        r = np.zeros((2, self.n_nodes))
        r[0, 0] = 1.0
        r[1, -1] = 1.0
        return r

    @property
    def B(self) -> np.ndarray:
        return BOUNDARY_MATRIX.copy()

    @property
    def length(self) -> float:
        return self.interval[1] - self.interval[0]

    def apply(self, u):
        """Differentiate along the last axis."""
        if self.dense is not None:
            return u @ self.dense.T
        u = np.asarray(u)
        flat = u.reshape(-1, u.shape[-1])
        return np.asarray(self.sparse @ flat.T).T.reshape(u.shape)

    def apply_dense(self, u):
        return u @ self.D.T


def _dense_from_apply(apply, n):
    return apply(np.eye(n)).T


def sbp_residual(op) -> float:
    """Max-norm of the SBP identity defect, relative to ``max |M D|``."""
    D = op.D
    MD = op.weights[:, None] * D
    defect = MD + MD.T
    if not op.periodic:
        R = op.R
        defect = defect - R.T @ op.B @ R
    scale = np.max(np.abs(MD))
    if scale == 0:
        return float(np.max(np.abs(defect)))
    return float(np.max(np.abs(defect)) / scale)


# ---------------------------------------------------------------------------
# periodic operators

CENTRAL_STENCILS = {
    2: [Fr(-1, 2), 0, Fr(1, 2)],
    4: [Fr(1, 12), Fr(-2, 3), 0, Fr(2, 3), Fr(-1, 12)],
    6: [Fr(-1, 60), Fr(3, 20), Fr(-3, 4), 0, Fr(3, 4), Fr(-3, 20), Fr(1, 60)],
}


def periodic_central_fd(order, n_nodes, dx) -> PeriodicSbpOperator:
    """Skew-symmetric circulant central difference of the given even order."""
    if order not in CENTRAL_STENCILS:
        raise ValueError(f"unsupported order {order}; choose 2, 4 or 6")
    stencil = np.array([float(c) for c in CENTRAL_STENCILS[order]]) / dx
    width = len(stencil)
    if n_nodes <= width:
        raise ValueError(f"need more than {width} nodes for order {order}, got {n_nodes}")
    half = width // 2
    offsets = np.arange(-half, half + 1)
    pairs = [(int(o), c) for o, c in zip(offsets, stencil) if c != 0.0]

    def apply(u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for offset, coef in pairs:
            out += coef * np.roll(u, -offset, axis=-1)
        return out

    dense = None
    if n_nodes <= DENSE_LIMIT:
        dense = _dense_from_apply(apply, n_nodes)
    return PeriodicSbpOperator(
        nodes=dx * np.arange(n_nodes),
        weights=np.full(n_nodes, float(dx)),
        accuracy_order=order,
        family=f"periodic_fd{order}",
        period=n_nodes * dx,
        dense=dense,
        matrix_free=apply,
        stencil=stencil,
    )


def fourier_operator(n_nodes, domain_length) -> PeriodicSbpOperator:
    """Fourier collocation derivative with the Nyquist derivative set to zero."""
    if n_nodes % 2 or n_nodes < 2:
        raise ValueError(f"Fourier operator needs an even node count, got {n_nodes}")
    wavenumbers = 2 * np.pi / domain_length * np.fft.rfftfreq(n_nodes, d=1.0 / n_nodes)
    wavenumbers[-1] = 0.0
    ik = 1j * wavenumbers

    def apply(u):
        return np.fft.irfft(ik * np.fft.rfft(u, axis=-1), n=n_nodes, axis=-1)

    h = 2 * np.pi / n_nodes
    j = np.arange(n_nodes)
    diff = j[:, None] - j[None, :]
    with np.errstate(divide="ignore"):
        dense = 0.5 * (-1.0) ** diff / np.tan(0.5 * h * diff)
    np.fill_diagonal(dense, 0.0)
    dense *= 2 * np.pi / domain_length
    dx = domain_length / n_nodes
    return PeriodicSbpOperator(
        nodes=dx * j,
        weights=np.full(n_nodes, dx),
        accuracy_order=n_nodes // 2 - 1,
        family="fourier",
        period=float(domain_length),
        dense=dense if n_nodes <= DENSE_LIMIT else None,
        matrix_free=apply,
    )


# ---------------------------------------------------------------------------
# finite difference SBP operators with diagonal norms

def _fd_sbp_tables():
    # Left boundary rows of D (unit spacing) and the norm diagonal. The right
    # boundary follows by D[n-1-i, n-1-j] = -D[i, j].
    tables = {}
    tables[2] = dict(
        norm=[Fr(1, 2)],
        rows=[[Fr(-1), Fr(1)]],
    )
    tables[4] = dict(
        norm=[Fr(17, 48), Fr(59, 48), Fr(43, 48), Fr(49, 48)],
        rows=[
            [Fr(-24, 17), Fr(59, 34), Fr(-4, 17), Fr(-3, 34)],
            [Fr(-1, 2), 0, Fr(1, 2)],
            [Fr(4, 43), Fr(-59, 86), 0, Fr(59, 86), Fr(-4, 43)],
            [Fr(3, 98), 0, Fr(-59, 98), 0, Fr(32, 49), Fr(-4, 49)],
        ],
    )
    tables[6] = dict(
        norm=[Fr(13649, 43200), Fr(12013, 8640), Fr(2711, 4320),
              Fr(5359, 4320), Fr(7877, 8640), Fr(43801, 43200)],
        rows=[
            [Fr(-21600, 13649), Fr(104009, 54596), Fr(30443, 81894),
             Fr(-33311, 27298), Fr(16863, 27298), Fr(-15025, 163788)],
            [Fr(-104009, 240260), 0, Fr(-311, 72078), Fr(20229, 24026),
             Fr(-24337, 48052), Fr(36661, 360390)],
            [Fr(-30443, 162660), Fr(311, 32532), 0, Fr(-11155, 16266),
             Fr(41287, 32532), Fr(-21999, 54220)],
            [Fr(33311, 107180), Fr(-20229, 21436), Fr(485, 1398), 0,
             Fr(4147, 21436), Fr(25427, 321540), Fr(72, 5359)],
            [Fr(-16863, 78770), Fr(24337, 31508), Fr(-41287, 47262),
             Fr(-4147, 15754), 0, Fr(342523, 472620), Fr(-1296, 7877), Fr(144, 7877)],
            [Fr(15025, 525612), Fr(-36661, 262806), Fr(21999, 87602),
             Fr(-25427, 262806), Fr(-342523, 525612), 0, Fr(32400, 43801),
             Fr(-6480, 43801), Fr(720, 43801)],
        ],
    )
    return tables


FD_SBP_TABLES = _fd_sbp_tables()
FD_SBP_MIN_NODES = {2: 3, 4: 8, 6: 12}


def fd_sbp(interior_order, n_nodes, element_width=2.0) -> SbpOperator:
    """Diagonal-norm finite difference SBP operator.

    Interior accuracy is ``interior_order``, boundary closures have half that
    order. Nodes span ``[-element_width/2, element_width/2]`` including both
    ends.
    """
    if interior_order not in FD_SBP_TABLES:
        raise ValueError(f"unsupported order {interior_order}; choose 2, 4 or 6")
    if n_nodes < FD_SBP_MIN_NODES[interior_order]:
        raise ValueError(
            f"order {interior_order} needs at least {FD_SBP_MIN_NODES[interior_order]} nodes, got {n_nodes}"
        )
    if element_width <= 0:
        raise ValueError("element_width must be positive")
    table = FD_SBP_TABLES[interior_order]
    n = n_nodes
    dx = element_width / (n - 1)
    n_closure = len(table["rows"])
    stencil = [float(c) for c in CENTRAL_STENCILS[interior_order]]
    half = len(stencil) // 2

    rows, cols, vals = [], [], []

    def put(i, j, v):
        if v != 0:
            rows.append(i)
            cols.append(j)
            vals.append(float(v))

    for i, row in enumerate(table["rows"]):
        for j, v in enumerate(row):
            put(i, j, v)
            put(n - 1 - i, n - 1 - j, -v)
    for i in range(n_closure, n - n_closure):
        for k, v in enumerate(stencil):
            put(i, i + k - half, v)
    D = sp.csr_matrix((np.array(vals) / dx, (rows, cols)), shape=(n, n))

    weights = np.ones(n)
    for i, h in enumerate(table["norm"]):
        weights[i] = float(h)
        weights[n - 1 - i] = float(h)
    weights *= dx

    nodes = -0.5 * element_width + dx * np.arange(n)
    nodes[-1] = 0.5 * element_width
    return SbpOperator(
        nodes=nodes,
        weights=weights,
        accuracy_order=interior_order // 2,
        interior_order=interior_order,
        family=f"fd_sbp{interior_order}",
        interval=(-0.5 * element_width, 0.5 * element_width),
        dense=D.toarray() if n <= DENSE_LIMIT else None,
        sparse=D,
    )


# ---------------------------------------------------------------------------
# Lobatto-Legendre collocation

def lobatto_nodes_weights(degree):
    """Gauss-Lobatto-Legendre nodes and weights on ``[-1, 1]``."""
    p = int(degree)
    if p < 1:
        raise ValueError(f"degree must be at least 1, got {degree}")
    coef = np.zeros(p + 1)
    coef[-1] = 1.0
    interior = np.sort(npleg.legroots(npleg.legder(coef))) if p > 1 else np.array([])
    # polish interior roots of P_p' with Newton steps
    d1, d2 = npleg.legder(coef), npleg.legder(coef, 2)
    for _ in range(3):
        if interior.size:
            interior = interior - npleg.legval(interior, d1) / npleg.legval(interior, d2)
    nodes = np.concatenate([[-1.0], interior, [1.0]])
    weights = 2.0 / (p * (p + 1) * npleg.legval(nodes, coef) ** 2)
    return nodes, weights


def lagrange_derivative_matrix(nodes):
    """Differentiation matrix of the polynomial interpolant through ``nodes``."""
    x = np.asarray(nodes, dtype=float)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    bary = 1.0 / np.prod(diff, axis=1)
    D = (bary[None, :] / bary[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def lobatto_collocation(degree) -> SbpOperator:
    """Collocation SBP operator on the ``degree + 1`` Lobatto nodes."""
    nodes, weights = lobatto_nodes_weights(degree)
    return SbpOperator(
        nodes=nodes,
        weights=weights,
        accuracy_order=int(degree),
        family=f"lobatto{int(degree)}",
        dense=lagrange_derivative_matrix(nodes),
    )


def finite_volume_operator() -> SbpOperator:
    """One node per cell: ``D = 0`` and the surface terms are the whole scheme."""
    return SbpOperator(
        nodes=np.array([0.0]),
        weights=np.array([2.0]),
        accuracy_order=0,
        family="finite_volume",
        dense=np.zeros((1, 1)),
    )
