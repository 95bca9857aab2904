"""Semi-discrete right-hand sides built from SBP operators.

Nodal arrays have shape ``(n_elements, K)`` for scalar laws and
``(n_elements, K, m)`` for systems. Single-domain periodic runs use one element
carrying a :class:`~sbp_kinetic.sbp_ops.PeriodicSbpOperator`.

Each element computes ``-VOL + SAT + DISS``. The surface terms are
``SAT = -M^-1 R^T B (f_num - R f)`` and every interface flux is evaluated as
``f_num(u_minus, u_plus)`` with ``u_minus`` the value left of the interface.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .entropy_pairs import ConservationLaw, EntropyPair
from ._compiled_loop import compiled_plan
from .num_fluxes import TwoPointFlux
from .mesh import Mesh
from .sbp_ops import PeriodicSbpOperator, SbpOperator

VOLUME_STRATEGIES = (
    "flux_differencing",
    "split_cubic",
    "unsplit_cubic",
    "split_quartic",
    "split_polynomial",
    "derivative_of_flux",
)


class NonFiniteStateError(FloatingPointError):
    """A state or tendency contains NaN or Inf."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


@dataclass
class NodalState:
    time: float
    values: np.ndarray


@dataclass(frozen=True)
class BoundaryData:
    """Exterior states for the two domain ends.

    ``None`` means outflow: the interior trace is used on both sides of the
    boundary flux. Data may be constant states or callables of time.
    """

    left: Union[None, float, np.ndarray, Callable] = None
    right: Union[None, float, np.ndarray, Callable] = None

    @staticmethod
    def _value(datum, t):
        if datum is None:
            return None
        if callable(datum):
            return np.asarray(datum(t), dtype=float)
        return np.asarray(datum, dtype=float)

    def left_state(self, t):
        return self._value(self.left, t)

    def right_state(self, t):
        return self._value(self.right, t)


PERIODIC = "periodic"


# ---------------------------------------------------------------------------
# volume terms on one operator

def _pairwise_structure(op):
    """Row, column and value arrays of the nonzero derivative entries."""
    if getattr(op, "sparse", None) is not None:
        coo = op.sparse.tocoo()
        return coo.row, coo.col, coo.data
    if getattr(op, "stencil", None) is not None and op.dense is None:
        n = op.n_nodes
        half = len(op.stencil) // 2
        rows, cols, vals = [], [], []
        for k, c in enumerate(op.stencil):
            if c != 0.0:
                rows.append(np.arange(n))
                cols.append((np.arange(n) + k - half) % n)
                vals.append(np.full(n, c))
        return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    return None


def volume_flux_differencing(op, volume_flux: TwoPointFlux, values):
    """``VOL_i = sum_k D_ik 2 f_vol(u_i, u_k)`` along the node axis.

    ``values`` has the nodes on axis -1 for scalar laws and on axis -2 for
    systems (components last).
    """
    if not volume_flux.declared_symmetric:
        raise ValueError("flux differencing needs a symmetric volume flux")
    u = np.asarray(values, dtype=float)
    system = not volume_flux.law.is_scalar
    node_axis = u.ndim - 2 if system else u.ndim - 1
    structure = _pairwise_structure(op)
    if structure is not None:
        rows, cols, vals = structure
        ui = np.take(u, rows, axis=node_axis)
        uk = np.take(u, cols, axis=node_axis)
        contrib = volume_flux.evaluate(ui, uk)
        weight_shape = [1] * contrib.ndim
        weight_shape[node_axis] = len(vals)
        contrib = 2.0 * contrib * vals.reshape(weight_shape)
        out = np.zeros_like(u)
        moved = np.moveaxis(out, node_axis, 0)
        np.add.at(moved, rows, np.moveaxis(contrib, node_axis, 0))
        return out
    D = op.D
    n = D.shape[0]
    if system:
        ui = u[..., :, None, :]
        uk = u[..., None, :, :]
        return 2.0 * np.einsum("ik,...ikc->...ic", D, volume_flux.evaluate(ui, uk))
    out = np.empty_like(u)
    block = max(1, 2 ** 20 // max(1, n * max(1, u.size // n)))
    for start in range(0, n, block):
        stop = min(n, start + block)
        ui = u[..., start:stop, None]
        uk = u[..., None, :]
        pairs = volume_flux.evaluate(ui, uk)
        out[..., start:stop] = 2.0 * np.einsum("ik,...ik->...i", D[start:stop], pairs)
    return out


def volume_split_cubic(op, values):
    """``(D u^3 + u D u^2 + u^2 D u) / 2``."""
    u = np.asarray(values, dtype=float)
    u2 = u * u
    return 0.5 * (op.apply(u2 * u) + u * op.apply(u2) + u2 * op.apply(u))


def volume_split_quartic(op, values):
    u = np.asarray(values, dtype=float)
    u2 = u * u
    u3 = u2 * u
    Du, Du2 = op.apply(u), op.apply(u2)
    return (0.4 * (op.apply(u3 * u) + u * op.apply(u3) + u2 * Du2 + u3 * Du)
            - 20.0 / 3.0 * (Du2 + u * Du)
            + 3.0 * Du)


def volume_split_polynomial(op, values, coefficients):
    """Split form equal to flux differencing with the L2 EC polynomial flux.

    For ``f = sum c_n u^n`` the volume term is
    ``sum_n 2 c_n / (n+1) sum_{j<n} u^j D u^(n-j)``.
    """
    u = np.asarray(values, dtype=float)
    degree = len(coefficients) - 1
    powers = [np.ones_like(u)]
    for _ in range(degree):
        powers.append(powers[-1] * u)
    derivs = {}
    out = np.zeros_like(u)
    for n, c in enumerate(coefficients):
        if c == 0.0 or n == 0:
            continue
        acc = np.zeros_like(u)
        for j in range(n):
            if n - j not in derivs:
                derivs[n - j] = op.apply(powers[n - j])
            acc += powers[j] * derivs[n - j]
        out += 2.0 * c / (n + 1) * acc
    return out


def volume_unsplit(op, values, law: ConservationLaw):
    """``D f(u)``."""
    return op.apply(law.f(np.asarray(values, dtype=float)))


def sat_terms(op, surface_flux: TwoPointFlux, values, exterior_left, exterior_right, jacobian=1.0):
    """Surface terms of one element with given exterior states.

    ``values`` holds the element's nodes on axis 0 (components after that).
    """
    u = np.asarray(values, dtype=float)
    if exterior_left is None or exterior_right is None:
        raise ValueError("both exterior states are needed for the surface terms")
    f = surface_flux.law.f
    out = np.zeros_like(u)
    f_left = surface_flux.evaluate(np.asarray(exterior_left, dtype=float), u[0])
    f_right = surface_flux.evaluate(u[-1], np.asarray(exterior_right, dtype=float))
    out[0] += (f_left - f(u[0])) / (op.weights[0] * jacobian)
    out[-1] -= (f_right - f(u[-1])) / (op.weights[-1] * jacobian)
    return out


# ---------------------------------------------------------------------------
# the semi-discretization

@dataclass(frozen=True, eq=False)
class Semidiscretization:
    mesh: Mesh
    operator: Union[SbpOperator, PeriodicSbpOperator]
    law: ConservationLaw
    volume_strategy: str = "flux_differencing"
    volume_flux: Optional[TwoPointFlux] = None
    surface_flux: Optional[TwoPointFlux] = None
    dissipation: Sequence = ()
    boundary: Union[str, BoundaryData] = PERIODIC
    use_compiled: bool = True
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "dissipation", tuple(self.dissipation))
        if self.volume_strategy not in VOLUME_STRATEGIES:
            raise ValueError(f"unknown volume strategy {self.volume_strategy!r}")
        if self.volume_strategy == "flux_differencing":
            if self.volume_flux is None:
                raise ValueError("flux_differencing needs a volume flux")
            if not self.volume_flux.declared_symmetric:
                raise ValueError("volume flux must be symmetric")
        if self.volume_strategy in ("split_cubic", "unsplit_cubic") and self.law.name != "cubic":
            raise ValueError(f"{self.volume_strategy} is only defined for the cubic law")
        if self.volume_strategy == "split_quartic" and self.law.name != "quartic":
            raise ValueError("split_quartic is only defined for the quartic law")
        if self.volume_strategy.startswith("split") and not self.law.is_scalar:
            raise ValueError("split forms need a scalar law")
        if self.volume_strategy == "split_polynomial" and self.law.coefficients is None:
            raise ValueError("split_polynomial needs a polynomial flux")
        if self.operator.periodic:
            if not self.mesh.periodic or self.mesh.n_elements != 1:
                raise ValueError("a periodic operator needs a one-element periodic mesh")
            if abs(self.operator.period - self.mesh.length) > 1e-12 * self.mesh.length:
                raise ValueError(
                    f"operator period {self.operator.period} differs from domain length {self.mesh.length}"
                )
        else:
            if self.surface_flux is None:
                raise ValueError("bounded operators need a surface flux")
            if self.mesh.periodic and self.boundary != PERIODIC:
                raise ValueError("periodic meshes take boundary='periodic'")
            if not self.mesh.periodic and not isinstance(self.boundary, BoundaryData):
                raise ValueError("non-periodic meshes need BoundaryData")

    # geometry -------------------------------------------------------------
    @property
    def n_elements(self):
        return self.mesh.n_elements

    @property
    def n_nodes(self):
        return self.operator.n_nodes

    @property
    def state_shape(self):
        shape = (self.n_elements, self.n_nodes)
        if not self.law.is_scalar:
            shape += (self.law.n_components,)
        return shape

    @property
    def jacobians(self):
        """Physical length per unit of operator coordinate, per element."""
        if self.operator.periodic:
            return np.ones(1)
        return self.mesh.widths / self.operator.length

    @property
    def nodes(self):
        op = self.operator
        if op.periodic:
            return (self.mesh.x_left + op.nodes)[None, :]
        a = op.interval[0]
        return self.mesh.elements[:, :1] + (op.nodes[None, :] - a) * self.jacobians[:, None]

    @property
    def mass(self):
        """Physical quadrature weights, shape ``(n_elements, K)``."""
        return self.operator.weights[None, :] * self.jacobians[:, None]

    # evaluation -----------------------------------------------------------
    def rhs(self, values, t=0.0):
        return _rhs(self, np.asarray(values, dtype=float), float(t))

    def boundary_states(self, values, t=0.0):
        """Exterior states at the left and right domain ends."""
        u = np.asarray(values, dtype=float)
        if self.operator.periodic or self.boundary == PERIODIC:
            return u[-1, -1], u[0, 0]
        left = self.boundary.left_state(t)
        right = self.boundary.right_state(t)
        return (u[0, 0] if left is None else left), (u[-1, -1] if right is None else right)

    def boundary_fluxes(self, values, t=0.0):
        """Numerical fluxes through the left and right domain ends."""
        if self.operator.periodic:
            return 0.0, 0.0
        u = np.asarray(values, dtype=float)
        gl, gr = self.boundary_states(u, t)
        fl = self.surface_flux.evaluate(gl, u[0, 0])
        fr = self.surface_flux.evaluate(u[-1, -1], gr)
        return fl, fr


def _volume(sd, u):
    op = sd.operator
    strategy = sd.volume_strategy
    if strategy == "flux_differencing":
        if op.n_nodes == 1:
            return np.zeros_like(u)
        return volume_flux_differencing(op, sd.volume_flux, u)
    if strategy == "split_cubic":
        return volume_split_cubic(op, u)
    if strategy == "split_quartic":
        return volume_split_quartic(op, u)
    if strategy == "split_polynomial":
        return volume_split_polynomial(op, u, sd.law.coefficients)
    if sd.law.is_scalar:
        return volume_unsplit(op, u, sd.law)
    return np.moveaxis(op.apply(np.moveaxis(sd.law.f(u), -2, -1)), -1, -2)


def _interface_states(sd, u, t):
    """States left and right of the ``n_elements + 1`` interfaces."""
    left_trace = u[:, 0]
    right_trace = u[:, -1]
    gl, gr = sd.boundary_states(u, t)
    minus = np.concatenate([np.asarray(gl, dtype=float)[None], right_trace], axis=0)
    plus = np.concatenate([left_trace, np.asarray(gr, dtype=float)[None]], axis=0)
    return minus, plus


def _rhs_numpy(sd, u, t):
    op = sd.operator
    if op.periodic:
        out = -_volume(sd, u[0])[None]
    else:
        jac = sd.jacobians
        jac_b = jac[:, None] if sd.law.is_scalar else jac[:, None, None]
        out = -_volume(sd, u) / jac_b
        minus, plus = _interface_states(sd, u, t)
        fnum = sd.surface_flux.evaluate(minus, plus)
        f = sd.law.f
        out[:, 0] += (fnum[:-1] - f(u[:, 0])) / (op.weights[0] * jac_b[:, 0])
        out[:, -1] -= (fnum[1:] - f(u[:, -1])) / (op.weights[-1] * jac_b[:, 0])
    for diss in sd.dissipation:
        out += diss.apply(u)
    return out


def _rhs(sd, u, t):
    if u.shape != sd.state_shape:
        raise ValueError(f"state shape {u.shape} does not match {sd.state_shape}")
    fast = compiled_plan(sd) if sd.use_compiled else None
    if fast is not None:
        out = fast.rhs(u, t)
        for diss in sd.dissipation:
            out += diss.apply(u)
    else:
        out = _rhs_numpy(sd, u, t)
    if not np.isfinite(out.sum()) and not np.all(np.isfinite(out)):
        bad = np.argwhere(~np.isfinite(out))[0]
        raise NonFiniteStateError(f"non-finite tendency at t={t:.6g}, element {bad[0]}, node {bad[1]}", t)
    return out


def assemble_rhs(sd: Semidiscretization, state: NodalState) -> NodalState:
    """Tendency of ``state`` as a :class:`NodalState` at the same time."""
    return NodalState(state.time, sd.rhs(state.values, state.time))


def check_boundary_entropy_condition(surface_flux, pair: EntropyPair, g, u_boundary, side="left"):
    """``w(g) . (f_num(g, u) - f(g))`` at the left end, mirrored at the right.

    Non-positive values mean the boundary datum cannot create entropy.
    """
    g = np.asarray(g, dtype=float)
    u = np.asarray(u_boundary, dtype=float)
    fg = surface_flux.law.f(g)
    if side == "left":
        diff = surface_flux.evaluate(g, u) - fg
        sign = 1.0
    elif side == "right":
        diff = surface_flux.evaluate(u, g) - fg
        sign = -1.0
    else:
        raise ValueError("side must be 'left' or 'right'")
    w = pair.w(g)
    value = np.sum(w * diff, axis=-1) if not pair.law.is_scalar else w * diff
    return sign * float(value) if np.ndim(value) == 0 else sign * value


def entropy_boundary_bound(sd: Semidiscretization, values, pair: EntropyPair, t=0.0) -> float:
    """``F(left state) - F(right state)``: the entropy an ES scheme may gain.

    Outflow ends contribute the interior trace. Periodic runs give zero.
    """
    if sd.operator.periodic or sd.boundary == PERIODIC:
        return 0.0
    gl, gr = sd.boundary_states(values, t)
    return float(pair.F(np.asarray(gl)) - pair.F(np.asarray(gr)))
