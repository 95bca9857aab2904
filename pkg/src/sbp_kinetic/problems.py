"""Problem templates and scheme builders shared by sweeps and the CLI.

A :class:`SchemeConfig` names a discretization family and its parameters. A
:class:`Problem` fixes the law, domain, initial data, boundary data and final
time. :func:`build_run` turns both into everything the time loop needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dissipation import (
    fd_artificial_dissipation,
    modal_exponential_filter,
    spectral_viscosity,
)
from .entropy_pairs import ConservationLaw, entropy_pair
from .mesh import build_uniform_mesh
from .num_fluxes import (
    ec_flux_cubic,
    ec_flux_keyfitz_kranzer,
    ec_flux_l2_polynomial,
    ec_flux_quartic,
    godunov_flux_scalar,
    llf_dissipative_flux,
)
from .sbp_ops import (
    fd_sbp,
    finite_volume_operator,
    fourier_operator,
    lobatto_collocation,
    periodic_central_fd,
)
from .semidisc import PERIODIC, BoundaryData, NodalState, Semidiscretization
from .tecno import TecnoScheme
from . import time_integration as ti

SCHEME_KINDS = ("periodic_fd", "fourier", "fd_sbp", "dg_lobatto", "tecno", "fv_kk")


@dataclass(frozen=True)
class SchemeConfig:
    kind: str
    degree: int = 5  # DG polynomial degree
    order: int = 2  # FD accuracy order or ENO order
    filter_order: int = 0  # 0 switches the modal filter off
    volume: str = "flux_differencing"  # or "split"
    surface: str = "godunov"  # or "llf"
    fd_dissipation: tuple = ()  # ((order, eps), ...), eps scaled by 1/N
    sv_variant: Optional[str] = None
    sv_strength: float = 0.0  # eps * N
    entropy: str = "L2"
    alpha: float = 0.01

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")


@dataclass(frozen=True)
class Problem:
    law: ConservationLaw
    x_left: float
    x_right: float
    periodic: bool
    initial: Callable = field(repr=False)
    final_time: float
    boundary_left: Optional[object] = None
    boundary_right: Optional[object] = None
    max_speed: float = 1.0  # frozen speed of the initial data
    name: str = "custom"
    u_left: Optional[float] = None
    u_right: Optional[float] = None


def _frozen_speed(law, states):
    """``max |f'(u)|`` over the range spanned by ``states``."""
    states = np.asarray(states, dtype=float)
    if not law.is_scalar:
        return float(np.max(law.max_wave_speed(states)))
    grid = np.linspace(states.min(), states.max(), 2001)
    return float(np.max(law.max_wave_speed(np.concatenate([grid, states]))))


def sine_problem(law, final_time=1.0, x_left=-1.0, x_right=1.0) -> Problem:
    return Problem(law, x_left, x_right, True, lambda x: -np.sin(np.pi * x), final_time,
                   max_speed=_frozen_speed(law, [-1.0, 1.0]), name="sine")


def bounded_riemann_problem(law, u_left, u_right=-2.0, jump=-0.5, x_left=-1.0, x_right=3.0) -> Problem:
    """Inflow on the left, outflow on the right, ``T = 5 / max|f'(u_0)|``."""
    speed = _frozen_speed(law, [u_left, u_right])
    return Problem(law, x_left, x_right, False, lambda x: np.where(x < jump, u_left, u_right),
                   5.0 / speed, boundary_left=float(u_left), boundary_right=None,
                   max_speed=speed, name="riemann_bounded", u_left=u_left, u_right=u_right)


def fourier_riemann_problem(law, u_left, u_right=-2.0, band=(-4.5, 0.0), x_left=-6.0,
                            x_right=6.0) -> Problem:
    """Periodic ``[-6, 6]`` with ``u_L`` on ``[-4.5, 0]``."""
    speed = _frozen_speed(law, [u_left, u_right])
    lo, hi = band
    return Problem(law, x_left, x_right, True,
                   lambda x: np.where((x >= lo) & (x <= hi), u_left, u_right),
                   5.0 / speed, max_speed=speed, name="riemann_periodic",
                   u_left=u_left, u_right=u_right)


def quartic_riemann_problem(law, u_left, u_right=2.0, band=(0.0, 4.5), x_left=-7.0,
                            x_right=7.0) -> Problem:
    """Periodic ``[-7, 7]`` with ``u_R`` on ``[0, 4.5]``, ``T = 3 / max|f'|``."""
    speed = _frozen_speed(law, [u_left, u_right])
    lo, hi = band
    return Problem(law, x_left, x_right, True,
                   lambda x: np.where((x >= lo) & (x <= hi), u_right, u_left),
                   3.0 / speed, max_speed=speed, name="riemann_quartic",
                   u_left=u_left, u_right=u_right)


KK_LEFT = (1.5, 0.0)
KK_RIGHT = (-2.065426, 1.410639)


def keyfitz_kranzer_problem(law, u_left=KK_LEFT, u_right=KK_RIGHT, final_time=2.0, jump=0.0,
                            x_left=-0.75, x_right=0.25) -> Problem:
    left, right = np.array(u_left, dtype=float), np.array(u_right, dtype=float)

    def initial(x):
        x = np.asarray(x, dtype=float)
        return np.where((x < jump)[..., None], left, right)

    return Problem(law, x_left, x_right, False, initial, final_time,
                   boundary_left=left, boundary_right=right,
                   max_speed=_frozen_speed(law, np.stack([left, right])), name="keyfitz_kranzer")


# ---------------------------------------------------------------------------
# schemes

def ec_volume_flux(law):
    if law.name == "cubic":
        return ec_flux_cubic(law)
    if law.name == "quartic":
        return ec_flux_quartic(law)
    if law.name == "keyfitz_kranzer":
        return ec_flux_keyfitz_kranzer(law)
    return ec_flux_l2_polynomial(law)


def _split_strategy(law):
    return {"cubic": "split_cubic", "quartic": "split_quartic"}.get(law.name, "split_polynomial")


def _surface_flux(law, scheme):
    if scheme.surface == "godunov":
        return godunov_flux_scalar(law)
    if scheme.surface == "llf":
        return llf_dissipative_flux(ec_volume_flux(law), law)
    raise ValueError(f"unknown surface flux {scheme.surface!r}")


@dataclass
class Run:
    """A discretized problem ready for :func:`time_integration.integrate`."""

    rhs: object
    nodes: np.ndarray  # physical coordinates in state layout
    mass: np.ndarray
    initial: NodalState
    config: ti.TimeLoopConfig
    problem: Problem
    scheme: SchemeConfig
    n: int

    def coordinates(self):
        return np.asarray(self.nodes).ravel()


def _dt_policy(problem, scheme, n, dt=None):
    if dt is not None:
        return ti.fixed(dt)
    if scheme.kind == "fv_kk":
        return ti.kk_adaptive((problem.x_right - problem.x_left) / n, problem.law)
    if problem.name == "sine":
        if scheme.kind == "dg_lobatto":
            return ti.dg(n, scheme.degree)
        if scheme.kind == "tecno":
            return ti.fixed(1.0 / n)
        return ti.cubic_periodic(n)
    degree = scheme.degree if scheme.kind == "dg_lobatto" else None
    return ti.riemann(n, degree, problem.max_speed)


def build_run(problem: Problem, scheme: SchemeConfig, n: int, trace_entropy=None,
              trace_stride=10, blowup_limit=1e12, use_compiled=True, step_callback=None,
              dt=None) -> Run:
    """Discretize ``problem`` with ``n`` elements (DG) or nodes/cells (others).

    ``dt`` replaces the default step-size rule by a fixed step.
    """
    law = problem.law
    length = problem.x_right - problem.x_left
    kind = scheme.kind
    pair = None if trace_entropy is None else entropy_pair(trace_entropy, law, scheme.alpha)
    dt_policy = _dt_policy(problem, scheme, n, dt)
    filt = None

    if kind == "tecno":
        if not problem.periodic:
            raise ValueError("TeCNO schemes need a periodic problem")
        dx = length / n
        x = problem.x_left + dx * (np.arange(n) + 0.5)
        rhs = TecnoScheme(law, entropy_pair(scheme.entropy, law, scheme.alpha), scheme.order, dx)
        mass = np.full(n, dx)
        u0 = np.asarray(problem.initial(x), dtype=float)
        config = ti.TimeLoopConfig(problem.final_time, dt_policy, trace_entropy=pair,
                                   trace_stride=trace_stride, blowup_limit=blowup_limit,
                                   step_callback=step_callback)
        return Run(rhs, x, mass, NodalState(0.0, u0), config, problem, scheme, n)

    boundary = PERIODIC if problem.periodic else BoundaryData(problem.boundary_left, problem.boundary_right)
    volume_flux = ec_volume_flux(law)
    strategy = "flux_differencing" if scheme.volume == "flux_differencing" else _split_strategy(law)
    dissipation = ()
    if kind in ("periodic_fd", "fourier"):
        if not problem.periodic:
            raise ValueError(f"{kind} needs a periodic problem")
        mesh = build_uniform_mesh(problem.x_left, problem.x_right, 1, periodic=True)
        dx = length / n
        op = periodic_central_fd(scheme.order, n, dx) if kind == "periodic_fd" else fourier_operator(n, length)
        surface = None
        if kind == "periodic_fd":
            dissipation = tuple(
                fd_artificial_dissipation(order, strength / n, n, dx, True)
                for order, strength in scheme.fd_dissipation if strength > 0
            )
        elif scheme.sv_variant is not None and scheme.sv_strength > 0:
            dissipation = (spectral_viscosity(n, scheme.sv_strength / n, scheme.sv_variant, length),)
    elif kind == "fd_sbp":
        if problem.periodic:
            raise ValueError("fd_sbp is the bounded FD family; use periodic_fd")
        mesh = build_uniform_mesh(problem.x_left, problem.x_right, 1)
        op = fd_sbp(scheme.order, n, length)
        dx = length / (n - 1)
        surface = _surface_flux(law, scheme)
        dissipation = tuple(
            fd_artificial_dissipation(order, strength / n, n, dx, False, weights=op.weights)
            for order, strength in scheme.fd_dissipation if strength > 0
        )
    elif kind == "dg_lobatto":
        mesh = build_uniform_mesh(problem.x_left, problem.x_right, n, periodic=problem.periodic)
        op = lobatto_collocation(scheme.degree)
        surface = _surface_flux(law, scheme)
    elif kind == "fv_kk":
        mesh = build_uniform_mesh(problem.x_left, problem.x_right, n, periodic=problem.periodic)
        op = finite_volume_operator()
        surface = llf_dissipative_flux(volume_flux, law)
        strategy = "flux_differencing"
    else:
        raise ValueError(f"unknown scheme kind {kind!r}")

    sd = Semidiscretization(mesh, op, law, strategy, volume_flux, surface, dissipation,
                            boundary, use_compiled=use_compiled)
    nodes = sd.nodes
    u0 = np.asarray(problem.initial(nodes), dtype=float)
    if kind == "dg_lobatto" and scheme.filter_order > 0:
        filt = modal_exponential_filter(scheme.degree, scheme.filter_order, dt_policy.dt)
    method = "euler" if kind == "fv_kk" else "ssprk104"
    config = ti.TimeLoopConfig(problem.final_time, dt_policy, method=method, post_step_filter=filt,
                               trace_entropy=pair, trace_stride=trace_stride,
                               blowup_limit=blowup_limit, step_callback=step_callback,
                               use_compiled=use_compiled)
    return Run(sd, nodes, sd.mass, NodalState(0.0, u0), config, problem, scheme, n)


def solve(run: Run):
    return ti.integrate(run.rhs, run.initial, run.config, mass=run.mass)
