"""Kinetic-function measurements: sweeps over Riemann data, fits and
singular-growth diagnostics."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..semidisc import NonFiniteStateError
from ..time_integration import BlowUpError
from .denoise import tv_denoise
from .detection import (
    default_denoise_strength,
    default_detection,
    detect_discontinuities,
    find_middle_plateau,
    kinetic_bounds_scalar_cubic,
    plateaus_above,
    within_bounds,
)


@dataclass(frozen=True)
class KineticSample:
    u_left: float
    u_right: float
    u_middle: Optional[float]
    detected: bool
    n_discontinuities: int
    within_bounds: Optional[bool] = None
    bound_lo: Optional[float] = None
    bound_hi: Optional[float] = None
    plateau_width: Optional[int] = None
    plateau_std: Optional[float] = None
    diagnostic: str = ""

    def __post_init__(self):
        if self.detected and self.u_middle is None:
            raise ValueError("a detected sample needs a middle state")
        if not self.detected and self.within_bounds is not None:
            raise ValueError("bounds are only checked for detected samples")


@dataclass(frozen=True)
class KineticFit:
    slope: float
    offset: float
    r_squared: float
    n_samples: int


@dataclass(frozen=True)
class ConstantFit:
    mean: float
    std: float
    n_samples: int


def _detected(samples):
    return [s for s in samples if s.detected]


def fit_affine(samples: Sequence[KineticSample]) -> KineticFit:
    """Least-squares line ``u_M = slope u_L + offset`` through the detected samples."""
    hits = _detected(samples)
    if len(hits) < 2:
        raise ValueError(f"need at least 2 detected samples, got {len(hits)}")
    x = np.array([s.u_left for s in hits])
    y = np.array([s.u_middle for s in hits])
    if np.ptp(x) == 0:
        raise ValueError("detected samples share one u_L; the line is undetermined")
    slope, offset = np.polyfit(x, y, 1)
    resid = y - (slope * x + offset)
    total = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 if total == 0 else float(np.clip(1.0 - np.sum(resid ** 2) / total, 0.0, 1.0))
    return KineticFit(float(slope), float(offset), r2, len(hits))


def fit_constant(samples: Sequence[KineticSample]) -> ConstantFit:
    hits = _detected(samples)
    if not hits:
        raise ValueError("no detected samples")
    y = np.array([s.u_middle for s in hits])
    return ConstantFit(float(y.mean()), float(y.std()), len(hits))


@dataclass(frozen=True)
class MeasurementSettings:
    denoise: Optional[float] = None  # None: default strength; 0 switches denoising off
    window: Optional[int] = None
    jump_threshold: Optional[float] = None
    plateau_tolerance: Optional[float] = None
    min_plateau: int = 5
    require_right_state: bool = True
    mode: str = "outside"  # "below_left" for the quartic law
    bounds: Optional[Callable] = kinetic_bounds_scalar_cubic


def quartic_settings(**overrides) -> MeasurementSettings:
    """Settings for quartic sweeps: the state below ``u_L`` and no cubic bounds."""
    base = dict(mode="below_left", require_right_state=False, bounds=None)
    base.update(overrides)
    return MeasurementSettings(**base)


def measure_sample(x, u, u_left, u_right, settings: MeasurementSettings = MeasurementSettings()):
    """Denoise, detect and extract; returns a :class:`KineticSample`."""
    x = np.asarray(x, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    order = np.argsort(x, kind="stable")
    x, u = x[order], u[order]
    lam = settings.denoise
    if lam is None:
        lam = default_denoise_strength(x, max(abs(u_left), abs(u_right)))
    clean = tv_denoise(u, lam) if lam > 0 else u
    defaults = default_detection(u.size, u_left, u_right)
    window = settings.window or defaults.window
    threshold = settings.jump_threshold or defaults.jump_threshold
    discs = detect_discontinuities(x, clean, window, threshold, settings.plateau_tolerance,
                                   settings.min_plateau)
    found = find_middle_plateau(clean, discs, u_left, u_right,
                                require_right_state=settings.require_right_state,
                                mode=settings.mode)
    note = ""
    if settings.mode == "below_left":
        above = plateaus_above(clean, discs, max(u_left, u_right), 0.1 * abs(u_left - u_right))
        if above:
            note = "above u_R: " + ", ".join(f"{v:.6g}" for v in above)
    if found is None:
        return KineticSample(u_left, u_right, None, False, len(discs), diagnostic=note)
    middle, (m0, m1) = found
    width, std = m1 - m0, float(np.std(clean[m0:m1]))
    inside = lo = hi = None
    if settings.bounds is not None:
        try:
            lo, hi = settings.bounds(u_left)
            inside = within_bounds(middle, (lo, hi))
        except ValueError:
            pass
    return KineticSample(u_left, u_right, middle, True, len(discs), inside, lo, hi, width, std, note)


def run_kinetic_sweep(make_run: Callable, u_lefts: Sequence[float], u_right: float,
                      settings: MeasurementSettings = MeasurementSettings(), threads=1, solve=None):
    """Solve one Riemann problem per ``u_L`` and measure the middle state.

    ``make_run(u_L)`` returns a :class:`~sbp_kinetic.problems.Run`. Blow-ups
    are recorded as undetected samples and the sweep continues.
    """
    if len(u_lefts) == 0:
        raise ValueError("sweep is empty")
    if solve is None:
        from ..problems import solve

    def one(u_left):
        run = make_run(u_left)
        try:
            state, _ = solve(run)
        except (BlowUpError, NonFiniteStateError) as err:
            return KineticSample(u_left, u_right, None, False, 0, diagnostic=f"aborted: {err}")
        return measure_sample(run.coordinates(), state.values, u_left, u_right, settings)

    if threads == 1:
        return [one(v) for v in u_lefts]
    with ThreadPoolExecutor(max_workers=threads or None) as pool:
        return list(pool.map(one, u_lefts))


# ---------------------------------------------------------------------------
# singular growth

@dataclass(frozen=True)
class GrowthRow:
    n: int
    max_abs_u1: float
    max_abs_u2: float
    min_u1: float


@dataclass(frozen=True)
class GrowthTable:
    rows: tuple
    increasing_u1: bool
    increasing_u2: bool


def singular_growth_diagnostic(runs) -> GrowthTable:
    """Extreme values per resolution from ``[(N, final NodalState), ...]``."""
    if len(runs) < 2:
        raise ValueError("need at least two resolutions")
    rows = []
    for n, state in sorted(runs, key=lambda r: r[0]):
        v = np.asarray(state.values, dtype=float)
        # systems carry components on a third axis
        v = v.reshape(-1, v.shape[-1]) if v.ndim == 3 else v.reshape(-1, 1)
        u1 = v[:, 0]
        u2 = v[:, 1] if v.shape[1] > 1 else np.zeros_like(u1)
        rows.append(GrowthRow(int(n), float(np.max(np.abs(u1))), float(np.max(np.abs(u2))), float(np.min(u1))))

    def strictly_up(vals):
        return bool(all(b > a for a, b in zip(vals[:-1], vals[1:])))

    return GrowthTable(tuple(rows), strictly_up([r.max_abs_u1 for r in rows]),
                       strictly_up([r.max_abs_u2 for r in rows]))
