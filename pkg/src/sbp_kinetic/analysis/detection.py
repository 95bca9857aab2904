"""Discontinuity detection by local averaging and nonclassical middle-state
extraction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.ndimage import uniform_filter1d


class Discontinuity(NamedTuple):
    index: int  # steepest point: the jump lies between index and index + 1
    sign: int
    size: float
    left_plateau: tuple  # (start, stop) index range, stop exclusive
    right_plateau: tuple


@dataclass(frozen=True)
class DetectionParameters:
    window: int = 5
    jump_threshold: float = 0.5
    plateau_tolerance: Optional[float] = None  # default: jump_threshold / 4
    min_plateau: int = 5
    max_transition: Optional[int] = None  # default: 4 * window

    def resolved(self):
        tol = self.jump_threshold / 4.0 if self.plateau_tolerance is None else self.plateau_tolerance
        width = 4 * self.window if self.max_transition is None else self.max_transition
        return tol, width


def default_detection(n_points, u_left, u_right) -> DetectionParameters:
    """``window = max(3, n/200)``, ``jump_threshold = 0.1 |u_L - u_R|``."""
    return DetectionParameters(
        window=max(3, int(n_points) // 200),
        jump_threshold=0.1 * abs(u_left - u_right),
    )


def default_denoise_strength(x, u0_max):
    """``2 * mean spacing * max|u_0|``."""
    x = np.asarray(x, dtype=float).ravel()
    spacing = (x[-1] - x[0]) / max(1, x.size - 1)
    return 2.0 * abs(spacing) * float(u0_max)


def local_std(u, window):
    """Standard deviation over centred windows of ``window`` points."""
    u = np.asarray(u, dtype=float)
    mean = uniform_filter1d(u, window, mode="nearest")
    mean_sq = uniform_filter1d(u * u, window, mode="nearest")
    return np.sqrt(np.maximum(mean_sq - mean * mean, 0.0))


def flat_segments(u, window, tolerance, min_length):
    """Maximal index runs where the local standard deviation stays below ``tolerance``."""
    flat = local_std(u, window) <= tolerance
    segments = []
    i, n = 0, flat.size
    while i < n:
        if flat[i]:
            j = i
            while j < n and flat[j]:
                j += 1
            if j - i >= min_length:
                segments.append((i, j))
            i = j
        else:
            i += 1
    return segments


def detect_discontinuities(x, u, window=5, jump_threshold=0.5, plateau_tolerance=None,
                           min_plateau=5, max_transition=None):
    """Jumps between neighbouring flat stretches of ``u``.

    Two consecutive flat stretches form a jump when their facing edge values
    differ by more than ``jump_threshold`` and at most ``max_transition`` points
    separate them. Each jump is placed at the steepest difference between them.
    """
    if window < 2:
        raise ValueError("window must be at least 2")
    u = np.asarray(u, dtype=float).ravel()
    if x is not None and np.asarray(x).size != u.size:
        raise ValueError("x and u sizes differ")
    tol, width = DetectionParameters(window, jump_threshold, plateau_tolerance, min_plateau,
                                     max_transition).resolved()
    segments = flat_segments(u, window, tol, min_plateau)
    found = []
    for (a0, a1), (b0, b1) in zip(segments[:-1], segments[1:]):
        if b0 - a1 > width:
            continue
        left = float(np.median(u[max(a0, a1 - window):a1]))
        right = float(np.median(u[b0:min(b1, b0 + window)]))
        jump = right - left
        if abs(jump) <= jump_threshold:
            continue
        lo, hi = a1 - 1, b0
        steep = lo + int(np.argmax(np.abs(np.diff(u[lo:hi + 1]))))
        found.append(Discontinuity(steep, int(np.sign(jump)), abs(jump), (a0, a1), (b0, b1)))
    return found


def _trimmed_median(values, fraction=0.1):
    n = values.size
    cut = int(np.floor(fraction * n))
    core = values[cut:n - cut] if n - 2 * cut > 0 else values
    return float(np.median(core))


def _near(value, target, tol):
    return abs(value - target) <= tol


MIDDLE_MODES = ("outside", "below_left")


def extract_middle_state(x, u, discontinuities, u_left, u_right, tolerance=None,
                         require_right_state=True, mode="outside"):
    """Value of a TV-increasing plateau bracketed by two jumps, or ``None``.

    See :func:`find_middle_plateau` for the admissibility rules.
    """
    found = find_middle_plateau(u, discontinuities, u_left, u_right, tolerance,
                                require_right_state, mode)
    return None if found is None else found[0]


def find_middle_plateau(u, discontinuities, u_left, u_right, tolerance=None,
                        require_right_state=True, mode="outside"):
    """``(value, (start, stop))`` of the middle plateau, or ``None``.

    Value of a TV-increasing plateau bracketed by two jumps, or ``None``.

    The first jump must leave a plateau close to ``u_left``. With the default
    ``mode="outside"`` the plateau between the jumps must lie outside
    ``[min(u_L, u_R), max(u_L, u_R)]``; ``mode="below_left"`` asks for a
    plateau below ``u_L`` whatever follows it. With ``require_right_state``
    the second jump must also arrive close to ``u_right``. The value is the
    median of the plateau after trimming 10% at each edge.
    """
    if mode not in MIDDLE_MODES:
        raise ValueError(f"unknown mode {mode!r}")
    u = np.asarray(u, dtype=float).ravel()
    if tolerance is None:
        tolerance = 0.1 * abs(u_left - u_right)
    lo, hi = min(u_left, u_right), max(u_left, u_right)
    discs = list(discontinuities)
    for first, second in zip(discs[:-1], discs[1:]):
        a0, a1 = first.left_plateau
        if not _near(float(np.median(u[a0:a1])), u_left, tolerance):
            continue
        m0, m1 = first.right_plateau
        if second.left_plateau != first.right_plateau:
            continue
        middle = _trimmed_median(u[m0:m1])
        if mode == "outside" and lo <= middle <= hi:
            continue
        if mode == "below_left" and not middle < u_left - tolerance:
            continue
        if require_right_state:
            b0, b1 = second.right_plateau
            if not _near(float(np.median(u[b0:b1])), u_right, tolerance):
                continue
        return middle, (m0, m1)
    return None


def plateaus_above(u, discontinuities, level, tolerance=0.0):
    """Trimmed medians of detected plateaus lying above ``level + tolerance``."""
    u = np.asarray(u, dtype=float).ravel()
    seen, values = set(), []
    for d in discontinuities:
        for seg in (d.left_plateau, d.right_plateau):
            if seg in seen:
                continue
            seen.add(seg)
            value = _trimmed_median(u[seg[0]:seg[1]])
            if value > level + tolerance:
                values.append(value)
    return values


def kinetic_bounds_scalar_cubic(u_left):
    """``(-u_L, -u_L/2)``, bounds of the kinetic function of the cubic law."""
    if not u_left > 0:
        raise ValueError("the cubic bounds are stated for u_L > 0")
    return -float(u_left), -0.5 * float(u_left)


def within_bounds(u_middle, bounds, slack=0.0):
    lower, upper = bounds
    return lower - slack <= u_middle <= upper + slack
