"""Overshoots of a numerical solution relative to a classical reference."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d


def _coarsen(reference, n):
    ref = np.asarray(reference, dtype=float).ravel()
    if ref.size % n:
        raise ValueError(f"reference size {ref.size} is not a multiple of {n}")
    return ref.reshape(n, -1)


def envelope_overshoot(u, reference, radius, periodic=True) -> float:
    """Largest excursion of ``u`` outside the local range of ``reference``.

    Both series live on uniform cell-centred grids of one interval and the
    reference size is a multiple of ``u.size``. At every cell the admissible
    range is ``[min, max]`` of the reference over ``radius`` neighbouring cells
    on each side, so jumps that sit a cell or two apart do not count. The
    result is ``<= 0`` when ``u`` never leaves that range.
    """
    u = np.asarray(u, dtype=float).ravel()
    if radius < 0:
        raise ValueError("radius must be non-negative")
    blocks = _coarsen(reference, u.size)
    mode = "wrap" if periodic else "nearest"
    size = 2 * int(radius) + 1
    upper = maximum_filter1d(blocks.max(axis=1), size, mode=mode)
    lower = minimum_filter1d(blocks.min(axis=1), size, mode=mode)
    return float(max(np.max(u - upper), np.max(lower - u)))


def max_abs_excess(u, reference) -> float:
    """``max|u| - max|reference|``."""
    return float(np.max(np.abs(u)) - np.max(np.abs(reference)))
