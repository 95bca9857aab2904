"""Total variation and exact 1-D total-variation denoising."""

from __future__ import annotations

import numba
import numpy as np


def total_variation(u) -> float:
    u = np.asarray(u, dtype=float).ravel()
    if u.size < 2:
        return 0.0
    return float(np.sum(np.abs(np.diff(u))))


@numba.njit(cache=False)
def _condat(y, lam, x):
    # Condat's direct scan; the write loops run at least once, as do-while loops
    n = y.shape[0]
    k = 0
    k0 = 0
    kplus = 0
    kminus = 0
    umin = lam
    umax = -lam
    vmin = y[0] - lam
    vmax = y[0] + lam
    twolam = 2.0 * lam
    while k0 < n:
        while k == n - 1:
            if umin < 0.0:
                x[k0] = vmin
                k0 += 1
                while k0 <= kminus:
                    x[k0] = vmin
                    k0 += 1
                kminus = k0
                k = k0
                vmin = y[k0]
                umin = lam
                umax = vmin + umin - vmax
            elif umax > 0.0:
                x[k0] = vmax
                k0 += 1
                while k0 <= kplus:
                    x[k0] = vmax
                    k0 += 1
                kplus = k0
                k = k0
                vmax = y[k0]
                umax = -lam
                umin = vmax + umax - vmin
            else:
                vmin += umin / (k - k0 + 1)
                x[k0] = vmin
                k0 += 1
                while k0 <= k:
                    x[k0] = vmin
                    k0 += 1
                return
        umin += y[k + 1] - vmin
        if umin < -lam:
            x[k0] = vmin
            k0 += 1
            while k0 <= kminus:
                x[k0] = vmin
                k0 += 1
            kplus = k0
            kminus = k0
            k = k0
            vmin = y[k0]
            vmax = vmin + twolam
            umin = lam
            umax = -lam
        else:
            umax += y[k + 1] - vmax
            if umax > lam:
                x[k0] = vmax
                k0 += 1
                while k0 <= kplus:
                    x[k0] = vmax
                    k0 += 1
                kplus = k0
                kminus = k0
                k = k0
                vmax = y[k0]
                vmin = vmax - twolam
                umin = lam
                umax = -lam
            else:
                k += 1
                if umin >= lam:
                    kminus = k
                    vmin += (umin - lam) / (kminus - k0 + 1)
                    umin = lam
                if umax <= -lam:
                    kplus = k
                    vmax += (umax + lam) / (kplus - k0 + 1)
                    umax = -lam
    return


def tv_denoise(values, lam):
    """Minimizer of ``0.5 sum (y_i - u_i)^2 + lam * sum |u_i+1 - u_i|``."""
    if lam < 0:
        raise ValueError("regularization must be non-negative")
    y = np.ascontiguousarray(np.asarray(values, dtype=float).ravel())
    if lam == 0 or y.size < 2:
        return y.copy()
    if not np.all(np.isfinite(y)):
        raise ValueError("tv_denoise needs finite input")
    x = np.empty_like(y)
    _condat(y, float(lam), x)
    return x


def tv_optimality_violation(y, x, lam) -> float:
    """Largest violation of the optimality conditions of the TV objective.

    With ``z_j = sum_{i<=j} (y_i - x_i)`` the minimizer satisfies ``z_{n-1} = 0``,
    ``|z_j| <= lam`` and ``z_j = -lam sign(x_{j+1} - x_j)`` wherever ``x`` jumps.
    """
    y = np.asarray(y, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    z = np.cumsum(y - x)
    worst = abs(z[-1])
    if y.size > 1:
        zj = z[:-1]
        worst = max(worst, float(np.max(np.abs(zj)) - lam))
        dx = np.diff(x)
        jump_tol = 1e-12 * max(1.0, float(np.max(np.abs(y))))
        jumps = np.abs(dx) > jump_tol
        if np.any(jumps):
            worst = max(worst, float(np.max(np.abs(zj[jumps] + lam * np.sign(dx[jumps])))))
    return max(worst, 0.0)
