"""Thin wrapper around scipy's adaptive Runge-Kutta 4(5) pair."""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

from .exceptions import IntegrationError


def check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size < 1 or grid[0] != 0.0:
        raise ValueError("time grid must start at 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return grid


def integrate(fun, grid, y0, rtol, atol, breakpoints=(), max_step=np.inf) -> np.ndarray:
    """Values of the solution of ``y' = fun(t, y)`` at every grid point.

    Integration restarts at every breakpoint inside the grid range so that
    kinks of the right-hand side never fall inside a step.
    """
    grid = check_grid(grid)
    y0 = np.asarray(y0, dtype=float)
    out = np.empty((grid.size, y0.size))
    out[0] = y0
    if y0.size == 0 or grid.size == 1:
        out[:] = y0
        return out
    t_end = grid[-1]
    cuts = [0.0] + [b for b in breakpoints if 0.0 < b < t_end] + [t_end]
    y = y0
    for a, b in zip(cuts, cuts[1:]):
        sel = np.nonzero((grid > a) & (grid <= b))[0]
        t_eval = grid[sel]
        if t_eval.size == 0 or t_eval[-1] != b:
            t_eval = np.append(t_eval, b)
        sol = solve_ivp(fun, (a, b), y, method="RK45", t_eval=t_eval,
                        rtol=rtol, atol=atol, max_step=max_step)
        if sol.status != 0:
            t_fail = sol.t[-1] if sol.t.size else a
            raise IntegrationError(f"integration failed at t = {t_fail:.6g}: {sol.message}", t_fail)
        out[sel] = sol.y.T[: sel.size]
        y = sol.y[:, -1]
    return out
