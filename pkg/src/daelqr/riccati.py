"""Differential and algebraic Riccati equations of the augmented problem.

    P' = A' P + P A + Q - (P b + h) r^{-1} (P b + h)',   P(0) = 0

is integrated forward in time.  Its right-hand side evaluated at a
constant ``P`` is the algebraic Riccati residual, so the limit ``P(inf)``
is found by integrating until the derivative is negligible and then
polishing with Newton's method on the algebraic equation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import solve_continuous_lyapunov

from ._linalg import sym
from .augmentation import AugmentedSystem, check_assumptions
from .exceptions import AssumptionError, ConvergenceError, IntegrationError
from .tolerances import Tolerances, resolve

MIN_GRID_INTERVALS = 250
NEWTON_MAX_STEPS = 8
# the derivative bound that hands over from integration to Newton polishing
SETTLE_FACTOR = 1e3


def dre_rhs(aug: AugmentedSystem, P: np.ndarray) -> np.ndarray:
    A, b, Q, h, r = aug.A_hat, aug.b_hat, aug.Q_hat, aug.h_hat, aug.r_hat
    g = P @ b + h
    return A.T @ P + P @ A + Q - np.outer(g, g) / r


def are_residual(aug: AugmentedSystem, P) -> float:
    """Frobenius norm of the algebraic Riccati expression at ``P``."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if aug.n_hat == 0:
        return 0.0
    return float(np.linalg.norm(dre_rhs(aug, P), "fro"))


class _Packing:
    """Symmetric matrices <-> upper-triangular vectors."""

    def __init__(self, n):
        self.n = n
        self.iu = np.triu_indices(n)
        # flat position of entry (i, j) in the packed vector
        index = np.zeros((n, n), dtype=int)
        index[self.iu] = np.arange(self.iu[0].size)
        self.index = np.maximum(index, index.T)

    def pack(self, P):
        return P[self.iu]

    def unpack(self, v):
        return v[self.index]

    def unpack_many(self, V):
        return V[:, self.index]

    def rhs(self, aug: AugmentedSystem):
        """Packed right-hand side of the Riccati equation."""
        A, b, h, Q = aug.A_hat, aug.b_hat, aug.h_hat, aug.Q_hat
        r_inv = 1.0 / aug.r_hat
        iu, index = self.iu, self.index

        def fun(t, v):
            P = v[index]
            X = P @ A
            g = P @ b + h
            return (X.T + X + Q - r_inv * (g[:, None] * g[None, :]))[iu]

        return fun


def _require(aug, tol):
    report = check_assumptions(aug, tol=tol)
    failed = report.failures()
    if failed:
        raise AssumptionError(f"Riccati integration requires A1-A3; failed: {failed}", report)
    return report


@dataclass(frozen=True, eq=False)
class PInfinity:
    P: np.ndarray
    t_converged: float
    derivative_norm: float
    are_residual: float
    newton_steps: int = 0

    def to_dict(self) -> dict:
        return {
            "t_converged": self.t_converged,
            "derivative_norm": self.derivative_norm,
            "are_residual": self.are_residual,
            "newton_steps": self.newton_steps,
            "spectrum": np.linalg.eigvalsh(self.P).tolist() if self.P.size else [],
        }


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    """``P`` on the accepted step grid with exact slopes for interpolation."""

    grid: np.ndarray
    P_values: np.ndarray  # (len(grid), n_hat, n_hat)
    slopes: np.ndarray
    P_infinity: PInfinity | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    @property
    def P_final(self) -> np.ndarray:
        return self.P_values[-1]

    @cached_property
    def _spline(self):
        m = self.P_values.shape[0]
        return CubicHermiteSpline(self.grid, self.P_values.reshape(m, -1),
                                  self.slopes.reshape(m, -1), axis=0)

    def __call__(self, t):
        """Cubic Hermite interpolant of ``P`` at ``0 <= t <= horizon``."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < -1e-12 * max(1.0, self.horizon)) or \
                np.any(t_arr > self.horizon * (1 + 1e-12)):
            raise ValueError(f"t outside the integrated range [0, {self.horizon}]")
        n = self.P_values.shape[1]
        vals = self._spline(np.clip(t_arr, 0.0, self.horizon))
        return vals.reshape(t_arr.shape + (n, n))


def integrate_dre(
    aug: AugmentedSystem, T: float, tol: Tolerances | None = None,
    min_intervals: int = MIN_GRID_INTERVALS,
) -> RiccatiSolution:
    """Forward integration of the differential Riccati equation on ``[0, T]``.

    Only the upper triangle is integrated, so every iterate is exactly
    symmetric.  The step size is capped so that at least ``min_intervals``
    steps cover the horizon.
    """
    tol = resolve(tol)
    T = float(T)
    if not (0.0 < T < np.inf):
        raise ValueError("horizon must be finite and positive")
    _require(aug, tol)
    n = aug.n_hat
    pk = _Packing(n)

    if n == 0:
        grid = np.linspace(0.0, T, min_intervals + 1)
        z = np.zeros((grid.size, 0, 0))
        return RiccatiSolution(grid, z, z.copy(), metadata={"steps": 0})

    fun = pk.rhs(aug)
    sol = solve_ivp(fun, (0.0, T), np.zeros(n * (n + 1) // 2), method="RK45",
                    rtol=tol.dre_rtol, atol=tol.dre_atol, max_step=T / min_intervals)
    if sol.status != 0:
        raise IntegrationError(f"Riccati integration failed at t = {sol.t[-1]:.6g}: {sol.message}",
                               float(sol.t[-1]))
    P = pk.unpack_many(sol.y.T)
    slopes = np.array([dre_rhs(aug, Pi) for Pi in P])
    return RiccatiSolution(sol.t, P, slopes, metadata={"steps": int(sol.t.size - 1),
                                                       "rhs_evaluations": int(sol.nfev)})


def _newton_polish(aug: AugmentedSystem, P: np.ndarray):
    """Newton-Kleinman steps on the algebraic equation, accepted only while
    they shrink the residual and stay close to the starting point."""
    A, b, h, r = aug.A_hat, aug.b_hat, aug.h_hat, aug.r_hat
    res = are_residual(aug, P)
    scale = max(1.0, np.linalg.norm(P))
    steps = 0
    for _ in range(NEWTON_MAX_STEPS):
        if res <= 1e-15 * scale:
            break
        gain = (b @ P + h) / r
        A_cl = A - np.outer(b, gain)
        ev = np.linalg.eigvals(A_cl)
        # the Lyapunov operator is singular when two eigenvalues sum to zero
        if np.min(np.abs(ev[:, None] + ev[None, :])) < 1e-8 * max(1.0, np.linalg.norm(A_cl)):
            break
        delta = sym(solve_continuous_lyapunov(A_cl.T, -dre_rhs(aug, P)))
        if np.linalg.norm(delta) > 1e-3 * scale:
            break
        P_new = P + delta
        res_new = are_residual(aug, P_new)
        if not res_new < res:
            break
        P, res = P_new, res_new
        steps += 1
    return P, res, steps


def p_infinity(aug: AugmentedSystem, tol: Tolerances | None = None) -> PInfinity:
    """Limit of the Riccati solution started at ``P(0) = 0``.

    The target is ``||P'|| <= eps * max(1, ||P||)`` (``eps`` from the
    tolerance bundle, default 1e-10).  Integration first stops where the
    derivative is ``SETTLE_FACTOR`` times that bound and Newton's method
    refines the point; if the refined residual misses the target, the
    integration resumes until the strict bound or ``t_max`` (default 1000)
    is reached.  Raises ConvergenceError if neither succeeds.
    """
    tol = resolve(tol)
    _require(aug, tol)
    n = aug.n_hat
    if n == 0:
        return PInfinity(np.zeros((0, 0)), 0.0, 0.0, 0.0)
    pk = _Packing(n)
    eps = tol.p_inf_derivative
    fun = pk.rhs(aug)

    def event(factor):
        def settled(t, v):
            P = pk.unpack(v)
            return np.linalg.norm(dre_rhs(aug, P)) - factor * eps * max(1.0, np.linalg.norm(P))

        settled.terminal = True
        settled.direction = -1
        return settled

    def run(t0, v0, factor):
        if event(factor)(t0, v0) <= 0:
            return t0, v0
        sol = solve_ivp(fun, (t0, tol.p_inf_t_max), v0, method="RK45",
                        rtol=tol.dre_rtol, atol=tol.dre_atol, events=event(factor))
        if sol.status == -1:
            raise IntegrationError(f"Riccati integration failed at t = {sol.t[-1]:.6g}: {sol.message}",
                                   float(sol.t[-1]))
        if sol.status != 1:
            return None, sol.y[:, -1]
        return float(sol.t_events[0][0]), sol.y_events[0][0]

    t_conv, v = run(0.0, np.zeros(n * (n + 1) // 2), SETTLE_FACTOR)
    if t_conv is not None:
        P0 = pk.unpack(v)
        P, res, steps = _newton_polish(aug, P0)
        if res <= eps * max(1.0, np.linalg.norm(P)):
            return PInfinity(P=P, t_converged=t_conv, derivative_norm=are_residual(aug, P0),
                             are_residual=res, newton_steps=steps)
        t_conv, v = run(t_conv, v, 1.0)
    if t_conv is None:
        d = float(np.linalg.norm(fun(0.0, v)))
        raise ConvergenceError(
            f"Riccati solution has not settled by t = {tol.p_inf_t_max:g} "
            f"(derivative norm {d:.3e})", d)
    P0 = pk.unpack(v)
    P, res, steps = _newton_polish(aug, P0)
    return PInfinity(P=P, t_converged=t_conv, derivative_norm=are_residual(aug, P0),
                     are_residual=res, newton_steps=steps)
