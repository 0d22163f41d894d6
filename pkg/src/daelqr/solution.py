"""Solutions of the open-loop system for a feasible pair ``(x0, u)``.

The differential part is integrated numerically; the algebraic part is
read off the input and its derivatives,
``x_N(t) = -[b_N, K] (u(t), ..., u^(omega)(t))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._ode import check_grid, integrate
from .exceptions import InconsistentInitialValueError
from .qwf import ConsistencyBasis, QwfSystem, consistency_basis, is_consistent
from .signal import ControlSignal
from .tolerances import Tolerances, resolve

DEFAULT_POINTS = 501


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: np.ndarray
    states: np.ndarray  # (len(grid), n), columns (x_J, x_N)
    input_values: np.ndarray
    n_J: int

    @property
    def x_J(self) -> np.ndarray:
        return self.states[:, : self.n_J]

    @property
    def x_N(self) -> np.ndarray:
        return self.states[:, self.n_J:]


def default_grid(horizon: float, points: int = DEFAULT_POINTS) -> np.ndarray:
    return np.linspace(0.0, float(horizon), points)


def check_feasible(sys, x0, u: ControlSignal, basis: ConsistencyBasis, tol: Tolerances):
    """Raise unless ``x0`` is consistent and ``F^+ x0`` matches ``u`` at 0."""
    check = is_consistent(sys, x0, basis, tol)
    if not check.consistent:
        raise InconsistentInitialValueError(
            f"x0 is not a consistent initial value (residual {check.residual:.3e})",
            residual=check.residual,
        )
    omega = basis.omega
    if u.max_order < omega:
        raise ValueError(f"input must be differentiable {omega} times, smoothness is {u.smoothness_order}")
    if omega == 0:
        return check.parameters
    derivs = u.derivatives(0.0, omega - 1)
    params = check.parameters[sys.n_J:]
    failed = [
        f"u^({i})(0) = {derivs[i]:.6g} but x0 requires {params[i]:.6g}"
        for i in range(omega)
        if abs(derivs[i] - params[i]) > tol.feasibility
    ]
    if failed:
        raise InconsistentInitialValueError(
            "input does not match the initial value: " + "; ".join(failed),
            residual=check.residual,
            failed=failed,
        )
    return check.parameters


def algebraic_part(sys: QwfSystem, basis: ConsistencyBasis, derivs: np.ndarray) -> np.ndarray:
    """``-[b_N, K] (u, ..., u^(omega))`` for a stack of derivative rows."""
    BK = np.column_stack([sys.b_N, basis.K]) if sys.n_N else np.zeros((0, basis.omega + 1))
    return -derivs @ BK.T


def solve_dae(
    sys: QwfSystem,
    x0,
    u: ControlSignal,
    grid=None,
    horizon: float | None = None,
    tol: Tolerances | None = None,
) -> Trajectory:
    """Trajectory of the open-loop system for a feasible pair ``(x0, u)``.

    Either ``grid`` (starting at 0) or ``horizon`` must be given; the latter
    uses a uniform grid of 501 points.
    """
    tol = resolve(tol)
    if grid is None:
        if horizon is None:
            raise ValueError("give either a grid or a horizon")
        grid = default_grid(horizon)
    grid = check_grid(grid)
    basis = consistency_basis(sys, tol=tol)
    check_feasible(sys, x0, u, basis, tol)
    omega = basis.omega
    x0 = np.asarray(x0, dtype=float)

    J, b_J = sys.J, sys.b_J

    def rhs(t, x):
        return J @ x + b_J * u(t)

    x_J = integrate(rhs, grid, x0[: sys.n_J], tol.ode_rtol, tol.ode_atol,
                    breakpoints=u.breakpoints[1:])
    derivs = u.derivatives(grid, omega)
    x_N = algebraic_part(sys, basis, derivs)
    return Trajectory(grid=grid, states=np.hstack([x_J, x_N]),
                      input_values=derivs[:, 0], n_J=sys.n_J)


@dataclass(frozen=True)
class ResidualReport:
    max_residual: float
    h: float
    points_checked: int
    expected_order: int = 2

    @property
    def h_squared(self) -> float:
        return self.h**2


def verify_solution(sys: QwfSystem, traj: Trajectory, u: ControlSignal | None = None) -> ResidualReport:
    """Central-difference residual ``||D_h(E x) - A x - b u||`` on a uniform grid.

    Stencils that straddle an interior breakpoint of ``u`` are skipped:
    there the highest derivative of ``u`` may jump and the difference
    quotient does not approximate the a.e. derivative.
    """
    t = np.asarray(traj.grid, dtype=float)
    if t.size < 3:
        raise ValueError("residual check needs at least 3 grid points")
    steps = np.diff(t)
    h = float(steps.mean())
    if np.max(np.abs(steps - h)) > 1e-9 * max(1.0, abs(t[-1])):
        raise ValueError("residual check needs a uniform grid")
    Ex = traj.states @ sys.E.T
    lhs = (Ex[2:] - Ex[:-2]) / (2.0 * h)
    rhs = traj.states[1:-1] @ sys.A.T + np.outer(traj.input_values[1:-1], sys.b)
    res = np.linalg.norm(lhs - rhs, axis=1) if sys.n else np.zeros(t.size - 2)
    keep = np.ones(t.size - 2, dtype=bool)
    if u is not None:
        for tb in u.breakpoints[1:]:
            keep &= ~((t[:-2] < tb) & (tb < t[2:]))
    res = res[keep]
    return ResidualReport(
        max_residual=float(res.max()) if res.size else 0.0,
        h=h,
        points_checked=int(res.size),
    )
