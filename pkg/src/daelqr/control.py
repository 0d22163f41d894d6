"""Optimal value, optimal trajectory and optimal feedback.

The optimal control of the original problem is read from the optimal
trajectory of the augmented ODE problem, and for an infinite horizon it is
realized by a static state feedback ``u = k_alpha G^+ x`` whose closed loop
is regular for every ``alpha != 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import expm, eigvals, ordqz

from ._ode import check_grid, integrate
from .augmentation import (
    AssumptionReport,
    AugmentedSystem,
    CostWeights,
    build_augmented,
    check_assumptions,
    congruence_matrix,
)
from .exceptions import (
    AssumptionError,
    InconsistentInitialValueError,
    InternalConsistencyError,
)
from .qwf import ConsistencyBasis, QwfSystem, consistency_basis, is_consistent
from .riccati import PInfinity, RiccatiSolution, integrate_dre, p_infinity
from .solution import Trajectory, default_grid
from .tolerances import Tolerances, resolve

INFINITE_HORIZON_PLOT = 10.0


def check_horizon(T) -> float:
    T = float(T)
    if not T > 0.0:
        raise ValueError("horizon must lie in (0, inf]")
    return T


@dataclass(frozen=True, eq=False)
class OptimalSolution:
    trajectory: Trajectory
    x_hat: np.ndarray
    u_hat: np.ndarray
    horizon: float
    value: float

    @property
    def control(self) -> np.ndarray:
        return self.trajectory.input_values


class LQProblem:
    """One system with one cost; caches the augmented data and Riccati solves."""

    def __init__(self, system: QwfSystem, weights: CostWeights, tol: Tolerances | None = None):
        self.system = system
        self.weights = weights if isinstance(weights, CostWeights) else CostWeights(weights)
        self.tol = resolve(tol)
        self._riccati: dict[float, RiccatiSolution] = {}

    @cached_property
    def basis(self) -> ConsistencyBasis:
        return consistency_basis(self.system, tol=self.tol)

    @cached_property
    def augmented(self) -> AugmentedSystem:
        return build_augmented(self.system, self.weights, self.basis, self.tol)

    @cached_property
    def assumptions(self) -> AssumptionReport:
        return check_assumptions(self.augmented, self.system, self.tol)

    @property
    def omega(self) -> int:
        return self.basis.omega

    def require_assumptions(self):
        failed = self.assumptions.failures()
        if failed:
            raise AssumptionError(f"assumptions violated: {failed}", self.assumptions)

    def initial_state(self, x0) -> np.ndarray:
        """``F^+ x0`` for a consistent ``x0``."""
        check = is_consistent(self.system, x0, self.basis, self.tol)
        if not check.consistent:
            raise InconsistentInitialValueError(
                f"x0 is not a consistent initial value (residual {check.residual:.3e})",
                residual=check.residual,
            )
        return check.parameters

    def riccati(self, T: float) -> RiccatiSolution:
        T = check_horizon(T)
        if T == np.inf:
            raise ValueError("use p_infinity() for the infinite horizon")
        if T not in self._riccati:
            self.require_assumptions()
            self._riccati[T] = integrate_dre(self.augmented, T, self.tol)
        return self._riccati[T]

    @cached_property
    def p_infinity(self) -> PInfinity:
        self.require_assumptions()
        return p_infinity(self.augmented, self.tol)

    def value_matrix(self, T: float) -> np.ndarray:
        T = check_horizon(T)
        return self.p_infinity.P if T == np.inf else self.riccati(T).P_final

    def value(self, x0, T: float) -> float:
        """``V_T(x0) = (F^+ x0)' P(T) (F^+ x0)``."""
        T = check_horizon(T)
        self.require_assumptions()
        z = self.initial_state(x0)
        return float(z @ self.value_matrix(T) @ z)

    def gain_function(self, T):
        """``t -> r^-1 (b' P(T - t) + h')`` on ``[0, T]``."""
        aug = self.augmented
        b, h, r = aug.b_hat, aug.h_hat, aug.r_hat
        if T == np.inf:
            g = (b @ self.p_infinity.P + h) / r
            return lambda t: g
        sol = self.riccati(T)
        gains = (sol.P_values @ b + h) / r
        dgains = (sol.slopes @ b) / r
        spline = CubicHermiteSpline(sol.grid, gains, dgains, axis=0)

        def gain(t):
            return spline(min(max(T - t, 0.0), T))

        return gain

    def trajectory(self, x0, T: float, grid=None) -> OptimalSolution:
        """Optimal state, control and augmented trajectory on ``grid``."""
        T = check_horizon(T)
        self.require_assumptions()
        if grid is None:
            grid = default_grid(INFINITE_HORIZON_PLOT if T == np.inf else T)
        grid = check_grid(grid)
        if grid[-1] > T * (1 + 1e-12):
            raise ValueError(f"grid extends beyond the horizon {T}")
        z0 = self.initial_state(x0)
        aug = self.augmented
        A, b = aug.A_hat, aug.b_hat
        gain = self.gain_function(T)

        def rhs(t, x):
            return A @ x - b * (gain(t) @ x)

        x_hat = integrate(rhs, grid, z0, self.tol.dre_rtol, self.tol.dre_atol)
        gains = np.array([gain(t) for t in grid]).reshape(grid.size, -1)
        u_hat = -np.einsum("ij,ij->i", gains, x_hat)
        traj = self.reconstruct(grid, x_hat, u_hat)
        return OptimalSolution(traj, x_hat, u_hat, T, float(z0 @ self.value_matrix(T) @ z0))

    def reconstruct(self, grid, x_hat, u_hat) -> Trajectory:
        """Original state and input from the augmented pair via ``M``."""
        M = congruence_matrix(self.system, self.basis)
        xu = np.column_stack([x_hat, u_hat]) @ M.T
        return Trajectory(grid=np.asarray(grid), states=xu[:, :-1], input_values=xu[:, -1],
                          n_J=self.system.n_J)

    def feedback(self, alpha: float = 1.0, G_dagger=None, rng=None) -> "FeedbackLaw":
        return synthesize_feedback(self.system, self.weights, alpha, G_dagger, problem=self, rng=rng)


# -- module-level operations --------------------------------------------------


def optimal_value(sys: QwfSystem, weights, x0, T: float, tol: Tolerances | None = None) -> float:
    return LQProblem(sys, weights, tol).value(x0, T)


def optimal_trajectory(sys: QwfSystem, weights, x0, T: float, grid=None,
                       tol: Tolerances | None = None) -> OptimalSolution:
    return LQProblem(sys, weights, tol).trajectory(x0, T, grid)


def quadrature_cost(weights, traj: Trajectory) -> float:
    """Simpson quadrature of ``(x, u)' S (x, u)`` along a trajectory."""
    S = weights.S if isinstance(weights, CostWeights) else np.asarray(weights, dtype=float)
    z = np.column_stack([traj.states, traj.input_values])
    integrand = np.einsum("ij,jk,ik->i", z, S, z)
    return float(simpson(integrand, x=traj.grid))


# -- feedback -------------------------------------------------------------------


def augmented_embedding(sys: QwfSystem, basis: ConsistencyBasis) -> np.ndarray:
    """``G = [[I, 0, 0], [0, -b_N, -K]]`` with ``x = G (x_hat, u_hat)``."""
    return congruence_matrix(sys, basis)[:-1]


def left_inverse_variant(G: np.ndarray, beta: float) -> np.ndarray:
    """``G^+ + beta * e_last v'`` with ``v`` spanning part of ``ker G'``.

    ``v`` is the first left singular vector of ``G`` outside its range,
    signed so its largest entry is positive.  Every member is a left
    inverse of ``G``.
    """
    G = np.asarray(G, dtype=float)
    n, m = G.shape
    if m >= n:
        raise ValueError("G has no left null space; its left inverse is unique")
    U = np.linalg.svd(G)[0]
    v = U[:, m]
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    out = np.linalg.pinv(G)
    out[-1] += beta * v
    return out


@dataclass(frozen=True)
class RegularityCertificate:
    regular: bool
    structural_singular: bool
    det_regular: bool
    conditions: dict = field(default_factory=dict)
    det_samples: tuple = ()

    def to_dict(self) -> dict:
        return {
            "regular": self.regular,
            "structural_test_singular": self.structural_singular,
            "determinant_test_regular": self.det_regular,
            "conditions": self.conditions,
            "det_ratios": [float(x) for x in self.det_samples],
        }


def check_closed_loop_regular(sys: QwfSystem, k_row, rng=None,
                              tol: Tolerances | None = None) -> RegularityCertificate:
    """Is the pencil ``(E, A + b k_row)`` regular?

    Two independent tests:

    * structural: with ``(k_J, k_N) = -k_row`` the pencil is singular iff
      ``k_J (sI - J)^{-1} b_J == 0``, ``k_N b_N = 1`` and ``k_N K = 0``; the
      rational identity is sampled at ``n_J + 1`` points.
    * sampling: ``|det(lam E - (A + b k_row))|`` at ``n + 1`` random ``lam``,
      scaled to the reciprocal condition number ``sigma_min / sigma_max``.
    """
    tol = resolve(tol)
    rng = np.random.default_rng(0) if rng is None else rng
    k_row = np.asarray(k_row, dtype=float).reshape(-1)
    basis = consistency_basis(sys, tol=tol)
    k = -k_row
    k_J, k_N = k[: sys.n_J], k[sys.n_J:]
    eps = tol.det_sample

    # radius keeps ||(sI - J)^{-1}|| <= 1 at the sample points
    rho = 1.0 + (np.linalg.norm(sys.J, 2) if sys.n_J else 0.0)
    s = rho * np.exp(2j * np.pi * rng.random(sys.n_J + 1))
    if sys.n_J:
        tf = np.array([k_J @ np.linalg.solve(si * np.eye(sys.n_J) - sys.J, sys.b_J) for si in s])
        tf_max = float(np.max(np.abs(tf)))
    else:
        tf_max = 0.0
    c1 = tf_max <= eps * max(1.0, np.linalg.norm(k_J) * np.linalg.norm(sys.b_J))
    knbn = float(k_N @ sys.b_N) if sys.n_N else 0.0
    c2 = abs(knbn - 1.0) <= eps * max(1.0, np.linalg.norm(k_N) * np.linalg.norm(sys.b_N))
    knK = k_N @ basis.K if sys.n_N else np.zeros(0)
    c3 = bool(np.linalg.norm(knK) <= eps * max(1.0, np.linalg.norm(k_N) * np.linalg.norm(basis.K)))
    structural_singular = bool(c1 and c2 and c3)

    A_cl = sys.A + np.outer(sys.b, k_row)
    lams = (0.5 + rng.random(sys.n + 1)) * np.exp(2j * np.pi * rng.random(sys.n + 1))
    ratios = []
    for lam in lams:
        # |det| over the product of the n - 1 largest singular values and the
        # largest one: sigma_min / sigma_max, invariant to the scale of k_row
        sv = np.linalg.svd(lam * sys.E - A_cl, compute_uv=False)
        ratios.append(sv[-1] / sv[0] if sv[0] > 0 else 0.0)
    det_regular = bool(max(ratios) > eps)

    if det_regular == structural_singular:
        raise InternalConsistencyError(
            "structural and determinant regularity tests disagree "
            f"(structural singular={structural_singular}, det ratios max {max(ratios):.3e})"
        )
    conditions = {
        "k_J_transfer_max": tf_max,
        "k_N_b_N": knbn,
        "k_N_K_norm": float(np.linalg.norm(knK)),
        "transfer_vanishes": bool(c1),
        "k_N_b_N_is_one": bool(c2),
        "k_N_K_vanishes": c3,
    }
    return RegularityCertificate(det_regular, structural_singular, det_regular, conditions,
                                 tuple(ratios))


@dataclass(frozen=True, eq=False)
class FeedbackLaw:
    alpha: float
    k_hat_alpha: np.ndarray
    G: np.ndarray
    G_dagger: np.ndarray
    k_row: np.ndarray
    closed_loop_A: np.ndarray
    certificate: RegularityCertificate
    p: np.ndarray
    n_hat: int

    @property
    def regular(self) -> bool:
        return self.certificate.regular

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "k_hat_alpha": self.k_hat_alpha.tolist(),
            "G_dagger": self.G_dagger.tolist(),
            "k_row": self.k_row.tolist(),
            "closed_loop_A": self.closed_loop_A.tolist(),
            "regularity": self.certificate.to_dict(),
        }


def synthesize_feedback(sys: QwfSystem, weights, alpha: float = 1.0, G_dagger=None,
                        problem: LQProblem | None = None, rng=None,
                        tol: Tolerances | None = None) -> FeedbackLaw:
    """Optimal infinite-horizon feedback ``u = k_alpha G^+ x``.

    ``k_alpha = alpha (p, 1) + e_{n_J+1}`` with
    ``p = r^-1 (b' P(inf) + h')``.  Requires ``omega >= 1`` and
    ``alpha != 0``; ``G_dagger`` defaults to the pseudoinverse of ``G``.
    """
    problem = LQProblem(sys, weights, tol) if problem is None else problem
    tol = problem.tol
    alpha = float(alpha)
    if alpha == 0.0:
        raise ValueError("alpha must be nonzero; alpha = 0 gives a singular closed loop")
    if problem.omega == 0:
        raise ValueError(
            "omega = 0: the optimal control is the plain state feedback "
            "u = -r^-1 (b' P + h') x_J; no augmented feedback is needed"
        )
    problem.require_assumptions()
    aug = problem.augmented
    P_inf = problem.p_infinity.P
    p = (aug.b_hat @ P_inf + aug.h_hat) / aug.r_hat
    k_hat = alpha * np.append(p, 1.0)
    k_hat[sys.n_J] += 1.0

    G = augmented_embedding(sys, problem.basis)
    if G_dagger is None:
        G_dagger = np.linalg.pinv(G)
    else:
        G_dagger = np.asarray(G_dagger, dtype=float)
        if G_dagger.shape != (G.shape[1], G.shape[0]):
            raise ValueError(f"G_dagger must have shape {(G.shape[1], G.shape[0])}")
    err = np.linalg.norm(G_dagger @ G - np.eye(G.shape[1]))
    if err > 1e-10 * max(1.0, np.linalg.norm(G_dagger) * np.linalg.norm(G)):
        raise ValueError(f"G_dagger is not a left inverse of G (||G^+G - I|| = {err:.2e})")

    k_row = k_hat @ G_dagger
    A_cl = sys.A + np.outer(sys.b, k_row)
    cert = check_closed_loop_regular(sys, k_row, rng=rng, tol=tol)
    return FeedbackLaw(alpha, k_hat, G, G_dagger, k_row, A_cl, cert, p, aug.n_hat)


def simulate_closed_loop(sys: QwfSystem, k_row, x0, grid, n_finite: int | None = None) -> Trajectory:
    """Solve ``d/dt E x = (A + b k_row) x`` with ``(E x)(0) = x0``.

    Uses the ordered generalized Schur form of the closed-loop pencil:
    every solution evolves in the deflating subspace of its finite
    eigenvalues, on which the system is an ODE solved by the matrix
    exponential.  ``n_finite`` is the number of finite eigenvalues; by
    default it is inferred from the gap in ``|beta| / |(alpha, beta)|``.
    """
    grid = check_grid(grid)
    k_row = np.asarray(k_row, dtype=float).reshape(-1)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    A_cl = sys.A + np.outer(sys.b, k_row)
    E = sys.E
    w = eigvals(A_cl, E, homogeneous_eigvals=True)
    a, bb = w[0], w[1]
    finiteness = np.abs(bb) / np.hypot(np.abs(a), np.abs(bb))
    order = np.sort(finiteness)[::-1]
    if n_finite is None:
        small = order < 1e-6
        n_finite = int(np.sum(~small))
    if n_finite == 0:
        states = np.zeros((grid.size, sys.n))
    else:
        hi = order[n_finite - 1]
        lo = order[n_finite] if n_finite < order.size else 0.0
        if not hi > lo:
            raise InternalConsistencyError("cannot separate finite from infinite eigenvalues")
        thr = np.sqrt(hi * lo) if lo > 0 else 0.5 * hi

        def finite(alpha, beta):
            return np.abs(beta) / np.hypot(np.abs(alpha), np.abs(beta)) > thr

        AA, BB, _, _, Q, Z = ordqz(A_cl, E, sort=finite, output="complex")
        r = n_finite
        V = Z[:, :r]
        C = np.linalg.solve(BB[:r, :r], AA[:r, :r])
        z0, *_ = np.linalg.lstsq(E @ V, x0.astype(complex), rcond=None)
        residual = np.linalg.norm(E @ V @ z0 - x0)
        if residual > 1e-8 * max(1.0, np.linalg.norm(x0)):
            raise InconsistentInitialValueError(
                f"x0 is not consistent for the closed loop (residual {residual:.3e})",
                residual=residual,
            )
        states = np.array([(V @ (expm(C * t) @ z0)).real for t in grid])
    u = states @ k_row
    return Trajectory(grid=grid, states=states, input_values=u, n_J=sys.n_J)
