"""The augmented ODE, its transformed cost, and the standing assumptions.

The augmented state is ``x_hat = (x_J, u, ..., u^(omega-1))`` with free
input ``u_hat = u^(omega)``.  Solutions of the original system and of the
augmented system correspond one to one through

    (x_J, x_N, u) = M (x_hat, u_hat),   M = [[I, 0, 0], [0, -b_N, -K], [0, 1, 0]],

so the stage cost ``(x, u)' S (x, u)`` becomes ``(x_hat, u_hat)' S_hat (x_hat, u_hat)``
with ``S_hat = M' S M``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._linalg import hautus_observable, hautus_stabilizable, min_eig_sym, numerical_rank, sym
from .exceptions import DimensionError, InternalConsistencyError
from .qwf import ConsistencyBasis, QwfSystem, consistency_basis
from .tolerances import Tolerances, resolve

ASYMMETRY_WARN = 1e-9


@dataclass(frozen=True)
class CostBlocks:
    Q_J: np.ndarray
    Q_JN: np.ndarray
    Q_N: np.ndarray
    h_J: np.ndarray
    h_N: np.ndarray
    r: float


@dataclass(frozen=True, eq=False)
class CostWeights:
    """Symmetric ``(n+1) x (n+1)`` weight of the stage cost ``(x, u)' S (x, u)``."""

    S: np.ndarray

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.S, dtype=float))
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise DimensionError(f"S must be square, got shape {S.shape}")
        asym = np.max(np.abs(S - S.T)) if S.size else 0.0
        if asym > ASYMMETRY_WARN * max(1.0, np.max(np.abs(S))):
            warnings.warn(f"weight matrix S is not symmetric (max asymmetry {asym:.2e}); symmetrizing",
                          stacklevel=3)
        S = sym(S)
        S.setflags(write=False)
        object.__setattr__(self, "S", S)

    @property
    def n(self) -> int:
        return self.S.shape[0] - 1

    def blocks(self, n_J: int) -> CostBlocks:
        S, j = self.S, n_J
        return CostBlocks(
            Q_J=S[:j, :j], Q_JN=S[:j, j:-1], Q_N=S[j:-1, j:-1],
            h_J=S[:j, -1], h_N=S[j:-1, -1], r=float(S[-1, -1]),
        )


def congruence_matrix(sys: QwfSystem, basis: ConsistencyBasis) -> np.ndarray:
    """``M`` with ``(x_J, x_N, u) = M (x_hat, u_hat)``; shape ``(n+1, n_hat+1)``."""
    n_J, n_N, omega = sys.n_J, sys.n_N, basis.omega
    M = np.zeros((n_J + n_N + 1, n_J + omega + 1))
    M[:n_J, :n_J] = np.eye(n_J)
    M[n_J:n_J + n_N, n_J] = -sys.b_N
    M[n_J:n_J + n_N, n_J + 1:] = -basis.K
    M[-1, n_J] = 1.0
    return M


@dataclass(frozen=True, eq=False)
class AugmentedSystem:
    A_hat: np.ndarray
    b_hat: np.ndarray
    S_hat: np.ndarray
    n_J: int
    omega: int
    output_map: np.ndarray | None = None  # x_N = output_map @ (x_hat, u_hat)

    @property
    def n_hat(self) -> int:
        return self.A_hat.shape[0]

    @property
    def Q_hat(self) -> np.ndarray:
        return self.S_hat[:-1, :-1]

    @property
    def h_hat(self) -> np.ndarray:
        return self.S_hat[:-1, -1]

    @property
    def r_hat(self) -> float:
        return float(self.S_hat[-1, -1])

    @property
    def J(self) -> np.ndarray:
        return self.A_hat[: self.n_J, : self.n_J]

    @property
    def b_J(self) -> np.ndarray:
        if self.omega == 0:
            return self.b_hat
        return self.A_hat[: self.n_J, self.n_J]


def augmented_dynamics(J, b_J, omega) -> tuple[np.ndarray, np.ndarray]:
    n_J = J.shape[0]
    if omega == 0:
        return np.array(J, dtype=float), np.array(b_J, dtype=float)
    n_hat = n_J + omega
    A_hat = np.zeros((n_hat, n_hat))
    A_hat[:n_J, :n_J] = J
    A_hat[:n_J, n_J] = b_J
    for i in range(omega - 1):
        A_hat[n_J + i, n_J + i + 1] = 1.0
    b_hat = np.zeros(n_hat)
    b_hat[-1] = 1.0
    return A_hat, b_hat


def transformed_cost(blocks: CostBlocks, b_N, K) -> np.ndarray:
    """Block formula for ``S_hat`` in terms of the partition of ``S``."""
    Q_J, Q_JN, Q_N, h_J, h_N, r = (blocks.Q_J, blocks.Q_JN, blocks.Q_N,
                                   blocks.h_J, blocks.h_N, blocks.r)
    n_J, omega = Q_J.shape[0], K.shape[1]
    S_hat = np.zeros((n_J + omega + 1, n_J + omega + 1))
    j, o = n_J, n_J + 1
    S_hat[:j, :j] = Q_J
    S_hat[:j, j] = h_J - Q_JN @ b_N
    S_hat[:j, o:] = -Q_JN @ K
    S_hat[j, j] = r + b_N @ Q_N @ b_N - 2.0 * h_N @ b_N
    S_hat[j, o:] = (b_N @ Q_N - h_N) @ K
    S_hat[o:, o:] = K.T @ Q_N @ K
    # lower triangle by symmetry
    S_hat[j, :j] = S_hat[:j, j]
    S_hat[o:, :j] = S_hat[:j, o:].T
    S_hat[o:, j] = S_hat[j, o:]
    return S_hat


def build_augmented(
    sys: QwfSystem, weights: CostWeights, basis: ConsistencyBasis | None = None,
    tol: Tolerances | None = None,
) -> AugmentedSystem:
    """Augmented pair ``(A_hat, b_hat)``, output map and transformed weight.

    ``S_hat`` is assembled from the block formula and cross-checked against
    the congruence ``M' S M``.
    """
    tol = resolve(tol)
    if weights.n != sys.n:
        raise DimensionError(f"S must be {(sys.n + 1,) * 2}, got {weights.S.shape}")
    if basis is None:
        basis = consistency_basis(sys, tol=tol)
    omega = basis.omega
    A_hat, b_hat = augmented_dynamics(sys.J, sys.b_J, omega)
    S_hat = transformed_cost(weights.blocks(sys.n_J), sys.b_N, basis.K)
    M = congruence_matrix(sys, basis)
    S_cong = M.T @ weights.S @ M
    scale = max(1.0, np.linalg.norm(weights.S, 2) * np.linalg.norm(M, 2) ** 2)
    if np.max(np.abs(S_hat - S_cong)) > tol.symmetry * scale:
        raise InternalConsistencyError("block formula for S_hat disagrees with M' S M")
    output_map = -np.column_stack([np.zeros((sys.n_N, sys.n_J)), sys.b_N, basis.K]) \
        if sys.n_N else np.zeros((0, sys.n_J + omega + 1))
    return AugmentedSystem(A_hat=A_hat, b_hat=b_hat, S_hat=S_hat, n_J=sys.n_J,
                           omega=omega, output_map=output_map)


@dataclass(frozen=True)
class AssumptionReport:
    a1_psd: bool
    a2_stabilizable: bool
    a3_rhat_positive: bool
    a4_observable: bool
    a5_rank: bool
    diagnostics: dict = field(default_factory=dict)

    @property
    def basic(self) -> bool:
        """A1-A3: the value function is a finite quadratic form."""
        return self.a1_psd and self.a2_stabilizable and self.a3_rhat_positive

    @property
    def definite(self) -> bool:
        """A1-A5: the value function is positive definite."""
        return self.basic and self.a4_observable and self.a5_rank

    def failures(self, which=("a1_psd", "a2_stabilizable", "a3_rhat_positive")) -> list[str]:
        return [name for name in which if not getattr(self, name)]

    def to_dict(self) -> dict:
        return {
            "A1_S_hat_psd": self.a1_psd,
            "A2_stabilizable": self.a2_stabilizable,
            "A3_r_hat_positive": self.a3_rhat_positive,
            "A4_observable": self.a4_observable,
            "A5_rank_condition": self.a5_rank,
            "diagnostics": self.diagnostics,
        }


def check_assumptions(
    aug: AugmentedSystem, sys: QwfSystem | None = None, tol: Tolerances | None = None
) -> AssumptionReport:
    """Evaluate assumptions A1-A5 from ``S_hat`` and ``A_hat``.

    Stabilizability is tested on ``(J, b_J)`` as recovered from ``A_hat``;
    when ``sys`` is given its ``(J, b_J)`` must coincide.
    """
    tol = resolve(tol)
    S_hat = aug.S_hat
    lam_min = min_eig_sym(S_hat)
    a1 = lam_min >= -tol.psd * max(1.0, np.linalg.norm(S_hat, 2))

    J, b_J = aug.J, aug.b_J
    if sys is not None and (not np.array_equal(J, sys.J) or not np.array_equal(b_J, sys.b_J)):
        raise ValueError("augmented system was not built from this system")
    a2, uncontrollable = hautus_stabilizable(J, b_J, tol.rank, tol.boundary)

    r_hat = aug.r_hat
    a3 = r_hat > tol.r_hat

    a4, unobservable = hautus_observable(aug.A_hat, aug.Q_hat, tol.rank)

    rank_S = numerical_rank(S_hat, tol.rank)
    rank_Q = numerical_rank(aug.Q_hat, tol.rank)
    a5 = rank_S == rank_Q + 1

    diagnostics = {
        "S_hat_min_eigenvalue": lam_min,
        "uncontrollable_modes": [str(z) for z in uncontrollable],
        "r_hat": r_hat,
        "unobservable_modes": [str(z) for z in unobservable],
        "rank_S_hat": rank_S,
        "rank_Q_hat": rank_Q,
    }
    return AssumptionReport(bool(a1), bool(a2), bool(a3), bool(a4), bool(a5), diagnostics)


def behavioural_stabilizability(sys: QwfSystem, tol: Tolerances | None = None) -> bool:
    """Hautus test ``rk[lam I - J, b_J] = n_J`` for all ``Re lam >= 0``.

    For ``omega > 0`` the verdict must coincide with stabilizability of the
    augmented pair ``(A_hat, b_hat)``; a disagreement raises.
    """
    tol = resolve(tol)
    basis = consistency_basis(sys, tol=tol)
    verdict, _ = hautus_stabilizable(sys.J, sys.b_J, tol.rank, tol.boundary)
    if basis.omega > 0:
        A_hat, b_hat = augmented_dynamics(sys.J, sys.b_J, basis.omega)
        other, _ = hautus_stabilizable(A_hat, b_hat, tol.rank, tol.boundary)
        if other != verdict:
            raise InternalConsistencyError(
                "stabilizability of (J, b_J) and of the augmented pair disagree"
            )
    return verdict
