"""Systems in quasi-Weierstrass form.

A system ``d/dt E x = A x + b u`` with

    E = [[I, 0], [0, N]],   A = [[J, 0], [0, I]],   b = (b_J, b_N)

and nilpotent ``N``.  This module provides the system type, its input
index, the Kalman-like matrix ``K = [N b_N, ..., N^omega b_N]`` and the
consistency space ``im F`` with ``F = blockdiag(I, -K)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._linalg import block_diag, numerical_rank
from .exceptions import DimensionError, InternalConsistencyError, NotNilpotentError
from .tolerances import Tolerances, resolve


def _as_matrix(a, name) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return np.zeros((0, 0))
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {a.shape}")
    return a


def _as_vector(a, name) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim > 1:
        if 1 not in a.shape and a.size:
            raise DimensionError(f"{name} must be a vector, got shape {a.shape}")
        a = a.reshape(-1)
    return np.atleast_1d(a) if a.size else np.zeros(0)


@dataclass(frozen=True, eq=False)
class QwfSystem:
    """The quadruple ``(J, N, b_J, b_N)``.

    Dimensions are inferred from ``J`` and ``N``; an empty ``J`` is a purely
    algebraic system and an empty ``N`` an ordinary differential equation.
    """

    J: np.ndarray
    N: np.ndarray
    b_J: np.ndarray
    b_N: np.ndarray

    def __post_init__(self):
        J = _as_matrix(self.J, "J")
        N = _as_matrix(self.N, "N")
        b_J = _as_vector(self.b_J, "b_J")
        b_N = _as_vector(self.b_N, "b_N")
        if b_J.shape[0] != J.shape[0]:
            raise DimensionError(f"b_J has length {b_J.shape[0]}, expected {J.shape[0]}")
        if b_N.shape[0] != N.shape[0]:
            raise DimensionError(f"b_N has length {b_N.shape[0]}, expected {N.shape[0]}")
        if J.shape[0] + N.shape[0] < 1:
            raise DimensionError("system has total dimension 0")
        for name, value in (("J", J), ("N", N), ("b_J", b_J), ("b_N", b_N)):
            if not np.all(np.isfinite(value)):
                raise DimensionError(f"{name} contains non-finite entries")
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def n_J(self) -> int:
        return self.J.shape[0]

    @property
    def n_N(self) -> int:
        return self.N.shape[0]

    @property
    def n(self) -> int:
        return self.n_J + self.n_N

    @cached_property
    def E(self) -> np.ndarray:
        return block_diag(np.eye(self.n_J), self.N)

    @cached_property
    def A(self) -> np.ndarray:
        return block_diag(self.J, np.eye(self.n_N))

    @cached_property
    def b(self) -> np.ndarray:
        return np.concatenate([self.b_J, self.b_N])

    def split(self, x):
        """Partition a state (or a stack of states) into ``(x_J, x_N)``."""
        x = np.asarray(x, dtype=float)
        return x[..., : self.n_J], x[..., self.n_J:]


@dataclass(frozen=True)
class ValidationReport:
    checks: dict[str, bool]
    nilpotency_index: int
    details: dict[str, str] = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "checks": dict(self.checks),
            "nilpotency_index": self.nilpotency_index,
            "details": dict(self.details),
        }


def _is_zero_power(P, N_norm, i, tol) -> bool:
    return np.linalg.norm(P, 2) <= tol * max(1.0, N_norm**i)


def nilpotency_index(N, tol: Tolerances | None = None) -> int | None:
    """Smallest ``i`` with ``N^i = 0`` (scale-aware), or None if none <= dim."""
    tol = resolve(tol)
    N = np.atleast_2d(np.asarray(N, dtype=float))
    n = N.shape[0]
    if N.size == 0:
        return 0
    N_norm = np.linalg.norm(N, 2)
    P = np.eye(n)
    for i in range(1, n + 1):
        P = P @ N
        if _is_zero_power(P, N_norm, i, tol.nilpotency):
            return i
    return None


def validate_qwf(sys: QwfSystem, tol: Tolerances | None = None) -> ValidationReport:
    """Check the standing assumptions on a quasi-Weierstrass system.

    Raises NotNilpotentError when ``N^{n_N}`` is not zero within the
    nilpotency tolerance.  Dimension mismatches are rejected earlier, when
    the :class:`QwfSystem` is built.
    """
    tol = resolve(tol)
    checks: dict[str, bool] = {"dimensions": True, "total_dimension": sys.n >= 1}
    details: dict[str, str] = {}

    index = nilpotency_index(sys.N, tol)
    checks["nilpotent"] = index is not None
    if index is None:
        raise NotNilpotentError(
            f"N is not nilpotent: ||N^{sys.n_N}|| exceeds the nilpotency tolerance"
        )

    # det(lam E - A) = det(lam I - J) * (-1)^{n_N}; sample one lam to confirm
    s = 1.0 + np.linalg.norm(sys.J, 2) if sys.n_J else 1.0
    lam = s * np.exp(0.7j)
    M = lam * sys.E - sys.A
    d = abs(np.linalg.det(M))
    scale = np.prod(np.linalg.norm(M, axis=0))
    checks["regular_pencil"] = bool(d > tol.det_sample * scale)
    details["regular_pencil"] = f"|det(lam E - A)| = {d:.3e} at lam = {lam:.3f}"
    details["nilpotency_index"] = str(index)
    return ValidationReport(checks=checks, nilpotency_index=index, details=details)


def input_index(sys: QwfSystem, tol: Tolerances | None = None) -> int:
    """Largest ``i`` with ``N^i b_N != 0``, or 0 when ``N b_N = 0``.

    ``N^i b_N`` counts as zero when its norm is at most
    ``zero_vector * max(1, ||N||^i ||b_N||)``.
    """
    tol = resolve(tol)
    validate_qwf(sys, tol)
    return _input_index(sys, tol)


def _input_index(sys, tol) -> int:
    if sys.n_N == 0:
        return 0
    N_norm = np.linalg.norm(sys.N, 2)
    b_norm = np.linalg.norm(sys.b_N)
    v = sys.b_N.copy()
    omega = 0
    for i in range(1, sys.n_N + 1):
        v = sys.N @ v
        if np.linalg.norm(v) > tol.zero_vector * max(1.0, N_norm**i * b_norm):
            omega = i
    return omega


def kalman_matrix(sys: QwfSystem, omega: int) -> np.ndarray:
    """``K = [N b_N, ..., N^omega b_N]``; an ``n_N x 0`` matrix for omega 0."""
    cols = []
    v = sys.b_N.copy()
    for _ in range(omega):
        v = sys.N @ v
        cols.append(v)
    if not cols:
        return np.zeros((sys.n_N, 0))
    return np.column_stack(cols)


@dataclass(frozen=True, eq=False)
class ConsistencyBasis:
    omega: int
    K: np.ndarray
    F: np.ndarray
    F_dagger: np.ndarray

    @property
    def dim(self) -> int:
        return self.F.shape[1]

    @cached_property
    def projector(self) -> np.ndarray:
        return self.F @ self.F_dagger


def consistency_basis(
    sys: QwfSystem, F_dagger=None, tol: Tolerances | None = None
) -> ConsistencyBasis:
    """Kalman-like matrix, basis ``F`` of the consistency space, left inverse.

    ``F_dagger`` defaults to the Moore-Penrose pseudoinverse of ``F``; any
    other left inverse may be passed and is checked.
    """
    tol = resolve(tol)
    validate_qwf(sys, tol)
    omega = _input_index(sys, tol)
    K = kalman_matrix(sys, omega)
    rank = numerical_rank(K, tol.rank)
    if rank != omega:
        raise InternalConsistencyError(
            f"Kalman-like matrix has rank {rank}, expected omega = {omega}"
        )
    F = block_diag(np.eye(sys.n_J), -K)
    if F_dagger is None:
        F_dagger = np.linalg.pinv(F)
    else:
        F_dagger = np.asarray(F_dagger, dtype=float)
        if F_dagger.shape != (F.shape[1], F.shape[0]):
            raise DimensionError(
                f"F_dagger must have shape {(F.shape[1], F.shape[0])}, got {F_dagger.shape}"
            )
        err = np.linalg.norm(F_dagger @ F - np.eye(F.shape[1]))
        if err > 1e-10 * max(1.0, np.linalg.norm(F_dagger) * np.linalg.norm(F)):
            raise ValueError(f"F_dagger is not a left inverse of F (||F^+F - I|| = {err:.2e})")
    return ConsistencyBasis(omega=omega, K=K, F=F, F_dagger=F_dagger)


@dataclass(frozen=True)
class ConsistencyCheck:
    consistent: bool
    residual: float
    parameters: np.ndarray | None

    def __bool__(self) -> bool:
        return self.consistent


def is_consistent(
    sys: QwfSystem, x0, basis: ConsistencyBasis | None = None, tol: Tolerances | None = None
) -> ConsistencyCheck:
    """Test ``x0`` in ``im F``.

    On success ``parameters`` holds ``F^+ x0``, i.e. the free data
    ``(x_J(0), u(0), ..., u^(omega-1)(0))``.
    """
    tol = resolve(tol)
    if basis is None:
        basis = consistency_basis(sys, tol=tol)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != sys.n:
        raise DimensionError(f"x0 has length {x0.shape[0]}, expected {sys.n}")
    z = basis.F_dagger @ x0
    residual = float(np.linalg.norm(x0 - basis.F @ z))
    ok = residual <= tol.consistency * max(1.0, float(np.linalg.norm(x0)))
    return ConsistencyCheck(consistent=ok, residual=residual, parameters=z if ok else None)
