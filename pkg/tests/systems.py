"""Random and reference systems shared by the test modules."""

import math

import numpy as np
from numpy.polynomial import Polynomial

from daelqr import ControlSignal, CostWeights, QwfSystem, consistency_basis

SQRT2 = np.sqrt(2.0)


def shift(n):
    return np.eye(n, k=1)


def example_system():
    """Three-dimensional purely algebraic system with input index 1."""
    return QwfSystem(np.zeros((0, 0)), shift(3), [], [0.0, 1.0, 0.0])


def example_weights():
    return CostWeights(np.eye(4))


def example_optimal(t, x10):
    """Closed-form infinite-horizon optimal state and control."""
    e = np.exp(-SQRT2 * np.asarray(t)) * x10
    return np.column_stack([-SQRT2 * e, e, np.zeros_like(e)]), -e


def random_nilpotent(rng, n):
    """``V U V^T`` with ``U`` a direct sum of scaled shift blocks, ``V`` orthogonal."""
    if n == 0:
        return np.zeros((0, 0))
    sizes = []
    left = n
    while left:
        s = int(rng.integers(1, left + 1))
        sizes.append(s)
        left -= s
    U = np.zeros((n, n))
    i = 0
    for s in sizes:
        for k in range(s - 1):
            U[i + k, i + k + 1] = rng.uniform(0.5, 1.5) * rng.choice([-1, 1])
        i += s
    V, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return V @ U @ V.T


def random_system(rng, max_nJ=4, max_nN=5, min_n=1, unstabilizable=False):
    """Random system; with ``unstabilizable`` an unstable mode of ``J`` is
    made uncontrollable (requires ``n_J >= 1``)."""
    lo = 1 if unstabilizable else 0
    while True:
        n_J = int(rng.integers(lo, max_nJ + 1))
        n_N = int(rng.integers(0, max_nN + 1))
        if n_J + n_N >= min_n:
            break
    if unstabilizable:
        V = rng.normal(size=(n_J, n_J)) + 2 * np.eye(n_J)
        d = rng.uniform(-2.0, 1.0, size=n_J)
        d[0] = rng.uniform(0.2, 1.5)
        J = V @ np.diag(d) @ np.linalg.inv(V)
        c = rng.normal(size=n_J)
        c[0] = 0.0
        b_J = V @ c
    else:
        J = rng.normal(size=(n_J, n_J)) * 0.7
        b_J = rng.normal(size=n_J)
    while True:
        N, b_N = random_nilpotent(rng, n_N), rng.normal(size=n_N)
        if _kalman_condition(N, b_N) <= MAX_KALMAN_CONDITION:
            return QwfSystem(J, N, b_J, b_N)


# Draws whose Krylov matrix [b_N, N b_N, ..., N^omega b_N] is badly
# conditioned are redrawn.  Near rank deficiency makes the zero-vector and
# rank tolerances legitimately disagree, and a small singular value of G
# inflates the feedback row and the simulation error by its reciprocal.
MAX_KALMAN_CONDITION = 1e4


def _kalman_condition(N, b_N):
    if len(b_N) == 0:
        return 1.0
    cols, v = [b_N], b_N
    for _ in range(len(b_N)):
        v = N @ v
        if np.linalg.norm(v) <= 1e-12 * max(1.0, np.linalg.norm(N, 2) ** len(cols) * np.linalg.norm(b_N)):
            break
        cols.append(v)
    return np.linalg.cond(np.column_stack(cols))


def random_psd_weights(rng, n, eps=0.1, singular=False):
    """``L L' + eps I`` (positive definite), or a rank-``n`` Gram matrix."""
    if singular:
        L = rng.normal(size=(n + 1, n)) / np.sqrt(n + 1)
        return CostWeights(L @ L.T)
    L = rng.normal(size=(n + 1, n + 1)) / np.sqrt(n + 1)
    return CostWeights(L @ L.T + eps * np.eye(n + 1))


def matched_input(sys, x0, T=2.0, pieces=8, extra=2):
    """Smooth piecewise input with ``u^(i)(0)`` equal to ``F^+ x0`` for ``i < omega``.

    Hermite fit of ``sin(2t + 0.3)`` plus a correcting polynomial; the fit is
    ``C^(omega + extra)`` so every derivative the solver needs is continuous.
    """
    basis = consistency_basis(sys)
    omega = basis.omega
    params = basis.F_dagger @ np.asarray(x0, dtype=float)
    q = omega + extra

    def g(t, j):
        return 2.0**j * math.sin(2.0 * t + 0.3 + j * math.pi / 2)

    corr = Polynomial([(params[sys.n_J + i] - g(0.0, i)) / math.factorial(i) for i in range(omega)] or [0.0])

    def derivs(t):
        return [g(t, j) + corr.deriv(j)(t) for j in range(q + 1)]

    return ControlSignal.from_derivatives(np.linspace(0.0, T, pieces + 1), derivs)
