"""Small dense linear-algebra helpers shared by the modules."""

from __future__ import annotations

import numpy as np


def numerical_rank(M: np.ndarray, rtol: float) -> int:
    M = np.atleast_2d(M)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0] * max(M.shape)))


def hautus_controllable_at(A, B, lam, rtol) -> bool:
    n = A.shape[0]
    M = np.hstack([lam * np.eye(n) - A, B.reshape(n, -1)])
    return numerical_rank(M, rtol) == n


def hautus_stabilizable(A, B, rtol, boundary) -> tuple[bool, list[complex]]:
    """Hautus test over eigenvalues with ``Re >= -boundary``.

    Returns the verdict and the list of uncontrollable eigenvalues found.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    if n == 0:
        return True, []
    bad = []
    for lam in np.linalg.eigvals(A):
        if lam.real >= -boundary and not hautus_controllable_at(A, B, lam, rtol):
            bad.append(complex(lam))
    return not bad, bad


def hautus_observable(A, C, rtol) -> tuple[bool, list[complex]]:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    if n == 0:
        return True, []
    C = np.asarray(C, dtype=float).reshape(-1, n)
    bad = []
    for lam in np.linalg.eigvals(A):
        M = np.vstack([lam * np.eye(n) - A, C])
        if numerical_rank(M, rtol) < n:
            bad.append(complex(lam))
    return not bad, bad


def min_eig_sym(M: np.ndarray) -> float:
    if M.size == 0:
        return np.inf
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def block_diag(*blocks: np.ndarray) -> np.ndarray:
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    i = j = 0
    for b in blocks:
        out[i:i + b.shape[0], j:j + b.shape[1]] = b
        i += b.shape[0]
        j += b.shape[1]
    return out
