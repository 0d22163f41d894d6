"""Piecewise-polynomial scalar inputs with exact derivatives.

A signal is a list of segments ``(t_start, coeffs)``; on
``[t_start, next t_start)`` it equals ``sum_j coeffs[j] * (t - t_start)**j``.
The last segment extends to infinity.  At a breakpoint the right limit is
returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

CONTINUITY_RTOL = 1e-10


def _derivative_table(c: np.ndarray, k: int, dt: np.ndarray) -> np.ndarray:
    """Rows ``d^j/dt^j p(dt)`` for ``j = 0..k``; ``c`` ascending."""
    out = np.zeros((k + 1,) + np.shape(dt))
    for j in range(k + 1):
        if c.size:
            out[j] = P.polyval(dt, c)
        c = P.polyder(c) if c.size > 1 else np.zeros(0)
    return out


def _hermite_piece(left: np.ndarray, right: np.ndarray, h: float) -> np.ndarray:
    """Ascending coefficients of the degree ``2q+1`` polynomial on ``[0, h]``
    with derivatives ``left`` at 0 and ``right`` at ``h``.

    Solved in the scaled variable ``s = t / h`` so the linear system does not
    depend on ``h``; the lower ``q + 1`` coefficients are exact.
    """
    q = left.size - 1
    scale = h ** np.arange(q + 1)
    lo = left * scale / np.array([math.factorial(j) for j in range(q + 1)])
    k = np.arange(2 * q + 2)
    # falling[j, k] = k! / (k - j)!, the j-th derivative of s^k at s = 1
    falling = np.array([[math.perm(kk, j) for kk in k] for j in range(q + 1)], dtype=float)
    rhs = right * scale - falling[:, : q + 1] @ lo
    hi = np.linalg.solve(falling[:, q + 1:], rhs)
    return np.concatenate([lo, hi]) / h ** k


@dataclass(frozen=True, eq=False)
class ControlSignal:
    """Scalar input ``u`` in ``W^{m,1}_loc`` given piecewise by polynomials.

    ``smoothness_order`` ``m`` means ``u`` is ``C^{m-1}`` across every
    interior breakpoint, so derivatives up to order ``m`` are meaningful.
    If omitted it is detected from the coefficients.  A single segment is
    an entire function and admits derivatives of any order.
    """

    breakpoints: tuple[float, ...]
    coefficients: tuple[np.ndarray, ...]
    smoothness_order: int | None = None

    def __post_init__(self):
        bps = tuple(float(t) for t in self.breakpoints)
        coeffs = tuple(np.atleast_1d(np.asarray(c, dtype=float)).copy() for c in self.coefficients)
        if not bps:
            raise ValueError("a signal needs at least one segment")
        if len(bps) != len(coeffs):
            raise ValueError("one coefficient list per breakpoint is required")
        if bps[0] != 0.0:
            raise ValueError("the first breakpoint must be 0")
        if any(b <= a for a, b in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        for c in coeffs:
            c.setflags(write=False)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "coefficients", coeffs)

        detected = self._detect_smoothness()
        m = self.smoothness_order
        if m is None:
            m = detected
        elif m < 0:
            raise ValueError("smoothness_order must be nonnegative")
        elif m > detected:
            raise ValueError(
                f"signal is only C^{detected - 1} at its breakpoints, "
                f"smoothness_order {m} claimed"
            )
        object.__setattr__(self, "smoothness_order", int(m))

    # -- construction -----------------------------------------------------

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> "ControlSignal":
        """A single polynomial ``sum_j coeffs[j] t^j`` on ``[0, inf)``."""
        return cls((0.0,), (np.asarray(coeffs, dtype=float),))

    @classmethod
    def constant(cls, value: float) -> "ControlSignal":
        return cls.polynomial([value])

    @classmethod
    def from_segments(cls, segments, smoothness_order=None) -> "ControlSignal":
        """Build from ``[{"t_start": t, "coeffs": [c0, c1, ...]}, ...]``."""
        segs = sorted(segments, key=lambda s: float(s["t_start"]))
        return cls(
            tuple(s["t_start"] for s in segs),
            tuple(np.asarray(s["coeffs"], dtype=float) for s in segs),
            smoothness_order,
        )

    @classmethod
    def from_derivatives(
        cls,
        knots: Sequence[float],
        derivatives: Callable[[float], Sequence[float]],
    ) -> "ControlSignal":
        """Piecewise Hermite interpolant of a smooth function.

        ``derivatives(t)`` returns ``(f(t), f'(t), ..., f^(q)(t))``.  Each
        piece matches these at both of its knots, so the result is ``C^q``
        with pieces of degree ``2q + 1``.  The last piece is extrapolated
        beyond the last knot.
        """
        knots = np.asarray(knots, dtype=float)
        if knots[0] != 0.0 or knots.size < 2:
            raise ValueError("knots must start at 0 and contain at least two points")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        values = np.array([np.asarray(derivatives(t), dtype=float) for t in knots])
        q = values.shape[1] - 1
        coeffs = tuple(
            _hermite_piece(values[i], values[i + 1], knots[i + 1] - knots[i])
            for i in range(knots.size - 1)
        )
        return cls(tuple(knots[:-1]), coeffs, q + 1)

    # -- interface --------------------------------------------------------

    def to_segments(self) -> list[dict]:
        return [
            {"t_start": t, "coeffs": [float(x) for x in c]}
            for t, c in zip(self.breakpoints, self.coefficients)
        ]

    @property
    def degree(self) -> int:
        return max(c.size for c in self.coefficients) - 1

    @property
    def max_order(self) -> float:
        """Highest derivative order that is a weak derivative of ``u``."""
        return math.inf if len(self.breakpoints) == 1 else self.smoothness_order

    def segment_index(self, t) -> np.ndarray:
        return np.searchsorted(self.breakpoints, t, side="right") - 1

    def derivatives(self, t, k: int) -> np.ndarray:
        """``(u(t), ..., u^(k)(t))``; shape ``(k+1,)`` or ``(len(t), k+1)``."""
        if k < 0:
            raise ValueError("derivative order must be nonnegative")
        if k > self.max_order:
            raise ValueError(
                f"derivative order {k} exceeds the signal's smoothness order "
                f"{self.smoothness_order}"
            )
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0):
            raise ValueError("signals are defined for t >= 0 only")
        flat = np.atleast_1d(t_arr)
        idx = self.segment_index(flat)
        out = np.empty((flat.size, k + 1))
        for i in np.unique(idx):
            mask = idx == i
            dt = flat[mask] - self.breakpoints[i]
            out[mask] = _derivative_table(self.coefficients[i], k, dt).T
        return out[0] if t_arr.ndim == 0 else out

    def __call__(self, t):
        d = self.derivatives(t, 0)
        return d[..., 0] if np.ndim(t) else float(d[0])

    def _detect_smoothness(self) -> int:
        cap = self.degree + 1
        if len(self.breakpoints) == 1:
            return cap
        for j in range(cap + 1):
            for i in range(1, len(self.breakpoints)):
                h = self.breakpoints[i] - self.breakpoints[i - 1]
                left = _derivative_table(self.coefficients[i - 1], j, np.float64(h))[j]
                right = _derivative_table(self.coefficients[i], j, np.float64(0.0))[j]
                if abs(left - right) > CONTINUITY_RTOL * max(1.0, abs(left), abs(right)):
                    return j
        return cap + 1


def eval_derivatives(u: ControlSignal, t: float, k: int) -> np.ndarray:
    """``(u(t), u'(t), ..., u^(k)(t))`` from the polynomial coefficients."""
    return u.derivatives(float(t), k)


def is_in_u0(u: ControlSignal, omega: int, atol: float = 1e-10) -> bool:
    """True iff ``u(0) = ... = u^(omega-1)(0) = 0``.

    For ``omega = 0`` the condition is empty and every signal qualifies.
    """
    if omega <= 0:
        return True
    return bool(np.all(np.abs(u.derivatives(0.0, omega - 1)) <= atol))
