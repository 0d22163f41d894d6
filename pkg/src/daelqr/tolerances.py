"""Global tolerance bundle.

All numerical decisions (ranks, zero tests, nilpotency, integrator
accuracy) read their thresholds from a :class:`Tolerances` instance.
The environment variable ``DAELQR_TOL`` may hold a JSON object whose
keys override individual fields, e.g. ``DAELQR_TOL='{"rank": 1e-9}'``.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass

ENV_VAR = "DAELQR_TOL"


@dataclass(frozen=True)
class Tolerances:
    # structural zero tests, relative to max(1, norm products)
    nilpotency: float = 1e-12
    zero_vector: float = 1e-12
    # numerical rank: sigma <= rank * sigma_max * max(rows, cols)
    rank: float = 1e-10
    # x0 in im F: ||(I - F F^+) x0|| <= consistency * max(1, ||x0||)
    consistency: float = 1e-9
    # matching of F^+ x0 against u(0), ..., u^(omega-1)(0), absolute
    feasibility: float = 1e-8
    # U^0 membership, absolute
    u0: float = 1e-10
    # eigenvalues with Re >= -boundary count as closed right half-plane
    boundary: float = 1e-10
    psd: float = 1e-10
    r_hat: float = 1e-12
    symmetry: float = 1e-12
    det_sample: float = 1e-10
    ode_rtol: float = 1e-9
    ode_atol: float = 1e-12
    dre_rtol: float = 1e-10
    dre_atol: float = 1e-13
    p_inf_derivative: float = 1e-10
    p_inf_t_max: float = 1e3

    def replace(self, **changes: float) -> "Tolerances":
        return dataclasses.replace(self, **changes)


def default_tolerances() -> Tolerances:
    """Defaults, with any ``DAELQR_TOL`` overrides applied."""
    raw = os.environ.get(ENV_VAR)
    if not raw:
        return Tolerances()
    try:
        overrides = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{ENV_VAR} is not valid JSON: {exc}") from None
    if not isinstance(overrides, dict):
        raise ValueError(f"{ENV_VAR} must be a JSON object")
    known = {f.name for f in dataclasses.fields(Tolerances)}
    unknown = set(overrides) - known
    if unknown:
        raise ValueError(f"{ENV_VAR}: unknown tolerance(s) {sorted(unknown)}")
    return Tolerances(**{k: float(v) for k, v in overrides.items()})


def resolve(tol: Tolerances | None) -> Tolerances:
    return default_tolerances() if tol is None else tol
