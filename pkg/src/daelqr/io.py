"""JSON system files and CSV trajectory export.

A system file is a JSON object::

    {"n_J": 0, "n_N": 3, "J": [], "N": [[0, 1, 0], [0, 0, 1], [0, 0, 0]],
     "b_J": [], "b_N": [0, 1, 0], "S": [[...], ...],
     "signal": [{"t_start": 0, "coeffs": [1, 0, 2]}],   # optional
     "x0": [1, 0, 0]}                                  # optional
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .augmentation import CostWeights
from .exceptions import DAELQRError, DimensionError
from .qwf import QwfSystem
from .signal import ControlSignal
from .solution import Trajectory

REQUIRED_KEYS = ("n_J", "n_N", "J", "N", "b_J", "b_N", "S")


class SystemFileError(DAELQRError, ValueError):
    """The file is not valid JSON or does not follow the system file layout."""


@dataclass(frozen=True, eq=False)
class SystemFile:
    system: QwfSystem
    weights: CostWeights
    signal: ControlSignal | None = None
    x0: np.ndarray | None = None


def _matrix(value, rows, name):
    if rows == 0:
        if value not in ([], [[]]):
            raise DimensionError(f"{name} must be empty, got {value!r}")
        return np.zeros((0, 0))
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SystemFileError(f"{name}: not a numeric array of arrays ({exc})") from None
    if M.shape != (rows, rows):
        raise DimensionError(f"{name} must be {rows}x{rows}, got shape {M.shape}")
    return M


def _vector(value, length, name):
    try:
        v = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SystemFileError(f"{name}: not a numeric array ({exc})") from None
    if v.shape != (length,):
        raise DimensionError(f"{name} must have length {length}, got shape {v.shape}")
    return v


def parse_system(doc: dict) -> SystemFile:
    if not isinstance(doc, dict):
        raise SystemFileError("top level must be a JSON object")
    missing = [k for k in REQUIRED_KEYS if k not in doc]
    if missing:
        raise SystemFileError(f"missing keys: {', '.join(missing)}")
    n_J, n_N = doc["n_J"], doc["n_N"]
    for name, v in (("n_J", n_J), ("n_N", n_N)):
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise SystemFileError(f"{name} must be a nonnegative integer, got {v!r}")
    n = n_J + n_N
    system = QwfSystem(
        _matrix(doc["J"], n_J, "J"), _matrix(doc["N"], n_N, "N"),
        _vector(doc["b_J"], n_J, "b_J"), _vector(doc["b_N"], n_N, "b_N"),
    )
    try:
        S = np.array(doc["S"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise SystemFileError(f"S: not a numeric array of arrays ({exc})") from None
    if S.shape != (n + 1, n + 1):
        raise DimensionError(f"S must be {n + 1}x{n + 1}, got shape {S.shape}")
    weights = CostWeights(S)

    signal = None
    if doc.get("signal") is not None:
        try:
            signal = ControlSignal.from_segments(doc["signal"])
        except (KeyError, TypeError) as exc:
            raise SystemFileError(f"signal: malformed segment list ({exc!r})") from None
    x0 = _vector(doc["x0"], n, "x0") if doc.get("x0") is not None else None
    return SystemFile(system, weights, signal, x0)


def loads_system(text: str) -> SystemFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SystemFileError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_system(doc)


def load_system(path) -> SystemFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SystemFileError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return loads_system(text)
    except SystemFileError as exc:
        raise SystemFileError(f"{path}: {exc}") from None


def system_to_dict(sf: SystemFile) -> dict:
    sys = sf.system
    doc = {
        "n_J": sys.n_J,
        "n_N": sys.n_N,
        "J": sys.J.tolist(),
        "N": sys.N.tolist(),
        "b_J": sys.b_J.tolist(),
        "b_N": sys.b_N.tolist(),
        "S": sf.weights.S.tolist(),
    }
    if sf.signal is not None:
        doc["signal"] = sf.signal.to_segments()
    if sf.x0 is not None:
        doc["x0"] = np.asarray(sf.x0, dtype=float).tolist()
    return doc


def dumps_system(sf: SystemFile) -> str:
    # json writes floats with repr, which round-trips doubles exactly
    return json.dumps(system_to_dict(sf), indent=2)


def dump_system(sf: SystemFile, path) -> None:
    Path(path).write_text(dumps_system(sf) + "\n")


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Columns ``t, x_1, ..., x_n, u`` with 17 significant digits."""
    n = traj.states.shape[1]
    header = ",".join(["t"] + [f"x_{i + 1}" for i in range(n)] + ["u"])
    data = np.column_stack([traj.grid, traj.states, traj.input_values])
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")


def read_trajectory_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def write_riccati_csv(grid, P_values, path) -> None:
    """``t`` followed by the row-major entries of ``P(t)``."""
    P_values = np.asarray(P_values)
    n = P_values.shape[1]
    header = ",".join(["t"] + [f"P_{i + 1}_{j + 1}" for i in range(n) for j in range(n)])
    data = np.column_stack([grid, P_values.reshape(len(grid), -1)])
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")
