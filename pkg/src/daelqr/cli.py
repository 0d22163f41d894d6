"""Command-line driver.

Exit codes: 0 success, 1 other failure, 2 parse or usage error,
3 invalid system, 4 inconsistent initial value, 5 assumption failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

import numpy as np

from .augmentation import behavioural_stabilizability
from .control import (
    INFINITE_HORIZON_PLOT,
    LQProblem,
    augmented_embedding,
    left_inverse_variant,
    simulate_closed_loop,
)
from .exceptions import (
    AssumptionError,
    DAELQRError,
    DimensionError,
    InconsistentInitialValueError,
    NotNilpotentError,
)
from .io import SystemFileError, load_system, write_riccati_csv, write_trajectory_csv
from .qwf import validate_qwf
from .riccati import are_residual
from .solution import solve_dae, verify_solution

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_INCONSISTENT = 4
EXIT_ASSUMPTION = 5


class UsageError(DAELQRError, ValueError):
    pass


def _horizon(text: str) -> float:
    try:
        T = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not T > 0.0:
        raise argparse.ArgumentTypeError("horizon must lie in (0, inf]")
    return T


def _positive(text: str) -> float:
    v = float(text)
    if not (v > 0.0 and np.isfinite(v)):
        raise argparse.ArgumentTypeError("must be a positive finite number")
    return v


def _nonzero(text: str) -> float:
    v = float(text)
    if v == 0.0 or not np.isfinite(v):
        raise argparse.ArgumentTypeError("alpha must be a nonzero finite number")
    return v


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.replace(" ", "").split(",") if x], dtype=float)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(report: dict, out):
    out.write(json.dumps(_jsonable(report), indent=2) + "\n")


def _grid(T_end: float, dt: float | None) -> np.ndarray:
    if dt is None:
        return np.linspace(0.0, T_end, 501)
    steps = max(2, int(round(T_end / dt)))
    return np.linspace(0.0, T_end, steps + 1)


def _x0(args, sf) -> np.ndarray:
    x0 = args.x0 if args.x0 is not None else sf.x0
    if x0 is None:
        raise UsageError("no initial value: pass --x0 or add x0 to the system file")
    if x0.shape != (sf.system.n,):
        raise UsageError(f"x0 must have length {sf.system.n}, got {x0.size}")
    return x0


def _path_note(sys, omega, nilpotency) -> str:
    if sys.n_N == 0:
        return "classical LQR path, omega=0"
    if omega == 0:
        return "static algebraic part, x_N = -b_N u; LQR on (J, b_J), omega=0"
    note = f"augmented ODE path, omega={omega}"
    if nilpotency - 1 > omega:
        note += (f"; omega is smaller than nilpotency index - 1 = {nilpotency - 1}"
                 " because b_N does not excite the full nilpotent chain")
    return note


# -- subcommands ------------------------------------------------------------


def cmd_analyze(args, out) -> int:
    sf = load_system(args.system)
    sys = sf.system
    validation = validate_qwf(sys)
    problem = LQProblem(sys, sf.weights)
    basis, aug = problem.basis, problem.augmented
    report = {
        "validation": validation.to_dict(),
        "omega": basis.omega,
        "path": _path_note(sys, basis.omega, validation.nilpotency_index),
        "K": basis.K,
        "consistency_space_basis": basis.F.T,  # one row per basis vector
        "F_dagger": basis.F_dagger,
        "augmented": {"A_hat": aug.A_hat, "b_hat": aug.b_hat, "S_hat": aug.S_hat,
                      "n_hat": aug.n_hat},
        "assumptions": problem.assumptions.to_dict(),
        "behaviourally_stabilizable": behavioural_stabilizability(sys),
    }
    _emit(report, out)
    return EXIT_OK


def cmd_solve(args, out) -> int:
    sf = load_system(args.system)
    validate_qwf(sf.system)
    problem = LQProblem(sf.system, sf.weights)
    x0 = _x0(args, sf)
    T = args.horizon
    problem.initial_state(x0)
    problem.require_assumptions()
    T_end = INFINITE_HORIZON_PLOT if T == np.inf else T
    if args.t_end is not None:
        if args.t_end > T:
            raise UsageError("--t-end exceeds the horizon")
        T_end = args.t_end
    sol = problem.trajectory(x0, T, _grid(T_end, args.dt))
    P = problem.value_matrix(T)
    residuals = {
        "dae_residual_max": verify_solution(sf.system, sol.trajectory).max_residual,
        "grid_step": float(sol.trajectory.grid[1] - sol.trajectory.grid[0]),
    }
    if T == np.inf:
        residuals["are_residual"] = problem.p_infinity.are_residual
        residuals["p_infinity"] = problem.p_infinity.to_dict()
    else:
        residuals["are_residual_at_T"] = are_residual(problem.augmented, P)
    summary = {
        "horizon": T,
        "V_T": sol.value,
        "P_final_spectrum": np.linalg.eigvalsh(P) if P.size else [],
        "residuals": residuals,
    }
    if args.output:
        write_trajectory_csv(sol.trajectory, args.output)
        summary["trajectory_csv"] = args.output
    if args.summary:
        with open(args.summary, "w") as fh:
            _emit(summary, fh)
    _emit(summary, out)
    return EXIT_OK


def cmd_riccati(args, out) -> int:
    sf = load_system(args.system)
    validate_qwf(sf.system)
    problem = LQProblem(sf.system, sf.weights)
    problem.require_assumptions()
    if args.horizon == np.inf:
        pinf = problem.p_infinity
        _emit({"P_infinity": pinf.P, **pinf.to_dict()}, out)
        return EXIT_OK
    sol = problem.riccati(args.horizon)
    if args.output:
        write_riccati_csv(sol.grid, sol.P_values, args.output)
    _emit({"horizon": sol.horizon, "P_final": sol.P_final, "steps": len(sol.grid) - 1,
           "csv": args.output}, out)
    return EXIT_OK


def cmd_feedback(args, out) -> int:
    sf = load_system(args.system)
    validate_qwf(sf.system)
    problem = LQProblem(sf.system, sf.weights)
    problem.require_assumptions()
    G_dagger = None
    if args.beta_ginv is not None:
        G_dagger = left_inverse_variant(augmented_embedding(sf.system, problem.basis), args.beta_ginv)
    law = problem.feedback(args.alpha, G_dagger)
    report = law.to_dict()
    if args.simulate:
        x0 = _x0(args, sf)
        problem.initial_state(x0)
        grid = _grid(args.t_end if args.t_end is not None else INFINITE_HORIZON_PLOT, args.dt)
        traj = simulate_closed_loop(sf.system, law.k_row, x0, grid, n_finite=law.n_hat)
        write_trajectory_csv(traj, args.simulate)
        opt = problem.trajectory(x0, np.inf, grid).trajectory
        report["simulation"] = {
            "csv": args.simulate,
            "max_state_deviation_from_optimal": np.max(np.abs(traj.states - opt.states)),
            "max_input_deviation_from_optimal": np.max(np.abs(traj.input_values - opt.input_values)),
        }
    _emit(report, out)
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    sf = load_system(args.system)
    validate_qwf(sf.system)
    if sf.signal is None:
        raise UsageError("the system file has no signal to simulate")
    x0 = _x0(args, sf)
    traj = solve_dae(sf.system, x0, sf.signal, _grid(args.t_end, args.dt))
    report = {"points": len(traj.grid),
              "dae_residual_max": verify_solution(sf.system, traj, sf.signal).max_residual}
    if args.output:
        write_trajectory_csv(traj, args.output)
        report["trajectory_csv"] = args.output
    _emit(report, out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="daelqr", description="LQ optimal control of single-input DAEs in quasi-Weierstrass form")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="validation, input index, consistency space, assumptions")
    p.add_argument("system")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("solve", help="optimal trajectory and value")
    p.add_argument("system")
    p.add_argument("--x0", type=_vector)
    p.add_argument("--horizon", type=_horizon, default=np.inf, help="T > 0 or 'inf' (default)")
    p.add_argument("--dt", type=_positive)
    p.add_argument("--t-end", type=_positive, help="end of the output grid (default: T, or 10 for inf)")
    p.add_argument("--output", help="trajectory CSV path")
    p.add_argument("--summary", help="also write the JSON summary here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("riccati", help="integrate the Riccati equation and dump P")
    p.add_argument("system")
    p.add_argument("--horizon", type=_horizon, required=True)
    p.add_argument("--output", help="CSV of t and row-major P(t)")
    p.set_defaults(func=cmd_riccati)

    p = sub.add_parser("feedback", help="optimal static feedback for the infinite horizon")
    p.add_argument("system")
    p.add_argument("--alpha", type=_nonzero, default=1.0)
    p.add_argument("--beta-ginv", type=float, help="use the left inverse G^+ + beta e_last v'")
    p.add_argument("--simulate", help="simulate the closed loop and write a trajectory CSV")
    p.add_argument("--x0", type=_vector)
    p.add_argument("--t-end", type=_positive)
    p.add_argument("--dt", type=_positive)
    p.set_defaults(func=cmd_feedback)

    p = sub.add_parser("simulate", help="open-loop solution for the signal in the system file")
    p.add_argument("system")
    p.add_argument("--x0", type=_vector)
    p.add_argument("--t-end", type=_positive, default=5.0)
    p.add_argument("--dt", type=_positive)
    p.add_argument("--output", help="trajectory CSV path")
    p.set_defaults(func=cmd_simulate)
    return parser


def _fail(code: int, message: str, err, **extra) -> int:
    payload = {"error": message, "exit_code": code, **extra}
    err.write(json.dumps(_jsonable(payload)) + "\n")
    return code


def main(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return args.func(args, out)
    except SystemFileError as exc:
        return _fail(EXIT_PARSE, str(exc), err)
    except UsageError as exc:
        return _fail(EXIT_PARSE, str(exc), err)
    except (DimensionError, NotNilpotentError) as exc:
        return _fail(EXIT_VALIDATION, str(exc), err)
    except InconsistentInitialValueError as exc:
        return _fail(EXIT_INCONSISTENT, f"inconsistent initial value: {exc}", err,
                     residual=exc.residual, failed=exc.failed)
    except AssumptionError as exc:
        report = exc.report.to_dict() if exc.report is not None else None
        return _fail(EXIT_ASSUMPTION, str(exc), err, assumptions=report)
    except (DAELQRError, ValueError) as exc:
        return _fail(EXIT_OTHER, str(exc), err)


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
