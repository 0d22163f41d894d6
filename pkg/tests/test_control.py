import numpy as np
import pytest
from scipy.integrate import solve_ivp

from daelqr import (
    AssumptionError,
    CostWeights,
    InconsistentInitialValueError,
    LQProblem,
    QwfSystem,
    check_closed_loop_regular,
    left_inverse_variant,
    optimal_trajectory,
    optimal_value,
    quadrature_cost,
    simulate_closed_loop,
    synthesize_feedback,
)
from daelqr.control import augmented_embedding

from oracles import dp_values
from systems import (
    SQRT2,
    example_optimal,
    example_system,
    example_weights,
    random_psd_weights,
    random_system,
    shift,
)


def tanh_value(T):
    return SQRT2 * np.tanh(SQRT2 * T)


def quadrature_grid(problem, T, per_unit=40):
    """Uniform grid resolving the fastest closed-loop rate."""
    aug = problem.augmented
    if aug.n_hat:
        gain = (aug.b_hat @ problem.value_matrix(T) + aug.h_hat) / aug.r_hat
        rate = np.abs(np.linalg.eigvals(aug.A_hat - np.outer(aug.b_hat, gain))).max()
    else:
        rate = 1.0
    npts = int(T * max(1.0, rate) * per_unit) + 1
    return np.linspace(0.0, T, max(npts, 2001) | 1)


def random_problems(rng, count, T=2.0):
    out = []
    while len(out) < count:
        sys = random_system(rng)
        w = random_psd_weights(rng, sys.n, singular=bool(rng.integers(2)) and sys.n >= 2)
        problem = LQProblem(sys, w)
        if problem.assumptions.failures():
            continue
        out.append(problem)
    return out


@pytest.mark.parametrize("x10", [-3.0, 1.0, 2.5])
@pytest.mark.parametrize("T", [0.5, 2.0, np.inf])
def test_example_value(x10, T):
    expected = SQRT2 if T == np.inf else tanh_value(T)
    V = optimal_value(example_system(), example_weights(), [x10, 0.0, 0.0], T)
    assert V == pytest.approx(expected * x10**2, rel=1e-8)


def test_zero_initial_value():
    sol = optimal_trajectory(example_system(), example_weights(), np.zeros(3), 2.0)
    assert sol.value == 0.0
    assert np.all(sol.trajectory.states == 0.0) and np.all(sol.control == 0.0)


def test_example_infinite_horizon_trajectory():
    x10 = 1.3
    grid = np.linspace(0, 5, 501)
    sol = optimal_trajectory(example_system(), example_weights(), [x10, 0, 0], np.inf, grid)
    x_ref, u_ref = example_optimal(grid, x10)
    assert np.abs(sol.trajectory.states - x_ref).max() <= 1e-6
    assert np.abs(sol.control - u_ref).max() <= 1e-6


def test_example_finite_horizon_control():
    # u' = -P(T - t) u with P = sqrt2 tanh(sqrt2 t) integrates in closed form
    x10, T = 0.8, 1.5
    grid = np.linspace(0, T, 301)
    sol = optimal_trajectory(example_system(), example_weights(), [x10, 0, 0], T, grid)
    u_ref = -x10 * np.cosh(SQRT2 * (T - grid)) / np.cosh(SQRT2 * T)
    np.testing.assert_allclose(sol.control, u_ref, atol=1e-7)
    np.testing.assert_allclose(sol.x_hat[:, 0], sol.control)
    np.testing.assert_allclose(sol.u_hat, x10 * SQRT2 * np.sinh(SQRT2 * (T - grid)) / np.cosh(SQRT2 * T), atol=1e-7)


def test_inconsistent_and_bad_horizon():
    sys, w = example_system(), example_weights()
    with pytest.raises(InconsistentInitialValueError):
        optimal_value(sys, w, [0.0, 1.0, 0.0], 1.0)
    with pytest.raises(ValueError, match="horizon"):
        optimal_value(sys, w, [1.0, 0.0, 0.0], 0.0)
    with pytest.raises(ValueError):
        optimal_trajectory(sys, w, [1.0, 0.0, 0.0], 1.0, np.linspace(0, 2, 11))


def test_assumption_failure_raised():
    with pytest.raises(AssumptionError):
        optimal_value(example_system(), CostWeights(np.diag([0.0, 1, 1, 1])), [1.0, 0, 0], 1.0)


def test_quadrature_cost_matches_value():
    rng = np.random.default_rng(31)
    for problem in random_problems(rng, 30, T=2.0):
        T = float(rng.uniform(0.5, 3.0))
        x0 = problem.basis.F @ rng.normal(size=problem.basis.dim)
        sol = problem.trajectory(x0, T, quadrature_grid(problem, T))
        cost = quadrature_cost(problem.weights, sol.trajectory)
        assert cost == pytest.approx(sol.value, rel=1e-6, abs=1e-12)


def test_perturbed_inputs_cost_more():
    rng = np.random.default_rng(32)
    T = 2.0
    for problem in random_problems(rng, 10, T):
        aug = problem.augmented
        if aug.n_hat == 0:
            continue
        x0 = problem.basis.F @ rng.normal(size=problem.basis.dim)
        grid = quadrature_grid(problem, T)
        sol = problem.trajectory(x0, T, grid)
        for _ in range(3):
            c = rng.normal(size=3) * 0.3

            def w(t):
                return c[0] + c[1] * np.cos(2 * t) + c[2] * t

            # the chain of integrators from rest keeps the perturbation in U^0
            dy = solve_ivp(lambda t, y: aug.A_hat @ y + aug.b_hat * w(t), (0, T), np.zeros(aug.n_hat),
                           t_eval=grid, rtol=1e-11, atol=1e-13).y.T
            traj = problem.reconstruct(grid, sol.x_hat + dy, sol.u_hat + w(grid))
            if problem.omega:
                assert np.allclose(traj.input_values[0], sol.control[0])
            assert quadrature_cost(problem.weights, traj) >= sol.value - 1e-8


def test_dynamic_programming_oracle():
    rng = np.random.default_rng(33)
    problems = [p for p in random_problems(rng, 25) if p.augmented.n_hat]
    T = 2.0
    Vs = dp_values([(p.augmented.A_hat, p.augmented.b_hat, p.augmented.S_hat) for p in problems], T, 1e-4)
    for p, V in zip(problems, Vs):
        P = p.value_matrix(T)
        for z in rng.normal(size=(3, p.augmented.n_hat)):
            assert z @ P @ z == pytest.approx(z @ V @ z, rel=1e-4)


def test_value_positive_definite_on_consistent_space():
    rng = np.random.default_rng(34)
    found = 0
    while found < 3:
        problem = random_problems(rng, 1)[0]
        if not problem.assumptions.definite or problem.basis.dim == 0:
            continue
        for z in rng.normal(size=(100, problem.basis.dim)):
            assert problem.value(problem.basis.F @ z, 1.0) > 0
        found += 1


# -- feedback ------------------------------------------------------------------


def test_example_left_inverse_family():
    G = augmented_embedding(example_system(), LQProblem(example_system(), example_weights()).basis)
    np.testing.assert_array_equal(G, [[0, -1], [-1, 0], [0, 0]])
    for beta in (0.0, 3.0, -1.5):
        np.testing.assert_allclose(left_inverse_variant(G, beta), [[0, -1, 0], [-1, 0, beta]], atol=1e-15)


@pytest.mark.parametrize("alpha", [-2.0, 0.5, 1.0, 10.0])
@pytest.mark.parametrize("beta", [0.0, 3.0])
def test_example_feedback_family(alpha, beta):
    sys, w = example_system(), example_weights()
    G = augmented_embedding(sys, LQProblem(sys, w).basis)
    law = synthesize_feedback(sys, w, alpha, G_dagger=left_inverse_variant(G, beta))
    np.testing.assert_allclose(law.k_row, [-alpha, -SQRT2 * alpha - 1, alpha * beta], atol=1e-9)
    assert law.regular
    np.testing.assert_allclose(law.G_dagger @ law.G, np.eye(2), atol=1e-12)
    x10 = 1.0
    grid = np.linspace(0, 5, 201)
    traj = simulate_closed_loop(sys, law.k_row, [x10, 0, 0], grid)
    x_ref, u_ref = example_optimal(grid, x10)
    assert np.abs(traj.states - x_ref).max() <= 1e-6
    assert np.abs(traj.input_values - u_ref).max() <= 1e-6


def test_feedback_rejections():
    sys, w = example_system(), example_weights()
    with pytest.raises(ValueError, match="alpha"):
        synthesize_feedback(sys, w, 0.0)
    ode = QwfSystem([[-1.0]], [[0.0]], [1.0], [1.0])
    with pytest.raises(ValueError, match="omega = 0"):
        synthesize_feedback(ode, CostWeights(np.eye(3)))
    with pytest.raises(ValueError, match="left inverse"):
        synthesize_feedback(sys, w, G_dagger=np.zeros((2, 3)))


def test_singular_feedback_detected():
    sys = QwfSystem([], [[0.0]], [], [1.0])  # 0 = x + u
    cert = check_closed_loop_regular(sys, [-1.0])
    assert cert.structural_singular and not cert.det_regular and not cert.regular
    assert check_closed_loop_regular(sys, [0.0]).regular


def test_zero_feedback_is_regular():
    rng = np.random.default_rng(35)
    for _ in range(20):
        sys = random_system(rng)
        cert = check_closed_loop_regular(sys, np.zeros(sys.n), rng=rng)
        assert cert.regular and not cert.structural_singular


def feedback_problems(rng, count):
    return [p for p in random_problems(rng, 3 * count) if p.omega >= 1][:count]


def test_feedback_matches_optimal_trajectory_on_random_systems():
    rng = np.random.default_rng(36)
    grid = np.linspace(0, 3, 61)
    for problem in feedback_problems(rng, 8):
        sys = problem.system
        x0 = problem.basis.F @ rng.normal(size=problem.basis.dim)
        ref = problem.trajectory(x0, np.inf, grid).trajectory
        scale = max(1.0, np.abs(ref.states).max())
        G = augmented_embedding(sys, problem.basis)
        rows = []
        for alpha in (-2.0, 0.5, 1.0, 10.0):
            for G_dagger in (None, left_inverse_variant(G, 2.0) if G.shape[0] > G.shape[1] else None):
                law = problem.feedback(alpha, G_dagger)
                assert law.regular
                # k_N K = alpha (p_{n_J+2}, ..., p_n_hat, 1) with (k_J, k_N) = -k_row
                k_N = -law.k_row[sys.n_J:]
                expected = alpha * np.append(law.p[sys.n_J + 1:], 1.0)
                np.testing.assert_allclose(k_N @ problem.basis.K, expected, atol=1e-9 * max(1.0, abs(alpha)))
                assert np.linalg.norm(expected) > 0
                traj = simulate_closed_loop(sys, law.k_row, x0, grid)
                assert np.abs(traj.states - ref.states).max() <= 1e-6 * scale
                assert np.abs(traj.input_values - ref.input_values).max() <= 1e-6 * scale
                rows.append(law.k_row)
        assert len(rows) >= 4


def test_two_left_inverses_same_closed_loop():
    rng = np.random.default_rng(37)
    checked = 0
    for problem in feedback_problems(rng, 10):
        sys = problem.system
        G = augmented_embedding(sys, problem.basis)
        if G.shape[0] <= G.shape[1]:
            continue
        a = problem.feedback(1.0)
        b = problem.feedback(1.0, left_inverse_variant(G, -4.0))
        assert np.abs(a.k_row - b.k_row).max() > 1e-3
        x0 = problem.basis.F @ rng.normal(size=problem.basis.dim)
        grid = np.linspace(0, 2, 41)
        ta = simulate_closed_loop(sys, a.k_row, x0, grid)
        tb = simulate_closed_loop(sys, b.k_row, x0, grid)
        scale = max(1.0, np.abs(ta.states).max())
        assert np.abs(ta.states - tb.states).max() <= 1e-8 * scale
        assert np.abs(ta.input_values - tb.input_values).max() <= 1e-8 * scale
        checked += 1
    assert checked >= 3


def test_closed_loop_simulation_rejects_inconsistent_start():
    sys, w = example_system(), example_weights()
    law = synthesize_feedback(sys, w)
    with pytest.raises(InconsistentInitialValueError):
        simulate_closed_loop(sys, law.k_row, [0.0, 1.0, 0.0], np.linspace(0, 1, 11))


def test_feedback_to_dict():
    law = synthesize_feedback(example_system(), example_weights())
    d = law.to_dict()
    assert d["regularity"]["regular"] is True
    assert len(d["k_row"]) == 3


def test_longer_chain_feedback():
    sys = QwfSystem([[0.5]], shift(3), [1.0], [0.0, 0.0, 1.0])  # omega = 2
    law = synthesize_feedback(sys, CostWeights(np.eye(5)), alpha=0.5)
    assert law.regular and law.n_hat == 3
