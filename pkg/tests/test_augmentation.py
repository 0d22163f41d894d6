import numpy as np
import pytest

from daelqr import (
    CostWeights,
    DimensionError,
    QwfSystem,
    behavioural_stabilizability,
    build_augmented,
    check_assumptions,
    consistency_basis,
)
from daelqr.augmentation import congruence_matrix

from oracles import congruence_oracle, stabilizable_oracle
from systems import example_system, example_weights, random_psd_weights, random_system, shift


def test_example_augmented_data():
    aug = build_augmented(example_system(), example_weights())
    assert aug.n_hat == 1 and aug.omega == 1
    np.testing.assert_array_equal(aug.A_hat, [[0.0]])
    np.testing.assert_array_equal(aug.b_hat, [1.0])
    np.testing.assert_array_equal(aug.S_hat, [[2.0, 0.0], [0.0, 1.0]])
    # -[b_N, K] with b_N = e_2 and K = e_1
    np.testing.assert_array_equal(aug.output_map, [[0.0, -1.0], [-1.0, 0.0], [0.0, 0.0]])


def test_omega_zero_reduction():
    J = np.array([[-1.0, 0.5], [0.0, 2.0]])
    sys = QwfSystem(J, [[0.0]], [1.0, 1.0], [1.0])
    rng = np.random.default_rng(0)
    L = rng.normal(size=(4, 4))
    S = L @ L.T
    aug = build_augmented(sys, CostWeights(S))
    Q_J, Q_JN, Q_N = S[:2, :2], S[:2, 2:3], S[2:3, 2:3]
    h_J, h_N, r = S[:2, 3], S[2:3, 3], S[3, 3]
    expected = np.zeros((3, 3))
    expected[:2, :2] = Q_J
    expected[:2, 2] = expected[2, :2] = h_J - Q_JN[:, 0]
    expected[2, 2] = r + Q_N[0, 0] - 2 * h_N[0]
    np.testing.assert_allclose(aug.S_hat, expected, atol=1e-14)
    np.testing.assert_array_equal(aug.A_hat, J)
    np.testing.assert_array_equal(aug.b_hat, [1.0, 1.0])


def test_block_formula_matches_congruence_on_random_systems():
    rng = np.random.default_rng(1)
    for _ in range(200):
        sys = random_system(rng)
        w = random_psd_weights(rng, sys.n, singular=bool(rng.integers(2)))
        aug = build_augmented(sys, w)
        A, b, S_hat, M = congruence_oracle(sys.J, sys.N, sys.b_J, sys.b_N, w.S)
        scale = max(1.0, np.abs(S_hat).max())
        np.testing.assert_allclose(aug.S_hat, S_hat, atol=1e-12 * scale)
        np.testing.assert_array_equal(aug.A_hat, A)
        np.testing.assert_array_equal(aug.b_hat, b)
        np.testing.assert_allclose(congruence_matrix(sys, consistency_basis(sys)), M, atol=1e-13 * max(1.0, np.abs(M).max()))
        # congruence preserves semidefiniteness
        assert np.linalg.eigvalsh(aug.S_hat).min() >= -1e-10 * max(1.0, np.linalg.norm(aug.S_hat, 2))
        if aug.omega >= 1:
            v = np.linalg.matrix_power(sys.N, aug.omega) @ sys.b_N
            Q_N = w.blocks(sys.n_J).Q_N
            assert aug.r_hat == pytest.approx(v @ Q_N @ v, rel=1e-10, abs=1e-14)


def test_output_map_reproduces_algebraic_state():
    rng = np.random.default_rng(2)
    sys = QwfSystem([[0.3]], shift(3), [1.0], [0.0, 0.0, 1.0])
    aug = build_augmented(sys, random_psd_weights(rng, sys.n))
    basis = consistency_basis(sys)
    xu = rng.normal(size=aug.n_hat + 1)
    np.testing.assert_allclose(aug.output_map @ xu, (congruence_matrix(sys, basis) @ xu)[1:-1])


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        build_augmented(example_system(), CostWeights(np.eye(3)))


def test_asymmetric_weights_warned_and_symmetrized():
    S = np.eye(4)
    S[0, 1] = 1e-3
    with pytest.warns(UserWarning, match="not symmetric"):
        w = CostWeights(S)
    np.testing.assert_array_equal(w.S, w.S.T)
    assert w.S[0, 1] == 5e-4


def test_example_assumptions_all_hold():
    report = check_assumptions(build_augmented(example_system(), example_weights()), example_system())
    assert report.a1_psd and report.a2_stabilizable and report.a3_rhat_positive
    assert report.a4_observable and report.a5_rank
    assert report.definite
    assert report.diagnostics["rank_S_hat"] == 2 and report.diagnostics["rank_Q_hat"] == 1


def test_uncontrollable_unstable_mode_fails_a2():
    sys = QwfSystem([[1.0]], [[0.0]], [0.0], [1.0])
    report = check_assumptions(build_augmented(sys, CostWeights(np.eye(3))), sys)
    assert not report.a2_stabilizable
    assert report.failures() == ["a2_stabilizable"]
    assert report.diagnostics["uncontrollable_modes"]


def test_zero_r_hat_fails_a3():
    sys = example_system()
    # r_hat weighs u' and equals (N b_N)' Q_N (N b_N) = S[0, 0]
    S = np.diag([0.0, 1.0, 1.0, 1.0])
    aug = build_augmented(sys, CostWeights(S))
    assert aug.r_hat == 0.0
    assert not check_assumptions(aug, sys).a3_rhat_positive


def test_indefinite_weight_fails_a1():
    sys = QwfSystem([[-1.0]], [], [1.0], [])
    report = check_assumptions(build_augmented(sys, CostWeights(np.diag([-1.0, 1.0]))), sys)
    assert not report.a1_psd


def test_wrong_system_rejected():
    aug = build_augmented(example_system(), example_weights())
    other = QwfSystem([[1.0]], shift(2), [1.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        check_assumptions(aug, other)


def test_behavioural_stabilizability_examples():
    assert behavioural_stabilizability(example_system())
    N1 = [[0.0]]
    assert behavioural_stabilizability(QwfSystem(np.diag([-1.0, 2.0]), N1, [0.0, 1.0], [1.0]))
    assert not behavioural_stabilizability(QwfSystem(np.diag([-1.0, 2.0]), N1, [1.0, 0.0], [1.0]))


def test_hautus_equivalence_on_random_systems():
    rng = np.random.default_rng(3)
    verdicts = set()
    for k in range(200):
        sys = random_system(rng, unstabilizable=(k % 4 == 0))
        aug = build_augmented(sys, CostWeights(np.eye(sys.n + 1)))
        verdict = behavioural_stabilizability(sys)
        assert verdict == stabilizable_oracle(sys.J, sys.b_J)
        assert verdict == stabilizable_oracle(aug.A_hat, aug.b_hat)
        verdicts.add(verdict)
    assert verdicts == {True, False}
