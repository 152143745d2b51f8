import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import chain, deterministic_policies, random_mdp
from nsbirl.mdp import (
    ConvergenceError,
    TabularMdp,
    TrajectorySampler,
    boltzmann_fixed_point,
    boltzmann_response,
    log_boltzmann_response,
    policy_evaluation,
    sample_trajectory,
    shape_reward,
    value_iteration,
)


def self_loop(n_actions=1, discount=0.5):
    return TabularMdp(np.ones((1, n_actions, 1)), [1.0], discount, [False])


def brute_force_q_star(mdp, R, horizon=200):
    """Max over deterministic policies of their truncated rollout Q."""
    best = np.full(R.shape, -np.inf)
    S = mdp.n_states
    for pi in deterministic_policies(S, mdp.n_actions):
        q = np.zeros_like(R)
        for _ in range(horizon):
            q = R + mdp.discount * mdp.transition @ (pi * q).sum(axis=1)
        best = np.maximum(best, q)
    return best


class TestTabularMdp:
    def test_rejects_bad_rows(self):
        T = np.ones((2, 1, 2)) * 0.6
        with pytest.raises(ValueError):
            TabularMdp(T, [1, 0], 0.5, [False, False])

    def test_rejects_start_on_terminal(self):
        with pytest.raises(ValueError):
            TabularMdp(np.ones((1, 1, 1)), [1.0], 0.5, [True])

    def test_rejects_discount_one(self):
        with pytest.raises(ValueError):
            TabularMdp(np.ones((1, 1, 1)), [1.0], 1.0, [False])

    def test_arrays_are_read_only(self):
        mdp = self_loop()
        with pytest.raises(ValueError):
            mdp.transition[0, 0, 0] = 0.5


class TestValueIteration:
    def test_geometric_series(self):
        q = value_iteration(self_loop(), np.ones((1, 1)))
        assert q[0, 0] == pytest.approx(2.0, abs=1e-9)

    def test_zero_reward(self, rng):
        mdp = random_mdp(rng)
        assert np.array_equal(value_iteration(mdp, np.zeros((3, 2))), np.zeros((3, 2)))

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_exhaustive_policy_rollouts(self, seed):
        rng = np.random.default_rng(seed)
        mdp = random_mdp(rng, 3, 2, 0.5)
        R = rng.uniform(-1, 1, size=(3, 2))
        assert np.abs(value_iteration(mdp, R) - brute_force_q_star(mdp, R)).max() < 1e-6

    def test_terminal_rows_zero(self, rng):
        mdp = random_mdp(rng, 4, 2, 0.9, n_terminal=1)
        q = value_iteration(mdp, rng.uniform(-1, 1, (4, 2)))
        assert np.array_equal(q[3], np.zeros(2))

    def test_non_convergence_names_residual(self):
        with pytest.raises(ConvergenceError, match="residual"):
            value_iteration(self_loop(discount=0.99), np.ones((1, 1)), max_iter=5)

    def test_residuals_non_increasing(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(2, 6))
            mdp = random_mdp(rng, n, int(rng.integers(1, 4)), float(rng.uniform(0.1, 0.95)))
            res = []
            value_iteration(mdp, rng.uniform(-1, 1, (n, mdp.n_actions)), residuals=res)
            assert all(b <= a * (1 + 1e-12) + 1e-15 for a, b in zip(res, res[1:]))


class TestPolicyEvaluation:
    def test_single_action_matches_value_iteration(self, rng):
        mdp = random_mdp(rng, 4, 1, 0.8)
        R = rng.uniform(-1, 1, (4, 1))
        q = policy_evaluation(mdp, R, np.ones((4, 1)))
        assert np.abs(q - value_iteration(mdp, R)).max() <= 2e-9

    def test_zero_reward(self, rng):
        mdp = random_mdp(rng)
        assert np.abs(policy_evaluation(mdp, np.zeros((3, 2)), np.full((3, 2), 0.5))).max() == 0

    def test_uniform_policy_self_loop(self):
        mdp = self_loop(2)
        R = np.array([[1.0, 0.0]])
        # Q = R + 0.5 * (0.5 Q_A + 0.5 Q_B), solved as a generic linear system
        expected = np.linalg.solve(np.eye(2) - 0.25 * np.ones((2, 2)), R[0])
        assert expected == pytest.approx([1.5, 0.5])
        q = policy_evaluation(mdp, R, np.full((1, 2), 0.5))
        assert q[0] == pytest.approx([1.5, 0.5], abs=1e-12)


class TestBoltzmann:
    def test_beta_zero_uniform(self, rng):
        pi = boltzmann_response(rng.normal(size=(5, 3)), 0.0)
        assert np.allclose(pi, 1 / 3, atol=0)

    def test_equal_values(self):
        for beta in (0.1, 1, 100):
            assert boltzmann_response(np.array([[1.0, 1.0]]), beta)[0] == pytest.approx([0.5, 0.5])

    def test_two_values(self):
        # e / (e + 1) evaluated directly
        expected = np.e / (np.e + 1)
        assert expected == pytest.approx(0.7311, abs=1e-4)
        assert boltzmann_response(np.array([[1.0, 0.0]]), 1.0)[0] == pytest.approx([0.7311, 0.2689], abs=1e-3)

    def test_no_overflow(self):
        pi = boltzmann_response(np.array([[1e4, -1e4, 0.0]]), 1.0)
        assert np.isfinite(pi).all()
        assert pi[0] == pytest.approx([1, 0, 0])

    def test_mask(self):
        pi = boltzmann_response(np.array([[0.0, 5.0]]), 1.0, np.array([[True, False]]))
        assert pi[0].tolist() == [1.0, 0.0]

    def test_log_matches(self, rng):
        q = rng.normal(size=(4, 3))
        assert np.allclose(np.exp(log_boltzmann_response(q, 2.0)), boltzmann_response(q, 2.0), atol=1e-15)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0, 20))
    def test_per_state_shift_invariance(self, seed, beta):
        rng = np.random.default_rng(seed)
        q = rng.normal(size=(4, 3)) * 5
        shift = rng.normal(size=(4, 1)) * 50
        assert np.abs(boltzmann_response(q + shift, beta) - boltzmann_response(q, beta)).max() <= 1e-12


class TestFixedPoint:
    def test_single_action(self, rng):
        mdp = random_mdp(rng, 3, 1, 0.9)
        R = rng.uniform(-1, 1, (3, 1))
        q, pi = boltzmann_fixed_point(mdp, R, 3.0)
        assert np.abs(q - policy_evaluation(mdp, R, pi)).max() <= 1e-9
        assert np.array_equal(pi, np.ones((3, 1)))

    def test_beta_zero_is_uniform_evaluation(self, rng):
        mdp = random_mdp(rng, 4, 3, 0.9)
        R = rng.uniform(-1, 1, (4, 3))
        q, pi = boltzmann_fixed_point(mdp, R, 0.0)
        assert np.abs(q - policy_evaluation(mdp, R, np.full((4, 3), 1 / 3))).max() <= 2e-9

    def test_large_beta_picks_optimal_actions(self):
        mdp = chain(3, 0.9)
        R = np.array([[0.0, 0.1], [0.0, 0.2], [1.0, 0.0], [0.0, 0.0]])
        q, _ = boltzmann_fixed_point(mdp, R, 1e3)
        q_star = value_iteration(mdp, R)
        assert np.array_equal(q[:3].argmax(axis=1), q_star[:3].argmax(axis=1))

    @pytest.mark.parametrize("beta", [0.5, 2.0, 10.0])
    def test_fixed_point_residual(self, rng, beta):
        mdp = random_mdp(rng, 5, 3, 0.95, n_terminal=1)
        R = rng.uniform(-1, 1, (5, 3))
        q, pi = boltzmann_fixed_point(mdp, R, beta)
        assert np.array_equal(pi, boltzmann_response(q, beta))
        assert np.abs(policy_evaluation(mdp, R, pi) - q).max() <= 1e-9


class TestSampling:
    def test_deterministic_chain(self):
        mdp = chain(3)
        traj = sample_trajectory(mdp, np.array([[1.0, 0.0]] * 4), np.random.default_rng(0))
        assert traj.steps == [(0, 0), (1, 0), (2, 0)]
        assert traj.final_state == 3 and not traj.truncated

    def test_length_cap(self):
        traj = sample_trajectory(self_loop(2), np.full((1, 2), 0.5), np.random.default_rng(0), max_len=100)
        assert len(traj) == 100 and traj.truncated

    def test_seeded_repeatable(self, rng):
        mdp = random_mdp(rng, 4, 2, 0.9, n_terminal=1)
        pi = np.full((4, 2), 0.5)
        a = sample_trajectory(mdp, pi, np.random.default_rng(3))
        b = sample_trajectory(mdp, pi, np.random.default_rng(3))
        assert a == b

    def test_never_takes_zero_probability_actions(self, rng):
        mdp = random_mdp(rng, 3, 3, 0.9)
        pi = np.array([[0.0, 1.0, 0.0], [0.5, 0.0, 0.5], [0.0, 0.0, 1.0]])
        sampler = TrajectorySampler(mdp)
        for k in range(200):
            traj = sampler.sample(pi, np.random.default_rng(k), 20)
            assert all(pi[s, a] > 0 for s, a in traj.steps)

    def test_connectivity_and_transition_frequencies(self, rng):
        mdp = random_mdp(rng, 4, 2, 0.9)
        pi = np.array([[0.3, 0.7], [0.5, 0.5], [0.9, 0.1], [0.2, 0.8]])
        counts = np.zeros((4, 2, 4))
        sampler = TrajectorySampler(mdp)
        gen = np.random.default_rng(1)
        steps = 0
        while steps < 100_000:
            traj = sampler.sample(pi, gen, 100)
            succ = traj.successors()
            for (s, a), s2 in zip(traj.steps, succ):
                assert mdp.transition[s, a, s2] > 0
                counts[s, a, s2] += 1
            steps += len(traj)
        n = counts.sum(axis=2, keepdims=True)
        freq = counts / n
        se = np.sqrt(mdp.transition * (1 - mdp.transition) / n)
        assert (np.abs(freq - mdp.transition) <= 3 * se + 1e-12).mean() > 0.95


class TestShaping:
    def test_zero_potential_identity(self, rng):
        mdp = random_mdp(rng)
        R = rng.uniform(-1, 1, (3, 2))
        assert np.array_equal(shape_reward(mdp, R, np.zeros(3)), R)

    def test_constant_potential_shifts_q(self, rng):
        mdp = random_mdp(rng, 4, 3, 0.8)
        R = rng.uniform(-1, 1, (4, 3))
        c = 0.7
        shaped = shape_reward(mdp, R, np.full(4, c))
        assert np.abs(value_iteration(mdp, shaped) - (value_iteration(mdp, R) - c)).max() < 1e-8

    def test_rejects_potential_on_terminal(self, rng):
        mdp = random_mdp(rng, 3, 2, 0.5, n_terminal=1)
        with pytest.raises(ValueError):
            shape_reward(mdp, np.zeros((3, 2)), np.ones(3))

    def test_random_potential_same_policy(self, rng):
        mdp = random_mdp(rng, 4, 3, 0.9)
        R = rng.uniform(-1, 1, (4, 3))
        shaped = shape_reward(mdp, R, rng.uniform(-1, 1, 4))
        _, p1 = boltzmann_fixed_point(mdp, R, 2.0)
        _, p2 = boltzmann_fixed_point(mdp, shaped, 2.0)
        assert np.abs(p1 - p2).max() <= 1e-6

    @pytest.mark.parametrize("beta", [0.5, 1, 2, 5, 10])
    def test_policy_invariance_property(self, beta):
        rng = np.random.default_rng(int(beta * 10))
        for _ in range(20):
            n, m = int(rng.integers(2, 6)), int(rng.integers(2, 4))
            mdp = random_mdp(rng, n, m, float(rng.uniform(0.3, 0.95)), n_terminal=int(rng.integers(0, 2)))
            R = rng.uniform(-1, 1, (n, m))
            phi = rng.uniform(-1, 1, n)
            phi[mdp.terminal] = 0.0
            _, p1 = boltzmann_fixed_point(mdp, R, beta)
            _, p2 = boltzmann_fixed_point(mdp, shape_reward(mdp, R, phi), beta)
            assert np.abs(p1 - p2).max() <= 1e-6
