"""Stationary Boltzmann demonstrators and tabular TD(lambda) learners.

A learner keeps Q-estimates and visit counts, acts with the Boltzmann policy
of its current estimates, and updates once per trajectory: targets are
computed from the estimates frozen at the start of the trajectory, then every
visited pair moves toward its target with learning rate ``1 / (N + 1)``.
lambda = 0 gives the one-step (Q-learning) target and lambda = 1 the
discounted reward-to-go (direct evaluation).

The ``batch_*`` kernels operate on a stack of Q-tables sharing one visit-count
table, which is how inference runs one learner per reward hypothesis. The
single-learner API goes through the same kernels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .mdp import (
    DEFAULT_MAX_LEN,
    TabularMdp,
    Trajectory,
    TrajectorySampler,
    boltzmann_fixed_point,
    boltzmann_response,
)


@dataclass(frozen=True)
class DemonstratorSpec:
    kind: Literal["stationary", "learner"]
    beta: float
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in ("stationary", "learner"):
            raise ValueError(f"unknown demonstrator kind {self.kind!r}")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.kind == "learner" and not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")


@dataclass(frozen=True)
class RewardedTrajectory:
    trajectory: Trajectory
    rewards: tuple[float, ...]

    @property
    def steps(self) -> list[tuple[int, int, float]]:
        return list(zip(self.trajectory.states, self.trajectory.actions, self.rewards))

    @property
    def final_state(self) -> int:
        return self.trajectory.final_state

    @property
    def truncated(self) -> bool:
        return self.trajectory.truncated

    def __len__(self) -> int:
        return len(self.trajectory)


def fill_rewards(traj: Trajectory, reward) -> RewardedTrajectory:
    """Annotate every step with ``reward[s, a]``."""
    R = np.asarray(reward, dtype=float)
    s, a = traj.arrays()
    return RewardedTrajectory(traj, tuple(R[s, a].tolist()))


def batch_targets(q: np.ndarray, beta: float, lam: float, mdp: TabularMdp,
                  traj: Trajectory, rewards: np.ndarray) -> np.ndarray:
    """TD(lambda) targets for a stack of learners.

    ``q`` has shape (K, S, A) and ``rewards`` (K, T); returns (K, T). The
    state value used for bootstrapping is the expectation of Q under the
    learner's own Boltzmann policy. A terminal end bootstraps with 0 and a
    truncated end with the value of the final state.
    """
    T = len(traj)
    if T == 0:
        raise ValueError("cannot compute targets for an empty trajectory")
    gamma = mdp.discount
    pi = boltzmann_response(q, beta, mdp.allowed)
    v = (pi * q).sum(axis=-1)
    succ = np.array(traj.successors(), dtype=np.intp)
    v_succ = v[:, succ]
    if mdp.terminal[traj.final_state]:
        v_succ[:, -1] = 0.0
    y = np.empty_like(rewards, dtype=float)
    y[:, T - 1] = rewards[:, T - 1] + gamma * v_succ[:, T - 1]
    for t in range(T - 2, -1, -1):
        y[:, t] = rewards[:, t] + gamma * (lam * y[:, t + 1] + (1.0 - lam) * v_succ[:, t])
    return y


def batch_update(q: np.ndarray, counts: np.ndarray, traj: Trajectory,
                 targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sweep the trajectory in time order applying the visit-count average."""
    q = q.copy()
    counts = counts.copy()
    for t, (s, a) in enumerate(zip(traj.states, traj.actions)):
        n = int(counts[s, a])
        q[:, s, a] = (n / (n + 1)) * q[:, s, a] + (1 / (n + 1)) * targets[:, t]
        counts[s, a] = n + 1
    return q, counts


@dataclass(frozen=True, eq=False)
class LearnerState:
    q_hat: np.ndarray
    visit_counts: np.ndarray
    beta: float
    lam: float
    mdp: TabularMdp

    @classmethod
    def fresh(cls, mdp: TabularMdp, beta: float, lam: float) -> LearnerState:
        shape = (mdp.n_states, mdp.n_actions)
        return cls(np.zeros(shape), np.zeros(shape, dtype=np.int64), float(beta), float(lam), mdp)

    @property
    def discount(self) -> float:
        return self.mdp.discount

    def same_as(self, other: LearnerState) -> bool:
        return (np.array_equal(self.q_hat, other.q_hat)
                and np.array_equal(self.visit_counts, other.visit_counts)
                and (self.beta, self.lam) == (other.beta, other.lam))


def learner_policy(state: LearnerState) -> np.ndarray:
    return boltzmann_response(state.q_hat, state.beta, state.mdp.allowed)


def compute_targets(state: LearnerState, traj: RewardedTrajectory) -> np.ndarray:
    rewards = np.array(traj.rewards, dtype=float)[None, :]
    return batch_targets(state.q_hat[None], state.beta, state.lam, state.mdp, traj.trajectory, rewards)[0]


def apply_update(state: LearnerState, traj: RewardedTrajectory) -> LearnerState:
    """Return the learner after one end-of-trajectory update; ``state`` is untouched."""
    y = compute_targets(state, traj)
    q, counts = batch_update(state.q_hat[None], state.visit_counts, traj.trajectory, y[None])
    return LearnerState(q[0], counts, state.beta, state.lam, state.mdp)


def generate_demonstration(mdp: TabularMdp, true_reward, spec: DemonstratorSpec, n_traj: int,
                           max_len: int = DEFAULT_MAX_LEN, rng: np.random.Generator | None = None,
                           policy: np.ndarray | None = None) -> list[Trajectory]:
    """Sample ``n_traj`` trajectories from a demonstrator.

    Each trajectory draws from its own child generator spawned from ``rng``.
    A stationary demonstrator may be handed its precomputed fixed-point
    ``policy`` to skip the solve.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    if rng is None:
        rng = np.random.default_rng()
    R = mdp.check_reward(true_reward)
    sampler = TrajectorySampler(mdp)
    streams = rng.spawn(n_traj)
    if spec.kind == "stationary":
        if policy is None:
            _, policy = boltzmann_fixed_point(mdp, R, spec.beta)
        return [sampler.sample(policy, g, max_len) for g in streams]

    state = LearnerState.fresh(mdp, spec.beta, spec.lam)
    trajs = []
    for g in streams:
        traj = sampler.sample(learner_policy(state), g, max_len)
        state = apply_update(state, fill_rewards(traj, R))
        trajs.append(traj)
    return trajs
