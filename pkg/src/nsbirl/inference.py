"""Exact Bayesian IRL over a finite set of reward hypotheses.

For a stationary model each hypothesis is scored with its Boltzmann
fixed-point policy. For a learning model one learner per hypothesis is
simulated alongside the demonstration: each trajectory is scored under every
learner's current policy and only then used to update that learner, with the
rewards that hypothesis assigns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .demonstrators import batch_targets, batch_update, fill_rewards  # noqa: F401  (re-export)
from .mdp import HypothesisSpace, TabularMdp, Trajectory, boltzmann_fixed_point, log_boltzmann_response


@dataclass(frozen=True)
class InferenceModel:
    kind: Literal["stationary", "learner"]
    beta: float
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in ("stationary", "learner"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.kind == "learner" and not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class InferenceTrace:
    """Per-trajectory log-likelihoods ``loglik[i, k]`` and the log prior.

    For learner models ``final_q`` and ``final_counts`` hold the hypothesis
    learners after the last update.
    """

    loglik: np.ndarray
    log_prior: np.ndarray
    final_q: np.ndarray | None = None
    final_counts: np.ndarray | None = None

    @property
    def n_trajectories(self) -> int:
        return self.loglik.shape[0]


def trajectory_log_likelihood(log_policy: np.ndarray, traj: Trajectory) -> float:
    """Sum of ``log pi(a_t | s_t)`` over the trajectory, from log-probabilities."""
    s, a = traj.arrays()
    return float(np.asarray(log_policy)[s, a].sum())


def normalize_log(logp: np.ndarray) -> np.ndarray:
    z = logp - logp.max(axis=-1, keepdims=True)
    p = np.exp(z)
    return p / p.sum(axis=-1, keepdims=True)


def posterior_from_loglik(trace: InferenceTrace, rows: Sequence[int] | slice = ()) -> np.ndarray:
    """Posterior from the prior and the log-likelihood rows in ``rows``."""
    if trace.log_prior.size == 0:
        raise ValueError("empty hypothesis space")
    if isinstance(rows, slice):
        total = trace.loglik[rows].sum(axis=0)
    else:
        idx = list(rows)
        if any(not 0 <= i < trace.n_trajectories for i in idx):
            raise IndexError("row index out of range")
        total = trace.loglik[idx].sum(axis=0) if idx else 0.0
    return normalize_log(trace.log_prior + total)


def cumulative_posteriors(trace: InferenceTrace) -> np.ndarray:
    """Row i is the posterior after the first i trajectories; shape (n + 1, K)."""
    cum = np.cumsum(trace.loglik, axis=0)
    logs = np.vstack([np.zeros_like(trace.log_prior), cum]) + trace.log_prior
    return normalize_log(logs)


def single_posteriors(trace: InferenceTrace) -> np.ndarray:
    """Row i is the posterior from trajectory i alone; shape (n, K)."""
    return normalize_log(trace.loglik + trace.log_prior)


def stationary_log_policies(mdp: TabularMdp, hypotheses: HypothesisSpace, beta: float) -> np.ndarray:
    """Log Boltzmann fixed-point policy for every hypothesis; shape (K, S, A)."""
    out = []
    for R in hypotheses.rewards:
        q, _ = boltzmann_fixed_point(mdp, R, beta)
        out.append(log_boltzmann_response(q, beta, mdp.allowed))
    return np.stack(out)


def birl_run(trajs: Sequence[Trajectory], model: InferenceModel, hypotheses: HypothesisSpace,
             mdp: TabularMdp, log_policies: np.ndarray | None = None) -> InferenceTrace:
    """Log-likelihood of every trajectory under every hypothesis.

    ``log_policies`` may carry precomputed stationary policies (see
    :func:`stationary_log_policies`) and is ignored for learner models.
    """
    if not trajs:
        raise ValueError("need at least one trajectory")
    K = len(hypotheses)
    loglik = np.empty((len(trajs), K))
    log_prior = np.log(hypotheses.prior)

    if model.kind == "stationary":
        if log_policies is None:
            log_policies = stationary_log_policies(mdp, hypotheses, model.beta)
        for i, traj in enumerate(trajs):
            s, a = traj.arrays()
            loglik[i] = log_policies[:, s, a].sum(axis=1)
        return InferenceTrace(loglik, log_prior)

    q = np.zeros((K, mdp.n_states, mdp.n_actions))
    counts = np.zeros((mdp.n_states, mdp.n_actions), dtype=np.int64)
    rewards = hypotheses.rewards
    for i, traj in enumerate(trajs):
        s, a = traj.arrays()
        logpi = log_boltzmann_response(q, model.beta, mdp.allowed)
        loglik[i] = logpi[:, s, a].sum(axis=1)
        y = batch_targets(q, model.beta, model.lam, mdp, traj, rewards[:, s, a])
        q, counts = batch_update(q, counts, traj, y)
    return InferenceTrace(loglik, log_prior, q, counts)
