"""Finite tabular MDPs: dynamic programming, Boltzmann policies, sampling and shaping.

Rewards, Q-tables and policies are plain ``(n_states, n_actions)`` float arrays.
Terminal states carry zero value and a placeholder policy row that is never
sampled. States may restrict which actions are available through
``TabularMdp.allowed``; unavailable actions get zero probability under every
policy.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

DEFAULT_TOL = 1e-9
VI_MAX_ITER = 1_000_000
FIXED_POINT_MAX_ITER = 10_000
DEFAULT_MAX_LEN = 100


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, what: str, residual: float, iterations: int):
        super().__init__(f"{what} did not converge after {iterations} iterations (residual {residual:.3e})")
        self.residual = residual
        self.iterations = iterations


def _frozen(a, dtype) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class TabularMdp:
    transition: np.ndarray
    initial_dist: np.ndarray
    discount: float
    terminal: np.ndarray
    allowed: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        T = _frozen(self.transition, float)
        if T.ndim != 3 or T.shape[0] != T.shape[2]:
            raise ValueError(f"transition must have shape (S, A, S), got {T.shape}")
        S, A, _ = T.shape
        if (T < 0).any() or np.abs(T.sum(axis=2) - 1.0).max() > 1e-12:
            raise ValueError("transition rows must be probability vectors")
        rho = _frozen(self.initial_dist, float)
        term = _frozen(self.terminal, bool)
        if rho.shape != (S,) or term.shape != (S,):
            raise ValueError("initial_dist and terminal must have one entry per state")
        if (rho < 0).any() or abs(rho.sum() - 1.0) > 1e-12:
            raise ValueError("initial_dist must be a probability vector")
        if (rho[term] > 0).any():
            raise ValueError("initial_dist puts mass on a terminal state")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount must lie in [0, 1), got {self.discount}")
        allowed = np.ones((S, A), bool) if self.allowed is None else self.allowed
        allowed = _frozen(allowed, bool)
        if allowed.shape != (S, A) or not allowed.any(axis=1).all():
            raise ValueError("allowed must be (S, A) with at least one action per state")
        object.__setattr__(self, "transition", T)
        object.__setattr__(self, "initial_dist", rho)
        object.__setattr__(self, "terminal", term)
        object.__setattr__(self, "allowed", allowed)
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    def check_reward(self, reward) -> np.ndarray:
        R = np.asarray(reward, dtype=float)
        if R.shape != (self.n_states, self.n_actions):
            raise ValueError(f"reward shape {R.shape} does not match MDP {(self.n_states, self.n_actions)}")
        if not np.isfinite(R).all():
            raise ValueError("reward entries must be finite")
        return R


@dataclass(frozen=True, eq=False)
class HypothesisSpace:
    rewards: np.ndarray  # (K, S, A)
    prior: np.ndarray  # (K,)
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        rewards = np.array(self.rewards, dtype=float)
        prior = np.array(self.prior, dtype=float)
        if rewards.ndim != 3 or prior.shape != (rewards.shape[0],):
            raise ValueError("rewards must be (K, S, A) with one prior entry per hypothesis")
        if not np.isfinite(rewards).all():
            raise ValueError("reward entries must be finite")
        if (prior <= 0).any() or abs(prior.sum() - 1.0) > 1e-12:
            raise ValueError("prior must be strictly positive and sum to 1")
        rewards.setflags(write=False)
        prior.setflags(write=False)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "prior", prior)
        labels = tuple(self.labels) or tuple(str(k) for k in range(len(prior)))
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.prior)


@dataclass(frozen=True)
class Trajectory:
    """Observed ``(state, action)`` steps plus the state the last step led to."""

    states: tuple[int, ...]
    actions: tuple[int, ...]
    final_state: int
    truncated: bool

    def __post_init__(self):
        if len(self.states) != len(self.actions):
            raise ValueError("states and actions must have equal length")

    def __len__(self) -> int:
        return len(self.states)

    @property
    def steps(self) -> list[tuple[int, int]]:
        return list(zip(self.states, self.actions))

    def successors(self) -> tuple[int, ...]:
        return self.states[1:] + (self.final_state,)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.states, dtype=np.intp), np.array(self.actions, dtype=np.intp)


def _state_values(q: np.ndarray, policy: np.ndarray) -> np.ndarray:
    return (policy * q).sum(axis=-1)


def bellman_backup(mdp: TabularMdp, reward: np.ndarray, v: np.ndarray) -> np.ndarray:
    q = reward + mdp.discount * (mdp.transition @ v)
    q[mdp.terminal] = 0.0
    return q


def value_iteration(mdp: TabularMdp, reward, tol: float = DEFAULT_TOL, max_iter: int = VI_MAX_ITER,
                    residuals: list | None = None) -> np.ndarray:
    """Optimal Q-table by synchronous Bellman-optimality sweeps from Q = 0.

    Stops once the largest change between sweeps is at most ``tol`` and the
    contraction bound gamma / (1 - gamma) * residual, which caps the distance
    to the true fixed point, is too. If ``residuals`` is given, the per-sweep
    residuals are appended to it.
    """
    if tol <= 0 or max_iter <= 0:
        raise ValueError("tol and max_iter must be positive")
    R = mdp.check_reward(reward)
    q = np.zeros_like(R)
    masked = np.where(mdp.allowed, 0.0, -np.inf)
    residual = np.inf
    stop = tol * min(1.0, (1.0 - mdp.discount) / mdp.discount) if mdp.discount > 0 else tol
    for it in range(1, max_iter + 1):
        q_new = bellman_backup(mdp, R, (q + masked).max(axis=1))
        residual = float(np.abs(q_new - q).max())
        q = q_new
        if residuals is not None:
            residuals.append(residual)
        if residual <= stop:
            return q
    raise ConvergenceError("value iteration", residual, max_iter)


def policy_evaluation(mdp: TabularMdp, reward, policy, tol: float = DEFAULT_TOL,
                      max_iter: int = VI_MAX_ITER) -> np.ndarray:
    """Q-table of ``policy``.

    Solves the linear Bellman system directly, then falls back to fixed-point
    sweeps if the solution's residual exceeds ``tol``.
    """
    R = mdp.check_reward(reward)
    pi = np.asarray(policy, dtype=float)
    live = ~mdp.terminal
    r_pi = (pi * R).sum(axis=1)
    p_pi = np.einsum("sa,sat->st", pi, mdp.transition)
    v = np.zeros(mdp.n_states)
    sub = p_pi[np.ix_(live, live)]
    v[live] = np.linalg.solve(np.eye(sub.shape[0]) - mdp.discount * sub, r_pi[live])
    q = bellman_backup(mdp, R, v)
    for it in range(max_iter + 1):
        q_new = bellman_backup(mdp, R, _state_values(q, pi))
        residual = float(np.abs(q_new - q).max())
        if residual <= tol:
            return q
        q = q_new
    raise ConvergenceError("policy evaluation", residual, max_iter)


def log_boltzmann_response(q, beta: float, allowed: np.ndarray | None = None) -> np.ndarray:
    """Log-probabilities of the softmax of ``beta * q`` over the last axis.

    Unavailable actions get ``-inf``.
    """
    if beta < 0:
        raise ValueError("beta must be non-negative")
    logits = beta * np.asarray(q, dtype=float)
    if allowed is not None:
        logits = np.where(allowed, logits, -np.inf)
    logits = logits - logits.max(axis=-1, keepdims=True)
    return logits - np.log(np.exp(logits).sum(axis=-1, keepdims=True))


def boltzmann_response(q, beta: float, allowed: np.ndarray | None = None) -> np.ndarray:
    """Row-wise softmax of ``beta * q``, restricted to allowed actions."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    logits = beta * np.asarray(q, dtype=float)
    if allowed is not None:
        logits = np.where(allowed, logits, -np.inf)
    z = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def boltzmann_fixed_point(mdp: TabularMdp, reward, beta: float, tol: float = DEFAULT_TOL,
                          max_iter: int = FIXED_POINT_MAX_ITER) -> tuple[np.ndarray, np.ndarray]:
    """Solve pi = softmax(beta * Q^pi) by damped iteration started at Q*.

    Returns ``(q, policy)`` with ``policy = boltzmann_response(q, beta)`` and
    ``|policy_evaluation(policy) - q| <= tol``. The step size halves whenever
    a step fails to shrink the residual and grows back after accepted steps.
    """
    R = mdp.check_reward(reward)
    q = value_iteration(mdp, R, tol=tol)

    def residual_of(q):
        pi = boltzmann_response(q, beta, mdp.allowed)
        target = policy_evaluation(mdp, R, pi, tol=tol)
        return pi, target, float(np.abs(target - q).max())

    pi, target, residual = residual_of(q)
    step = 1.0
    for _ in range(max_iter):
        if residual <= tol:
            return q, pi
        q_try = q + step * (target - q)
        pi_try, target_try, res_try = residual_of(q_try)
        if res_try < residual:
            q, pi, target, residual = q_try, pi_try, target_try, res_try
            step = min(1.0, 2.0 * step)
        else:
            step *= 0.5
            if step < 1e-12:
                break
    raise ConvergenceError("Boltzmann fixed point", residual, max_iter)


def _cdf_rows(p: np.ndarray) -> list:
    """Cumulative rows as nested lists, with the tail pinned to exactly 1."""
    c = np.cumsum(p, axis=-1)
    last = p.shape[-1] - 1 - np.argmax((p > 0)[..., ::-1], axis=-1)
    idx = np.arange(p.shape[-1])
    c = np.where(idx >= last[..., None], 1.0, c)
    return c.tolist()


class TrajectorySampler:
    """Samples trajectories of one MDP under varying policies."""

    def __init__(self, mdp: TabularMdp):
        self.mdp = mdp
        self._rho = _cdf_rows(mdp.initial_dist)
        self._trans = _cdf_rows(mdp.transition)
        self._terminal = mdp.terminal.tolist()

    def sample(self, policy, rng: np.random.Generator, max_len: int = DEFAULT_MAX_LEN) -> Trajectory:
        if max_len < 1:
            raise ValueError("max_len must be at least 1")
        pi = _cdf_rows(np.asarray(policy, dtype=float))
        u = rng.random(2 * max_len + 1).tolist()
        s = bisect_right(self._rho, u[0])
        states, actions = [], []
        for t in range(max_len):
            a = bisect_right(pi[s], u[2 * t + 1])
            states.append(s)
            actions.append(a)
            s = bisect_right(self._trans[s][a], u[2 * t + 2])
            if self._terminal[s]:
                return Trajectory(tuple(states), tuple(actions), s, False)
        return Trajectory(tuple(states), tuple(actions), s, True)


def sample_trajectory(mdp: TabularMdp, policy, rng: np.random.Generator,
                      max_len: int = DEFAULT_MAX_LEN) -> Trajectory:
    """Roll out ``policy`` from a start drawn from the initial distribution.

    Ends on entering a terminal state, or after ``max_len`` steps with
    ``truncated=True``.
    """
    return TrajectorySampler(mdp).sample(policy, rng, max_len)


def shape_reward(mdp: TabularMdp, reward, potential) -> np.ndarray:
    """Potential-based shaping in expectation: R + gamma * E[phi(s')] - phi(s)."""
    R = mdp.check_reward(reward)
    phi = np.asarray(potential, dtype=float)
    if phi.shape != (mdp.n_states,) or not np.isfinite(phi).all():
        raise ValueError("potential must be a finite vector over states")
    if (phi[mdp.terminal] != 0).any():
        raise ValueError("potential must vanish on terminal states")
    return R + mdp.discount * (mdp.transition @ phi) - phi[:, None]
