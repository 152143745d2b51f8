"""The four environment families and their reward hypothesis spaces.

Rewards that the original settings attach to reaching a state (a fruit, a
goal cell) are delivered by an explicit consume step: the state offers a
single action that pays the reward and moves to an absorbing ``done`` state.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .mdp import HypothesisSpace, TabularMdp, shape_reward

TWO_STATE_GAMMA = 0.9
AMBIGUOUS_GAMMA = 0.9
GRIDWORLD_GAMMA = 0.98
RANDOM_MDP_GAMMA = 0.5

UP, DOWN, LEFT, RIGHT = range(4)
_MOVES = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}
_PERPENDICULAR = {UP: (LEFT, RIGHT), DOWN: (LEFT, RIGHT), LEFT: (UP, DOWN), RIGHT: (UP, DOWN)}


@dataclass(frozen=True, eq=False)
class EnvBundle:
    mdp: TabularMdp
    hypotheses: HypothesisSpace
    label: str
    true_theta_index: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.hypotheses.rewards.shape[1:] != (self.mdp.n_states, self.mdp.n_actions):
            raise ValueError("hypothesis rewards do not match the MDP shape")
        if self.true_theta_index is not None and not 0 <= self.true_theta_index < len(self.hypotheses):
            raise ValueError("true_theta_index out of range")

    def to_json(self) -> dict:
        mdp = self.mdp
        return {
            "label": self.label,
            "n_states": mdp.n_states,
            "n_actions": mdp.n_actions,
            "discount": mdp.discount,
            "transition": mdp.transition.ravel().tolist(),
            "initial_dist": mdp.initial_dist.tolist(),
            "terminal": mdp.terminal.tolist(),
            "allowed": mdp.allowed.ravel().tolist(),
            "rewards": [r.ravel().tolist() for r in self.hypotheses.rewards],
            "hypothesis_labels": list(self.hypotheses.labels),
            "prior": self.hypotheses.prior.tolist(),
            "true_theta_index": self.true_theta_index,
            "meta": self.meta,
        }


def _as_rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def _flat_simplex_rows(rng: np.random.Generator, shape: tuple[int, ...], n: int) -> np.ndarray:
    rows = rng.dirichlet(np.ones(n), size=shape)
    return rows / rows.sum(axis=-1, keepdims=True)


def build_two_state(epsilon: float, gamma: float = TWO_STATE_GAMMA) -> EnvBundle:
    """Start state with actions A/B leading to an apple or a banana.

    A reaches the apple with probability ``1 - epsilon`` and B the banana;
    otherwise the outcome is switched. The two hypotheses pay 1 for
    consuming the preferred fruit.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    start, apple, banana, done = range(4)
    T = np.zeros((4, 2, 4))
    T[start, 0, [apple, banana]] = 1 - epsilon, epsilon
    T[start, 1, [apple, banana]] = epsilon, 1 - epsilon
    T[[apple, banana, done], :, done] = 1.0
    allowed = np.ones((4, 2), bool)
    allowed[[apple, banana], 1] = False
    mdp = TabularMdp(T, np.eye(4)[start], gamma, np.array([False, False, False, True]), allowed,
                     meta={"states": ["start", "apple", "banana", "done"], "actions": ["A", "B"]})
    rewards = np.zeros((2, 4, 2))
    rewards[0, apple, 0] = 1.0
    rewards[1, banana, 0] = 1.0
    hyp = HypothesisSpace(rewards, _uniform(2), ("apple", "banana"))
    return EnvBundle(mdp, hyp, "two_state", meta={"epsilon": epsilon, "gamma": gamma})


def build_ambiguous(rng=None, n_shapings: int = 3, gamma: float = AMBIGUOUS_GAMMA) -> EnvBundle:
    """4-state, 3-action MDP whose hypotheses are potential-shaped copies of one reward."""
    rng = _as_rng(rng)
    S, A = 4, 3
    T = _flat_simplex_rows(rng, (S, A), S)
    mdp = TabularMdp(T, _uniform(S), gamma, np.zeros(S, bool))
    base = rng.uniform(-1.0, 1.0, size=(S, A))
    potentials = rng.uniform(-1.0, 1.0, size=(n_shapings, S))
    rewards = [base] + [shape_reward(mdp, base, phi) for phi in potentials]
    labels = ("base",) + tuple(f"shaped{j + 1}" for j in range(n_shapings))
    hyp = HypothesisSpace(np.stack(rewards), _uniform(len(rewards)), labels)
    return EnvBundle(mdp, hyp, "ambiguous", meta={"potentials": potentials.tolist(), "gamma": gamma})


def build_gridworld(epsilon: float, size: int = 5, goals=((0, 4), (4, 0)), hole=(2, 2),
                    values=range(5), gamma: float = GRIDWORLD_GAMMA) -> EnvBundle:
    """Slippery gridworld with one hole and two goal cells.

    The chosen direction is taken with probability ``1 - epsilon`` and each
    perpendicular direction with ``epsilon / 2``; moves off the grid stay put.
    The hole is terminal. Each goal offers one consume action paying its
    value and ending the episode. Hypotheses range over all pairs of goal
    values, indexed ``k = theta1 * len(values) + theta2``.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    goals = [tuple(g) for g in goals]
    hole = tuple(hole)
    n_cells = size * size
    done = n_cells
    S, A = n_cells + 1, 4

    def cell(r, c):
        return r * size + c

    T = np.zeros((S, A, S))
    allowed = np.ones((S, A), bool)
    terminal = np.zeros(S, bool)
    terminal[[cell(*hole), done]] = True
    T[done, :, done] = 1.0
    T[cell(*hole), :, cell(*hole)] = 1.0
    for r in range(size):
        for c in range(size):
            s = cell(r, c)
            if (r, c) == hole:
                continue
            if (r, c) in goals:
                T[s, :, done] = 1.0
                allowed[s, 1:] = False
                continue
            for a in range(A):
                side1, side2 = _PERPENDICULAR[a]
                for d, p in ((a, 1 - epsilon), (side1, epsilon / 2), (side2, epsilon / 2)):
                    dr, dc = _MOVES[d]
                    nr, nc = r + dr, c + dc
                    if not (0 <= nr < size and 0 <= nc < size):
                        nr, nc = r, c
                    T[s, a, cell(nr, nc)] += p

    starts = ~terminal
    for g in goals:
        starts[cell(*g)] = False
    rho = starts / starts.sum()
    mdp = TabularMdp(T, rho, gamma, terminal, allowed,
                     meta={"size": size, "goals": goals, "hole": hole,
                           "actions": ["up", "down", "left", "right"]})
    values = list(values)
    rewards, labels = [], []
    for v1, v2 in itertools.product(values, values):
        R = np.zeros((S, A))
        R[cell(*goals[0]), 0] = v1
        R[cell(*goals[1]), 0] = v2
        rewards.append(R)
        labels.append(f"({v1},{v2})")
    hyp = HypothesisSpace(np.stack(rewards), _uniform(len(rewards)), tuple(labels))
    meta = {"epsilon": epsilon, "gamma": gamma, "size": size, "goals": [list(g) for g in goals],
            "hole": list(hole), "values": values}
    return EnvBundle(mdp, hyp, "gridworld", meta=meta)


def build_random_mdp(n_states: int, rng=None, gamma: float = RANDOM_MDP_GAMMA) -> EnvBundle:
    """Random 2-action MDP; states 0 and 1 pay +-1 per action, 16 hypotheses."""
    if n_states not in (3, 4, 5, 6):
        raise ValueError("n_states must be one of 3, 4, 5, 6")
    rng = _as_rng(rng)
    A = 2
    T = _flat_simplex_rows(rng, (n_states, A), n_states)
    mdp = TabularMdp(T, _uniform(n_states), gamma, np.zeros(n_states, bool))
    rewards, labels = [], []
    for signs in itertools.product((-1.0, 1.0), repeat=4):
        R = np.zeros((n_states, A))
        R[:2, :] = np.reshape(signs, (2, 2))
        rewards.append(R)
        labels.append("".join("+" if x > 0 else "-" for x in signs))
    hyp = HypothesisSpace(np.stack(rewards), _uniform(16), tuple(labels))
    return EnvBundle(mdp, hyp, "random_mdp", meta={"n_states": n_states, "gamma": gamma})
