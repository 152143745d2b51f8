import itertools

import numpy as np
import pytest

from nsbirl.mdp import TabularMdp

ACCEPTANCE_LINES: list[str] = []


def random_mdp(rng, n_states=3, n_actions=2, discount=0.5, n_terminal=0):
    """Random MDP; the last ``n_terminal`` states are absorbing terminals."""
    T = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    terminal = np.zeros(n_states, bool)
    if n_terminal:
        terminal[-n_terminal:] = True
        for s in range(n_states - n_terminal, n_states):
            T[s] = 0.0
            T[s, :, s] = 1.0
    T /= T.sum(axis=-1, keepdims=True)
    rho = (~terminal).astype(float)
    rho /= rho.sum()
    return TabularMdp(T, rho, discount, terminal)


def chain(n=3, discount=0.9):
    """States 0..n-1 then terminal n; action 0 advances, action 1 stays."""
    T = np.zeros((n + 1, 2, n + 1))
    for s in range(n):
        T[s, 0, s + 1] = 1.0
        T[s, 1, s] = 1.0
    T[n, :, n] = 1.0
    terminal = np.zeros(n + 1, bool)
    terminal[n] = True
    return TabularMdp(T, np.eye(n + 1)[0], discount, terminal)


def deterministic_policies(n_states, n_actions):
    for choice in itertools.product(range(n_actions), repeat=n_states):
        pi = np.zeros((n_states, n_actions))
        pi[np.arange(n_states), choice] = 1.0
        yield pi


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
