"""Entropy, mutual-information and posterior metrics over inference traces.

Per-run series are indexed by the number of observed trajectories ``i``;
index 0 is the prior. ``M`` and ``P`` use the cumulative posterior after
trajectories ``0..i-1``, ``m`` and ``p`` the posterior from trajectory
``i-1`` alone. Information is in bits.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .demonstrators import LearnerState, apply_update, fill_rewards, learner_policy
from .environments import TWO_STATE_GAMMA, build_two_state
from .inference import InferenceTrace, normalize_log, cumulative_posteriors, single_posteriors
from .mdp import TabularMdp, Trajectory, boltzmann_fixed_point

SERIES_NAMES = ("m", "M", "p", "P")
CSV_COLUMNS = ("series", "i", "value", "ci_low", "ci_high")


@dataclass(frozen=True, eq=False)
class MetricSeries:
    name: str
    values: np.ndarray
    ci_low: np.ndarray | None = None
    ci_high: np.ndarray | None = None

    def __post_init__(self):
        if self.name not in SERIES_NAMES:
            raise ValueError(f"unknown series {self.name!r}")

    def rows(self) -> list[tuple]:
        lo = self.ci_low if self.ci_low is not None else [None] * len(self.values)
        hi = self.ci_high if self.ci_high is not None else [None] * len(self.values)
        return [(self.name, i, float(v), _opt(l), _opt(h)) for i, (v, l, h) in enumerate(zip(self.values, lo, hi))]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for name, i, v, lo, hi in self.rows():
            w.writerow((name, i, repr(v), "" if lo is None else repr(lo), "" if hi is None else repr(hi)))
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> MetricSeries:
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty series CSV")
        if tuple(rows[0].keys()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV columns {tuple(rows[0].keys())}")
        if [int(r["i"]) for r in rows] != list(range(len(rows))):
            raise ValueError("series indices must run 0..n")
        values = np.array([float(r["value"]) for r in rows])
        has_ci = rows[0]["ci_low"] != ""
        lo = np.array([float(r["ci_low"]) for r in rows]) if has_ci else None
        hi = np.array([float(r["ci_high"]) for r in rows]) if has_ci else None
        return cls(rows[0]["series"], values, lo, hi)


def _opt(x):
    return None if x is None else float(x)


def entropy(dist) -> float:
    """Shannon entropy in bits, with 0 log 0 = 0."""
    p = np.asarray(dist, dtype=float)
    if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("not a probability distribution")
    return float(_entropy_rows(p))


def _entropy_rows(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log2(p), 0.0)
    return -terms.sum(axis=-1)


def run_metrics(trace: InferenceTrace, true_theta: int | None = None) -> dict[str, np.ndarray]:
    """Per-run m, M (and p, P when ``true_theta`` is given), each of length n + 1."""
    h_prior = _entropy_rows(normalize_log(trace.log_prior))
    cum = cumulative_posteriors(trace)
    single = single_posteriors(trace)
    out = {
        "M": h_prior - _entropy_rows(cum),
        "m": np.concatenate([[0.0], h_prior - _entropy_rows(single)]),
    }
    out["M"][0] = 0.0
    if true_theta is not None:
        out["P"] = cum[:, true_theta].copy()
        out["p"] = np.concatenate([[cum[0, true_theta]], single[:, true_theta]])
    return out


def bootstrap_ci(samples, level: float = 0.95, n_boot: int = 1000, rng: np.random.Generator | None = None):
    """Percentile bootstrap interval for the mean over axis 0.

    ``samples`` may be a vector or a (runs, columns) array; in the second
    case one interval per column is returned.
    """
    x = np.asarray(samples, dtype=float)
    if x.shape[0] == 0:
        raise ValueError("need at least one sample")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if rng is None:
        rng = np.random.default_rng(0)
    idx = rng.integers(0, x.shape[0], size=(n_boot, x.shape[0]))
    means = x[idx].mean(axis=1)
    lo, hi = np.quantile(means, [(1 - level) / 2, (1 + level) / 2], axis=0)
    # a mean never leaves the sample range; clipping removes rounding spill
    lo = np.clip(lo, x.min(axis=0), x.max(axis=0))
    hi = np.clip(hi, x.min(axis=0), x.max(axis=0))
    if x.ndim == 1:
        return float(lo), float(hi)
    return lo, hi


def aggregate(name: str, per_run: np.ndarray, n_boot: int = 1000, rng: np.random.Generator | None = None,
              level: float = 0.95) -> MetricSeries:
    per_run = np.asarray(per_run, dtype=float)
    values = per_run.mean(axis=0)
    if n_boot <= 0:
        return MetricSeries(name, values)
    lo, hi = bootstrap_ci(per_run, level, n_boot, rng)
    # the interval must bracket the point estimate
    return MetricSeries(name, values, np.minimum(lo, values), np.maximum(hi, values))


def _check_lengths(traces: Sequence[InferenceTrace]):
    if not traces:
        raise ValueError("need at least one trace")
    if len({t.n_trajectories for t in traces}) != 1:
        raise ValueError("all traces must have the same number of trajectories")


def mi_series(traces: Sequence[InferenceTrace], prior=None, n_boot: int = 0,
              rng: np.random.Generator | None = None) -> tuple[MetricSeries, MetricSeries]:
    """Monte-Carlo (m, M): prior entropy minus mean posterior entropy over runs."""
    _check_lengths(traces)
    if prior is not None:
        traces = [InferenceTrace(t.loglik, np.log(np.asarray(prior, dtype=float))) for t in traces]
    per = [run_metrics(t) for t in traces]
    return (aggregate("m", np.stack([r["m"] for r in per]), n_boot, rng),
            aggregate("M", np.stack([r["M"] for r in per]), n_boot, rng))


def posterior_series(traces: Sequence[InferenceTrace], true_thetas: Sequence[int], n_boot: int = 0,
                     rng: np.random.Generator | None = None) -> tuple[MetricSeries, MetricSeries]:
    """Mean posterior mass at the true hypothesis: (p, P)."""
    _check_lengths(traces)
    if len(true_thetas) != len(traces):
        raise ValueError("one true hypothesis per trace is required")
    per = [run_metrics(t, k) for t, k in zip(traces, true_thetas)]
    return (aggregate("p", np.stack([r["p"] for r in per]), n_boot, rng),
            aggregate("P", np.stack([r["P"] for r in per]), n_boot, rng))


def enumerate_trajectories(mdp: TabularMdp, policy: np.ndarray, max_len: int) -> list[tuple[Trajectory, float]]:
    """All trajectories with positive probability, for short-horizon MDPs."""
    out = []

    def extend(states, actions, s, prob):
        if len(states) == max_len:
            out.append((Trajectory(tuple(states), tuple(actions), s, True), prob))
            return
        for a in np.flatnonzero(policy[s] > 0):
            for s2 in np.flatnonzero(mdp.transition[s, a] > 0):
                p = prob * policy[s, a] * mdp.transition[s, a, s2]
                if mdp.terminal[s2]:
                    out.append((Trajectory(tuple(states) + (s,), tuple(actions) + (int(a),), int(s2), False), p))
                else:
                    extend(states + [s], actions + [int(a)], int(s2), p)

    for s0 in np.flatnonzero(mdp.initial_dist > 0):
        extend([], [], int(s0), mdp.initial_dist[s0])
    return out


def exact_two_state_mi(epsilon: float, beta: float, kind: str, gamma: float = TWO_STATE_GAMMA,
                       lam: float = 1.0, n_trajectories: int = 2) -> float:
    """I(theta; tau_1, ..., tau_n) in bits for the apple/banana MDP, by enumeration.

    ``kind`` is ``"stationary"`` (Boltzmann fixed point) or ``"learner"``
    (TD(lam) learner, direct evaluation by default, updated after every
    trajectory).
    """
    if n_trajectories < 1:
        raise ValueError("n_trajectories must be at least 1")
    bundle = build_two_state(epsilon, gamma)
    mdp, hyp = bundle.mdp, bundle.hypotheses
    joint: dict[tuple[Trajectory, ...], np.ndarray] = defaultdict(lambda: np.zeros(len(hyp)))

    def stationary(k, pi):
        first = enumerate_trajectories(mdp, pi, 2)
        for combo in itertools.product(first, repeat=n_trajectories):
            joint[tuple(t for t, _ in combo)][k] += hyp.prior[k] * math.prod(p for _, p in combo)

    def learner(k, R, state, prefix, prob):
        if len(prefix) == n_trajectories:
            joint[prefix][k] += hyp.prior[k] * prob
            return
        for t, p in enumerate_trajectories(mdp, learner_policy(state), 2):
            learner(k, R, apply_update(state, fill_rewards(t, R)), prefix + (t,), prob * p)

    for k, R in enumerate(hyp.rewards):
        if kind == "stationary":
            stationary(k, boltzmann_fixed_point(mdp, R, beta)[1])
        elif kind == "learner":
            learner(k, R, LearnerState.fresh(mdp, beta, lam), (), 1.0)
        else:
            raise ValueError(f"unknown demonstrator kind {kind!r}")
    table = np.array(list(joint.values()))
    p_tau = table.sum(axis=1, keepdims=True)
    ratio = table / (p_tau * hyp.prior[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(table > 0, table * np.log2(ratio), 0.0)
    return float(terms.sum())
