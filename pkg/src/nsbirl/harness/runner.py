"""Experiment runner: demonstrations, inference, aggregation and result files.

Run ``k`` draws all of its randomness from ``SeedSequence([root_seed, k])``,
so runs are independent of each other, of the worker count, and of which
slice of runs a process executes. With ``epsilon_values`` every epsilon
reuses the same run seeds, and an ``avg`` series pools the runs of all
epsilons.
"""

from __future__ import annotations

import json
import logging
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .. import __version__
from ..demonstrators import generate_demonstration
from ..environments import EnvBundle, build_ambiguous, build_gridworld, build_random_mdp, build_two_state
from ..inference import birl_run, posterior_from_loglik, stationary_log_policies
from ..metrics import SERIES_NAMES, MetricSeries, aggregate, exact_two_state_mi, run_metrics
from .config import ConfigError, ExperimentConfig, GridConfig
from .plotting import render_lines_plot

log = logging.getLogger(__name__)

WORKERS_ENV = "NSBIRL_WORKERS"
AVERAGE = "avg"
BASE = "base"


class RunFailure(RuntimeError):
    def __init__(self, run_index: int, root_seed: int, epsilon, cause: Exception):
        super().__init__(f"run {run_index} (seed [{root_seed}, {run_index}], epsilon={epsilon}) failed: "
                         f"{type(cause).__name__}: {cause}")
        self.run_index = run_index


@dataclass
class RunRecord:
    index: int
    epsilon: float | None
    true_theta: int
    final_posteriors: dict[str, list[float]]
    metrics: dict[str, dict[str, np.ndarray]] = field(repr=False)

    def to_json(self) -> dict:
        return {"index": self.index, "epsilon": self.epsilon, "true_theta": self.true_theta,
                "final_posteriors": self.final_posteriors}


@dataclass
class ResultSet:
    config: ExperimentConfig
    series: dict[tuple[str, str], dict[str, MetricSeries]]
    runs: list[RunRecord]
    metadata: dict = field(default_factory=dict)

    def get(self, inferrer: str, name: str, epsilon: str | None = None) -> MetricSeries:
        if epsilon is None:
            epsilon = AVERAGE if self.config.epsilon_values else BASE
        return self.series[inferrer, epsilon][name]


def n_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1


def eps_label(epsilon) -> str:
    return BASE if epsilon is None else f"eps{epsilon:g}"


def _env_seed_free(env: dict) -> bool:
    return not (env["kind"] == "random_mdp" and env.get("seed") is None)


@lru_cache(maxsize=32)
def _fixed_bundle(env_json: str) -> EnvBundle:
    env = json.loads(env_json)
    kind = env["kind"]
    if kind == "two_state":
        return build_two_state(env["epsilon"], env["gamma"])
    if kind == "ambiguous":
        return build_ambiguous(env["seed"], gamma=env["gamma"])
    if kind == "gridworld":
        return build_gridworld(env["epsilon"], env["size"], env["goals"], env["hole"], gamma=env["gamma"])
    return build_random_mdp(env["n_states"], env["seed"], env["gamma"])


@lru_cache(maxsize=128)
def _fixed_policies(env_json: str, beta: float) -> np.ndarray:
    bundle = _fixed_bundle(env_json)
    return stationary_log_policies(bundle.mdp, bundle.hypotheses, beta)


def _env_dict(config: ExperimentConfig, epsilon) -> dict:
    env = config.environment.model_dump()
    if epsilon is not None:
        env["epsilon"] = epsilon
    return env


def _one_run(config: ExperimentConfig, epsilon, k: int) -> RunRecord:
    env = _env_dict(config, epsilon)
    env_json = json.dumps(env, sort_keys=True)
    env_ss, theta_ss, demo_ss = np.random.SeedSequence([config.root_seed, k]).spawn(3)
    fixed = _env_seed_free(env)
    if fixed:
        bundle = _fixed_bundle(env_json)

        def policies(beta):
            return _fixed_policies(env_json, float(beta))
    else:
        bundle = build_random_mdp(env["n_states"], np.random.default_rng(env_ss), env["gamma"])
        cache = {}

        def policies(beta):
            if beta not in cache:
                cache[beta] = stationary_log_policies(bundle.mdp, bundle.hypotheses, beta)
            return cache[beta]

    hyp = bundle.hypotheses
    theta = int(np.random.default_rng(theta_ss).choice(len(hyp), p=hyp.prior))
    demo = config.demonstrator
    policy = np.exp(policies(demo.beta)[theta]) if demo.kind == "stationary" else None
    trajs = generate_demonstration(bundle.mdp, hyp.rewards[theta], demo.demonstrator(), config.n_trajectories,
                                   config.max_len, np.random.default_rng(demo_ss), policy=policy)
    finals, metrics = {}, {}
    for inf in config.inferrers:
        lp = policies(inf.beta) if inf.kind == "stationary" else None
        trace = birl_run(trajs, inf.model(), hyp, bundle.mdp, log_policies=lp)
        metrics[inf.label] = run_metrics(trace, theta)
        finals[inf.label] = posterior_from_loglik(trace, slice(None)).tolist()
    return RunRecord(k, epsilon, theta, finals, metrics)


def _run_task(args) -> RunRecord:
    config, epsilon, k = args
    try:
        return _one_run(config, epsilon, k)
    except Exception as e:  # noqa: BLE001  (reported with seed context)
        raise RunFailure(k, config.root_seed, epsilon, e) from e


def execute_runs(config: ExperimentConfig, workers: int | None = None) -> list[RunRecord]:
    """All per-run records, sorted by (epsilon position, run index)."""
    epsilons = config.epsilon_values or [None]
    tasks = [(config, e, k) for e in epsilons
             for k in range(config.run_offset, config.run_offset + config.n_runs)]
    workers = n_workers() if workers is None else workers
    if workers <= 1 or len(tasks) == 1:
        records = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    order = {e: i for i, e in enumerate(epsilons)}
    return sorted(records, key=lambda r: (order[r.epsilon], r.index))


def aggregate_runs(config: ExperimentConfig, records: list[RunRecord]) -> dict[tuple[str, str], dict[str, MetricSeries]]:
    """Mean series with bootstrap intervals for every (inferrer, epsilon) pair."""
    epsilons = config.epsilon_values or [None]
    groups = {eps_label(e): [r for r in records if r.epsilon == e] for e in epsilons}
    if config.epsilon_values:
        groups[AVERAGE] = list(records)
    out = {}
    for inf in config.inferrers:
        for label, recs in groups.items():
            out[inf.label, label] = {
                name: aggregate(name, np.stack([r.metrics[inf.label][name] for r in recs]), config.n_boot,
                                np.random.default_rng(config.root_seed))
                for name in SERIES_NAMES
            }
    return out


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> ResultSet:
    t0 = time.perf_counter()
    records = execute_runs(config, workers)
    series = aggregate_runs(config, records)
    meta = {"wall_clock_s": round(time.perf_counter() - t0, 3), "version": __version__,
            "python": platform.python_version(), "numpy": np.__version__}
    log.info("experiment finished: %d runs in %.1fs", len(records), meta["wall_clock_s"])
    return ResultSet(config, series, records, meta)


def series_filename(inferrer: str, epsilon: str, name: str) -> str:
    return f"{inferrer}__{epsilon}__{name}.csv"


def write_results(result: ResultSet, out_dir: str | Path | None = None) -> Path:
    """One CSV per series plus ``manifest.json``; returns the directory."""
    out = Path(out_dir or result.config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for (inf, eps), by_name in sorted(result.series.items()):
        for name, s in by_name.items():
            fname = series_filename(inf, eps, name)
            (out / fname).write_text(s.to_csv())
            files.append({"inferrer": inf, "epsilon": eps, "series": name, "file": fname})
    manifest = {
        "config": result.config.model_dump(mode="json"),
        "series": files,
        "runs": [r.to_json() for r in result.runs],
        "metadata": result.metadata,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return out


def load_series(results_dir: str | Path) -> dict[tuple[str, str, str], MetricSeries]:
    d = Path(results_dir)
    manifest = json.loads((d / "manifest.json").read_text())
    return {(f["inferrer"], f["epsilon"], f["series"]): MetricSeries.from_csv((d / f["file"]).read_text())
            for f in manifest["series"]}


@dataclass
class GridResult:
    rows: list[str]
    cols: list[str]
    p_final: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    results: list[ResultSet]

    def to_csv(self) -> str:
        lines = ["demonstrator,inferrer,p_final,ci_low,ci_high"]
        for i, r in enumerate(self.rows):
            for j, c in enumerate(self.cols):
                vals = (float(self.p_final[i, j]), float(self.ci_low[i, j]), float(self.ci_high[i, j]))
                lines.append(f"{r},{c}," + ",".join(repr(v) for v in vals))
        return "\n".join(lines) + "\n"


def run_misspecification_grid(config: GridConfig, workers: int | None = None) -> GridResult:
    """Mean final cumulative posterior at the true hypothesis for every (demonstrator, inferrer) cell.

    Every inferrer of a row sees the same demonstrations.
    """
    results = [run_experiment(config.row_config(d), workers) for d in config.demonstrators]
    shape = (len(config.demonstrators), len(config.inferrers))
    p, lo, hi = np.empty(shape), np.empty(shape), np.empty(shape)
    for i, res in enumerate(results):
        for j, inf in enumerate(config.inferrers):
            s = res.get(inf.label, "P")
            p[i, j] = s.values[-1]
            lo[i, j] = s.ci_low[-1] if s.ci_low is not None else np.nan
            hi[i, j] = s.ci_high[-1] if s.ci_high is not None else np.nan
    return GridResult([d.label for d in config.demonstrators], [c.label for c in config.inferrers],
                      p, lo, hi, results)


def write_grid(grid: GridResult, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "grid.csv").write_text(grid.to_csv())
    for row, res in zip(grid.rows, grid.results):
        write_results(res, out / row)
    return out


def exact_two_state_table(betas, epsilons, gamma: float) -> list[tuple[str, float, float, float]]:
    if len(betas) == 0 or len(epsilons) == 0:
        raise ConfigError("beta grid and epsilon list must be non-empty")
    rows = []
    for kind in ("stationary", "learner"):
        for eps in epsilons:
            for beta in betas:
                rows.append((kind, float(eps), float(beta), exact_two_state_mi(eps, beta, kind, gamma)))
    return rows


def exact_two_state_figure(betas, epsilons, gamma: float, out_dir: str | Path) -> tuple[Path, Path]:
    """Exact two-trajectory MI over a beta grid for both demonstrator kinds; writes CSV and SVG."""
    rows = exact_two_state_table(betas, epsilons, gamma)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "exact_two_state.csv"
    csv_path.write_text("kind,epsilon,beta,mi\n" + "".join(f"{k},{e!r},{b!r},{v!r}\n" for k, e, b, v in rows))
    lines = {}
    for kind, eps, beta, mi in rows:
        lines.setdefault(f"{kind} eps={eps:g}", ([], []))
        lines[f"{kind} eps={eps:g}"][0].append(beta)
        lines[f"{kind} eps={eps:g}"][1].append(mi)
    svg = render_lines_plot(lines, title=f"Exact MI of two trajectories (gamma={gamma:g})",
                            xlabel="beta", ylabel="I(theta; tau1, tau2) [bits]")
    svg_path = out / "exact_two_state.svg"
    svg_path.write_text(svg)
    return csv_path, svg_path
