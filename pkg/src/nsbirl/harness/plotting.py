"""Deterministic SVG figures through matplotlib's SVG backend."""

from __future__ import annotations

import io
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ..metrics import MetricSeries  # noqa: E402

_STABLE_RC = {"svg.hashsalt": "nsbirl", "svg.fonttype": "none", "path.simplify": False}
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
           "#7f7f7f", "#bcbd22"]


def _to_svg(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return buf.getvalue()


def build_series_figure(series: Mapping[str, MetricSeries], title: str = "", ylabel: str | None = None):
    if not series:
        raise ValueError("nothing to plot")
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for n, (label, s) in enumerate(series.items()):
        color = _COLORS[n % len(_COLORS)]
        x = list(range(len(s.values)))
        if s.ci_low is not None and s.ci_high is not None:
            band = ax.fill_between(x, s.ci_low, s.ci_high, color=color, alpha=0.2, linewidth=0)
            band.set_gid(f"ci-{n}")
        (line,) = ax.plot(x, s.values, color=color, label=label)
        line.set_gid(f"series-{n}")
    ax.set_xlabel("trajectories observed (i)")
    ax.set_ylabel(ylabel or next(iter(series.values())).name)
    ax.set_title(title)
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    return fig


def render_series_plot(series: Mapping[str, MetricSeries], title: str = "", ylabel: str | None = None) -> str:
    """SVG line plot, one line per series with its shaded interval band."""
    with plt.rc_context(_STABLE_RC):
        return _to_svg(build_series_figure(series, title, ylabel))


def render_lines_plot(lines: Mapping[str, tuple[Sequence[float], Sequence[float]]], title: str = "",
                      xlabel: str = "", ylabel: str = "") -> str:
    if not lines:
        raise ValueError("nothing to plot")
    with plt.rc_context(_STABLE_RC):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for n, (label, (x, y)) in enumerate(lines.items()):
            style = "-" if label.startswith("learner") else "--"
            ax.plot(x, y, style, color=_COLORS[n % len(_COLORS)], label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.legend(loc="best", fontsize="x-small", ncol=2)
        fig.tight_layout()
        return _to_svg(fig)
