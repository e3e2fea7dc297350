"""Figures and markdown summaries from finished run directories.

All plots are SVG via the Agg backend so they render headless. Every
reader tolerates missing inputs: a run without metrics.csv gets a
notice line instead of a curve, and an empty run list still produces a
header-only report.md.
"""
from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import oracle
from .pipeline import read_metrics

_COLORS = plt.rcParams["axes.prop_cycle"].by_key()["color"]


def plot_reward_curves(runs, out_path) -> Path:
    """runs: iterable of (label, metrics rows). One curve per run."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, (label, rows) in enumerate(runs):
        x = [row["update"] for row in rows]
        y = [row["reward_mean"] for row in rows]
        ax.plot(x, y, label=label, color=_COLORS[i % len(_COLORS)])
    ax.set_xlabel("update")
    ax.set_ylabel("mean rollout reward")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return Path(out_path)


def plot_profile_overlay(pre_blob: dict, post_blob, out_path) -> Path:
    """Pooled relative-change profile before vs after training."""
    fig, ax = plt.subplots(figsize=(6, 4))
    pre = pre_blob["pooled"]["values"]
    ax.plot(range(len(pre)), pre, marker="o", label="pretrained")
    if post_blob is not None:
        post = post_blob["pooled"]["values"]
        ax.plot(range(len(post)), post, marker="s", label="after training")
    ax.set_xlabel("transition")
    ax.set_ylabel("mean relative L1 change")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return Path(out_path)


def plot_samples(samples_blob: dict, out_path) -> Path:
    """Final states per policy, one panel each, colored by condition."""
    samples = samples_blob["samples"]
    kinds = ("trained", "reference", "hybrid")
    fig, axes = plt.subplots(1, len(kinds), figsize=(12, 4), sharex=True, sharey=True)
    for ax, kind in zip(axes, kinds):
        for entry in samples:
            pts = np.asarray(entry[kind], dtype=np.float64)
            c = entry["condition"]
            ax.scatter(
                pts[:, 0], pts[:, 1], s=4, alpha=0.5,
                color=_COLORS[c % len(_COLORS)], label=f"condition {c}",
            )
        ax.set_title(kind)
        ax.set_aspect("equal")
    axes[0].legend(fontsize=7, markerscale=2)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return Path(out_path)


def plot_win_region(out_path, t_max: int = 12) -> Path:
    """Two-panel map of where chunk attribution beats step attribution.

    Left panel: the closed-form quadratic threshold. Right panel: the
    exact squared-distance comparison. The panels disagree on a band of
    (T, m) pairs, which is the point of showing both.
    """
    rows = oracle.win_region_rows(t_max)
    t_values = sorted({row["T"] for row in rows})
    m_values = sorted({row["m"] for row in rows})
    shape = (len(m_values), len(t_values))
    quad = np.full(shape, np.nan)
    dist = np.full(shape, np.nan)
    for row in rows:
        i = m_values.index(row["m"])
        j = t_values.index(row["T"])
        quad[i, j] = 1.0 if row["chunk_wins_quadratic"] else 0.0
        dist[i, j] = 1.0 if row["chunk_wins_distance"] else 0.0
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for ax, grid, title in (
        (axes[0], quad, "quadratic threshold"),
        (axes[1], dist, "exact distance comparison"),
    ):
        ax.imshow(
            grid, origin="lower", aspect="auto", cmap="RdYlGn", vmin=0, vmax=1,
            extent=(t_values[0] - 0.5, t_values[-1] + 0.5, m_values[0] - 0.5, m_values[-1] + 0.5),
        )
        ax.set_title(f"chunk wins: {title}")
        ax.set_xlabel("T (transitions)")
    axes[0].set_ylabel("m (inactive-window half-width)")
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return Path(out_path)


def run_plots(run_dir) -> list:
    """Standard per-run figures under <run_dir>/plots/."""
    run_dir = Path(run_dir)
    plots_dir = run_dir / "plots"
    plots_dir.mkdir(exist_ok=True)
    written = []
    metrics_path = run_dir / "metrics.csv"
    if metrics_path.exists():
        rows = read_metrics(metrics_path)
        written.append(
            plot_reward_curves([(run_dir.name, rows)], plots_dir / "reward_curve.svg")
        )
    profile_path = run_dir / "profile.json"
    if profile_path.exists():
        pre = json.loads(profile_path.read_text())
        post_path = run_dir / "profile_post.json"
        post = json.loads(post_path.read_text()) if post_path.exists() else None
        written.append(plot_profile_overlay(pre, post, plots_dir / "profile.svg"))
    samples_path = run_dir / "samples.json"
    if samples_path.exists():
        blob = json.loads(samples_path.read_text())
        written.append(plot_samples(blob, plots_dir / "samples.svg"))
    return written


def _final_reward(rows) -> float:
    return rows[-1]["reward_mean"] if rows else float("nan")


def emit_report(run_dirs, out_dir) -> Path:
    """Cross-run markdown report plus shared figures.

    Accepts any mix of finished, failed, and partial run directories;
    whatever a run is missing is noted rather than fatal. An empty list
    still writes a header-only report.md.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["# Run report", ""]
    run_dirs = [Path(d) for d in run_dirs]
    curves = []
    notices = []
    table = []
    for run_dir in run_dirs:
        name = run_dir.name
        metrics_path = run_dir / "metrics.csv"
        if not metrics_path.exists():
            notices.append(f"- `{name}`: no metrics.csv, skipped")
            continue
        rows = read_metrics(metrics_path)
        curves.append((name, rows))
        eval_path = run_dir / "eval.json"
        overall = {}
        if eval_path.exists():
            overall = json.loads(eval_path.read_text())["overall"]
        table.append(
            (
                name,
                _final_reward(rows),
                overall.get("trained_ode"),
                overall.get("reference_ode"),
                overall.get("hybrid"),
            )
        )
    if curves:
        plot_reward_curves(curves, out_dir / "reward_curves.svg")
        lines += ["![reward curves](reward_curves.svg)", ""]
    plot_win_region(out_dir / "win_region.svg")
    lines += ["![win region](win_region.svg)", ""]
    if table:
        lines += [
            "| run | final rollout reward | trained ODE | reference ODE | hybrid |",
            "| --- | --- | --- | --- | --- |",
        ]
        for name, final, trained, reference, hybrid in table:
            def cell(v):
                return "n/a" if v is None else format(v, ".4f")

            lines.append(
                f"| {name} | {cell(final)} | {cell(trained)} | {cell(reference)} | {cell(hybrid)} |"
            )
        lines.append("")
    if notices:
        lines += ["## Notices", "", *notices, ""]
    (out_dir / "report.md").write_text("\n".join(lines))
    return out_dir / "report.md"
