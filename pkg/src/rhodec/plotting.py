"""Figure rendering for the CLI report paths.

Figures are written to files next to the delimited output; the Agg backend
is forced so headless batch runs work everywhere.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.labelsize": 10,
    "font.size": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "lines.linewidth": 1.6,
}

_POLICY_COLORS = {
    "optimal": "k",
    "cameras_only": "tab:blue",
    "fixed_roles_1": "tab:red",
    "fixed_roles_2": "tab:cyan",
    "turn_taking_1": "tab:green",
    "turn_taking_2": "m",
    "random": "tab:gray",
}


def apply_style():
    matplotlib.rcParams.update(_STYLE)


def save_figure(fig, path, dpi=150):
    fig.savefig(path, dpi=dpi, bbox_inches="tight")
    plt.close(fig)
    return path


def sweep_figure(rows):
    """Policy values against the initial neutral-status probability, one
    line per policy kind."""
    apply_style()
    fig, ax = plt.subplots()
    kinds = []
    for row in rows:
        if row.policy not in kinds:
            kinds.append(row.policy)
    for kind in kinds:
        pts = sorted((r.prior_neutral, r.value) for r in rows if r.policy == kind)
        xs, ys = zip(*pts)
        ax.plot(xs, ys, label=kind, color=_POLICY_COLORS.get(kind),
                lw=2.2 if kind == "optimal" else 1.4)
    ax.set_xlabel("initial probability of neutral status")
    ax.set_ylabel("policy value")
    ax.legend(loc="best")
    return fig


def simulation_figure(traces, controller):
    """Mean cumulative reward over the episode with a min/max envelope."""
    apply_style()
    fig, ax = plt.subplots()
    cumulative = np.array([[rec.cumulative for rec in t.records] for t in traces])
    steps = np.arange(cumulative.shape[1])
    ax.plot(steps, cumulative.mean(axis=0), color="k", label=f"{controller} (mean)")
    ax.fill_between(steps, cumulative.min(axis=0), cumulative.max(axis=0),
                    color="k", alpha=0.15, label="min/max over runs")
    ax.set_xlabel("decision step")
    ax.set_ylabel("cumulative reward")
    ax.legend(loc="best")
    return fig


def tracking_figure(rows, controller):
    """Differential entropy of the position estimate over time; interfered
    steps are marked."""
    apply_style()
    fig, ax = plt.subplots()
    steps = [r.step for r in rows]
    entropy = [r.entropy_nats for r in rows]
    ax.plot(steps, entropy, color="tab:blue", label=controller)
    hit = [(r.step, r.entropy_nats) for r in rows if r.interfered]
    if hit:
        xs, ys = zip(*hit)
        ax.scatter(xs, ys, color="tab:red", s=12, zorder=3, label="interference")
    ax.set_xlabel("time step (s)")
    ax.set_ylabel("differential entropy (nats)")
    ax.legend(loc="best")
    return fig
