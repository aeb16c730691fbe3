"""Optional figures written next to the CSV/JSON outputs (only with --plot)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

DAYS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")


def _save(fig, path):
    fig.tight_layout()
    # fixed metadata keeps reruns byte-identical
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_solve(result: dict, path):
    H = result["horizon_days"]
    x = np.arange(1, H + 1)
    fig, ax = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    ax[0].bar(x, result["duration"], color="tab:blue")
    ax[0].set_ylabel("duration (hr)")
    ax[1].plot(x, result["inventory"], marker="o", label="inventory I")
    ax[1].bar(x, result["production"], alpha=0.4, color="tab:green", label="production Q")
    ax[1].set_xlabel("day")
    ax[1].legend()
    ax[0].set_title(f"objective {result['objective']:.4f}, {result['horizon_weeks']} week(s)")
    _save(fig, path)


def plot_synth(summary: dict, path):
    fig, ax = plt.subplots(2, 2, figsize=(10, 7))
    ax[0, 0].bar(DAYS, summary["participation_by_day"])
    ax[0, 0].set_title("participation by day")
    e = np.asarray(summary["duration_hist"]["edges_hr"])
    ax[0, 1].bar(e[:-1], summary["duration_hist"]["counts"], width=np.diff(e), align="edge")
    ax[0, 1].set_title("activity duration (hr)")
    e = np.asarray(summary["tt_hist"]["edges_min"])
    ax[1, 0].bar(e[:-1], summary["tt_hist"]["counts"], width=np.diff(e), align="edge")
    ax[1, 0].set_title(f"one-way travel time (min), mean {summary['mean_one_way_tt_min']:.1f}")
    n = summary["participations_per_week"]
    ax[1, 1].bar(np.arange(len(n)), n)
    ax[1, 1].set_title(f"participations per week, mean {summary['mean_weekly_participation']:.2f}")
    _save(fig, path)


def plot_surface(names, grid1, grid2, values, path):
    fig, ax = plt.subplots(figsize=(6, 5))
    v = np.where(np.isfinite(values), values, np.nan)
    im = ax.pcolormesh(grid2, grid1, v, shading="nearest", cmap="viridis")
    i, j = np.unravel_index(np.nanargmax(v), v.shape)
    ax.plot(grid2[j], grid1[i], "r*", ms=14)
    ax.set_xlabel(names[1])
    ax.set_ylabel(names[0])
    fig.colorbar(im, label="log-likelihood")
    _save(fig, path)


def plot_trace(trace, free, path):
    fig, ax = plt.subplots(len(free) + 1, 1, figsize=(7, 2.2 * (len(free) + 1)), sharex=True)
    it = [r["iteration"] for r in trace]
    for a, name in zip(ax, list(free) + ["loglik"]):
        a.plot(it, [r[name] for r in trace], marker=".")
        a.set_ylabel(name)
    ax[-1].set_xlabel("iteration")
    _save(fig, path)
