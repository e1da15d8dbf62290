"""Optional figure output for the CLI report path (Agg backend, files only)."""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .instance import Instance, Plan  # noqa: E402

_META = {"Software": None}


def _save(fig, path) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.savefig(path, dpi=110, bbox_inches="tight", metadata=_META)
    plt.close(fig)
    return str(path)


def plot_plan(plan: Plan, inst: Instance, path) -> str:
    """Top view: UGV route on the ground, UAV tours in colour."""
    fig, ax = plt.subplots(figsize=(6, 6))
    cmap = plt.get_cmap("tab10")
    ground = [inst.start]
    for k, t in enumerate(plan.tours):
        xy = np.array([(p.x, p.y) for p in t.uav_path()])
        ax.plot(xy[:, 0], xy[:, 1], "-o", ms=3, lw=1.2, color=cmap(k % 10), label=f"tour {k + 1}")
        ground += [t.release_ground, t.collect_ground]
    ground.append(inst.final)
    g = np.array([(p.x, p.y) for p in ground])
    ax.plot(g[:, 0], g[:, 1], "--", color="0.3", lw=1.0, label="UGV")
    ax.plot(*inst.start[:2], "ks", ms=7, clip_on=False)
    ax.plot(*inst.final[:2], "k*", ms=10, clip_on=False)
    ax.set_xlim(0, inst.env_bounds[0])
    ax.set_ylim(0, inst.env_bounds[1])
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.legend(fontsize=7, loc="upper left")
    return _save(fig, path)


def plot_failure_rates(rows: list[dict], path, risk: float | None = None) -> str:
    """Bar chart of empirical failure rate per (instance, method) row."""
    fig, ax = plt.subplots(figsize=(max(4, 0.5 * len(rows) + 2), 3.5))
    labels = [f"{r['instance']}\n{r['method']}" if "method" in r else str(r["instance"]) for r in rows]
    ax.bar(range(len(rows)), [r["p_hat"] for r in rows], color="tab:blue")
    if risk is not None:
        ax.axhline(risk, color="tab:red", ls="--", lw=1, label="risk level")
        ax.legend(fontsize=7)
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, rotation=90, fontsize=6)
    ax.set_ylabel("empirical failure rate")
    return _save(fig, path)


def plot_scaling(ns, times, exponent: float, path) -> str:
    """Log-log wall time against n with the fitted power law."""
    ns = np.asarray(ns, dtype=float)
    times = np.asarray(times, dtype=float)
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.loglog(ns, times, "o", label="measured")
    coef = np.polyfit(np.log(ns), np.log(times), 1)
    grid = np.linspace(ns.min(), ns.max(), 50)
    ax.loglog(grid, np.exp(np.polyval(coef, np.log(grid))), "-",
              label=f"fit n^{exponent:.2f}")
    ax.set_xlabel("n")
    ax.set_ylabel("wall time [s]")
    ax.legend(fontsize=7)
    return _save(fig, path)
