"""Figure rendering for the report path.

Every figure is built from the small payloads scenarios embed in their
reports, so rendering never re-runs a simulation.  Files are written next
to the delimited outputs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import oracles  # noqa: E402

_DPI = 120


def _save(fig, out):
    fig.tight_layout()
    fig.savefig(out, dpi=_DPI)
    plt.close(fig)
    return str(out)


def solution_figure(sol, path, out):
    """Solution components (and the driving path, faint) against time."""
    fig, ax = plt.subplots(figsize=(7, 4))
    t = sol.grid.nodes
    for j in range(sol.dim):
        ax.plot(t, sol.values[j], lw=1.0, label=f"X{j + 1}")
    if path is not None:
        for j in range(path.dim):
            ax.plot(path.grid.nodes, path.values[j], lw=0.5, alpha=0.35,
                    color="gray")
    ax.set_xlabel("t")
    ax.set_ylabel("value")
    ax.set_title(sol.construction)
    ax.legend(loc="best", fontsize=8)
    return _save(fig, out)


def pair_figure(sol_a, sol_b, out):
    """The two solutions of a duplicate pair, one panel per component."""
    dim = sol_a.dim
    fig, axes = plt.subplots(dim, 1, figsize=(7, 2.2 * dim), sharex=True)
    axes = np.atleast_1d(axes)
    for j, ax in enumerate(axes):
        ax.plot(sol_a.grid.nodes, sol_a.values[j], lw=0.9,
                label=sol_a.construction)
        ax.plot(sol_b.grid.nodes, sol_b.values[j], lw=0.9,
                label=sol_b.construction)
        ax.set_ylabel(f"X{j + 1}")
    axes[-1].set_xlabel("t")
    axes[0].legend(loc="best", fontsize=8)
    return _save(fig, out)


def _fig_bridge_marginal(payload, out):
    sample = np.asarray(payload["sample_sorted"])
    t = payload["t"]
    law = oracles.bes3_bridge_marginal(t)
    grid = np.linspace(0, max(1.8, float(sample.max()) * 1.05), 200)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.step(sample, np.linspace(0, 1, sample.size), where="post", lw=1.0,
            label="integrated paths (ecdf)")
    ax.plot(grid, law.cdf(grid), "k--", lw=1.2, label="radial-law cdf")
    ax.set_xlabel(f"bridge value at t = {t:g}")
    ax.set_ylabel("cdf")
    ax.legend(loc="lower right", fontsize=8)
    return _save(fig, out)


def _fig_density(payload, out):
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    edges = np.asarray(payload["log_edges"])
    centers = 0.5 * (edges[:-1] + edges[1:])
    axes[0].bar(centers, payload["log_hist"], width=np.diff(edges), alpha=0.7)
    axes[0].set_xlabel("log density")
    axes[0].set_ylabel("count")
    axes[1].plot(payload["running_n"], payload["running_mean"], lw=1.0)
    axes[1].axhline(1.0, color="k", ls="--", lw=0.8)
    axes[1].set_xlabel("paths")
    axes[1].set_ylabel("running mean")
    return _save(fig, out)


def _fig_heat(payload, out):
    centers = np.asarray(payload["centers"])
    fig, ax = plt.subplots(figsize=(6, 4))
    grid = np.linspace(-3, 3, 200)
    ax.plot(grid, oracles.heat_sgn(grid), "k--", lw=1.0, label="erf")
    counts = np.asarray(payload["counts"], dtype=float)
    err = 1.0 / np.sqrt(np.maximum(counts, 1.0))
    ax.errorbar(centers, payload["means"], yerr=err, fmt="o", ms=4,
                label="bin means")
    ax.set_xlabel("value at t = 1/2")
    ax.set_ylabel("mean future sign")
    ax.legend(loc="best", fontsize=8)
    return _save(fig, out)


def _fig_nosol(payload, out):
    fig, ax = plt.subplots(figsize=(6, 4))
    eps = np.asarray(payload["cutoffs"])
    ax.loglog(eps, payload["probe_medians"], "o-", label="confining -1/(2x)")
    ax.loglog(eps, payload["control_medians"], "s-", label="dispersing +1/(2x)")
    ax.invert_xaxis()
    ax.set_xlabel("regularization cutoff")
    ax.set_ylabel("median accumulated |drift|")
    ax.legend(loc="best", fontsize=8)
    return _save(fig, out)


def _fig_duplicates(payload, out):
    fig, ax = plt.subplots(figsize=(6, 4))
    d = np.asarray(payload["distances"])
    ax.hist(d, bins=40, alpha=0.8)
    ax.axvline(0.1, color="k", ls="--", lw=0.8)
    ax.set_xlabel("sup distance between the pair")
    ax.set_ylabel("count")
    return _save(fig, out)


def sweep_figure(sweep_result, out):
    rows = sweep_result["rows"]
    h = [r["h"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(h, [r["median_residual"] for r in rows], "o-", label="median")
    ax.loglog(h, [r["p90_residual"] for r in rows], "s--", label="p90")
    ax.set_xlabel("step size h")
    ax.set_ylabel("residual")
    ax.legend(loc="best", fontsize=8)
    return _save(fig, out)


_RENDERERS = {"bridge_marginal": _fig_bridge_marginal,
              "density": _fig_density,
              "heat_regression": _fig_heat,
              "nosol_ladder": _fig_nosol,
              "duplicate_distance": _fig_duplicates}


def render_report_figures(report, out_dir) -> list:
    """Render every figure payload a scenario report carries; returns the
    written file names."""
    written = []
    for fig_id, payload in report.figures.items():
        renderer = _RENDERERS.get(fig_id)
        if renderer is None:
            continue
        out = f"{out_dir}/{report.scenario}_{fig_id}.png"
        written.append(renderer(payload, out))
    return written
