"""Report figures written next to the CSV outputs (PNG, Agg backend)."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

GAP_CLIP = 1.2  # visual clipping only; CSVs keep raw values

_STYLE = {
    "figure.dpi": 110,
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "lines.linewidth": 1.3,
}


def _save(fig, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def hexagon_figure(result, path: str) -> str:
    """Paths inside the polygon, anchored errors and lower-objective gaps."""
    cfg = result.config
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(1, 3, figsize=(12, 3.8))
        V = np.asarray(cfg.vertices)
        loop = np.vstack([V, V[:1]])
        ax[0].plot(loop[:, 0], loop[:, 1], "k-", lw=1)
        c0, c1 = np.asarray(cfg.c_start), np.asarray(cfg.c_end)
        ax[0].plot([c0[0], c1[0]], [c0[1], c1[1]], ":", color="0.5", label="c(x)")
        ax[0].plot(result.centers[:, 0], result.centers[:, 1], "k--", lw=1, label="exact center")
        zb = result.barrier_trace.zs
        ax[0].plot(zb[:, 0], zb[:, 1], color="tab:blue", label="barrier metric")
        ze = result.euclidean_z
        ax[0].plot(ze[:, 0], ze[:, 1], color="tab:red", alpha=0.8, label="Euclidean")
        ax[0].set_aspect("equal")
        ax[0].set_title("tracker paths")
        ax[0].legend(loc="lower left", fontsize=7)

        k = np.arange(len(result.grid))
        be = np.array([r[1] for r in result.barrier_tube.rows])
        ee = np.array([r[1] for r in result.euclidean_tube.rows])
        ax[1].semilogy(k, be, color="tab:blue", label="barrier metric")
        ax[1].semilogy(k, np.where(np.isfinite(ee), ee, np.nan), color="tab:red", label="Euclidean")
        ax[1].axhline(cfg.eta, color="k", ls="--", lw=1, label=f"eta = {cfg.eta}")
        exit_k = result.euclidean_tube.first_exit_index
        if exit_k is not None:
            ax[1].axvline(exit_k, color="tab:red", ls=":", lw=1)
        ax[1].set_xlabel("grid index k")
        ax[1].set_title("anchored Dikin error")
        ax[1].legend(fontsize=7)

        bg = np.maximum(result.barrier_gap, 1e-16)
        eg = np.maximum(result.euclidean_gap, 1e-16)
        ax[2].semilogy(k, bg, color="tab:blue", label="barrier metric")
        ax[2].semilogy(k, eg, color="tab:red", label="Euclidean")
        ax[2].set_xlabel("grid index k")
        ax[2].set_title("lower gap psi(x, z) - psi*(x)")
        ax[2].legend(fontsize=7)
        return _save(fig, path)


def tube_figure(report, path: str) -> str:
    rows = np.array([(r[0], r[1], r[2]) for r in report.rows], dtype=float)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.semilogy(rows[:, 0], rows[:, 1], label="exact tracker")
        if np.any(np.isfinite(rows[:, 2])):
            ax.semilogy(rows[:, 0], rows[:, 2], label="proxy tracker")
        ax.axhline(report.eta, color="k", ls="--", lw=1, label="eta")
        ax.set_xlabel("outer iteration k")
        ax.set_ylabel("anchored error")
        ax.legend()
        return _save(fig, path)


def stationarity_figure(ks, vals, running_min, path: str) -> str:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.loglog(np.asarray(ks) + 1, vals, alpha=0.4, label="||grad F_mu||^2")
        ax.loglog(np.asarray(ks) + 1, running_min, label="running min")
        ax.set_xlabel("k + 1")
        ax.legend()
        return _save(fig, path)


def bias_figure(report, path: str) -> str:
    r = np.array(report.rows, dtype=float)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        for col, bcol, name in ((1, 4, "g gap"), (2, 5, "y distance"), (3, 6, "F gap")):
            line, = ax.loglog(r[:, 0], np.maximum(np.abs(r[:, col]), 1e-18), "o-", label=name)
            ax.loglog(r[:, 0], r[:, bcol], "--", color=line.get_color(), lw=1)
        ax.set_xlabel("mu")
        ax.set_title("barrier bias (dashed: bounds)")
        ax.legend()
        return _save(fig, path)


def proxy_bias_figure(rows, path: str) -> str:
    r = np.array(rows, dtype=float)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.loglog(r[:, 0], r[:, 1], "o-")
        ax.set_xlabel("lambda")
        ax.set_ylabel("||grad F_mu - grad C*||")
        return _save(fig, path)


def toll_bench_figure(rows, path: str) -> str:
    """Seconds per update and clipped normalized gap against ``n``.

    ``rows`` are dicts with keys ``n``, ``seconds_per_update`` and
    ``final_normalized_gap``.
    """
    ns = sorted({r["n"] for r in rows})
    spu = [[r["seconds_per_update"] for r in rows if r["n"] == n and r["seconds_per_update"] is not None]
           for n in ns]
    gap = [[r["final_normalized_gap"] for r in rows
            if r["n"] == n and r["final_normalized_gap"] is not None] for n in ns]
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(1, 2, figsize=(9, 3.4))
        ax[0].plot(ns, [np.mean(v) if v else np.nan for v in spu], "o-")
        ax[0].set_yscale("log")
        ax[0].set_xlabel("n")
        ax[0].set_title("seconds per outer update")
        clipped = [np.minimum(v, GAP_CLIP) if v else [np.nan] for v in gap]
        ax[1].boxplot(clipped, tick_labels=[str(n) for n in ns])
        ax[1].axhline(1.0, color="k", ls="--", lw=1)
        ax[1].set_ylim(top=GAP_CLIP * 1.05)
        ax[1].set_xlabel("n")
        ax[1].set_title(f"normalized gap (clipped at {GAP_CLIP})")
        return _save(fig, path)
