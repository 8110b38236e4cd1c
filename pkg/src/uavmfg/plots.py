"""Matplotlib figures for run and sweep outputs (PNG, headless backend)."""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def plot_trajectories(ax, states, stride=10):
    st = np.asarray(states)
    for i in range(st.shape[1]):
        ax.plot(st[::stride, i, 0], st[::stride, i, 1], lw=0.7)
    ax.plot(st[0, :, 0], st[0, :, 1], "k.", ms=3, label="start")
    ax.plot([0], [0], "r*", ms=10, label="destination")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(loc="best", fontsize=8)


def render_run(rep, cfg, out_dir):
    """Write trajectories.png and metrics.png next to the CSV output."""
    os.makedirs(out_dir, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 5))
    plot_trajectories(ax, rep.states)
    ax.set_title(f"{rep.algo}, seed {rep.seed}")
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "trajectories.png"), dpi=120)
    plt.close(fig)

    t = np.arange(rep.states.shape[0]) * cfg.dynamics.dt
    m = rep.metrics
    fig, axs = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    axs[0, 0].plot(t, m["cum_energy"].mean(axis=1))
    axs[0, 0].set_ylabel("mean energy")
    axs[0, 1].plot(t, m["speed"].max(axis=1), label="max")
    axs[0, 1].plot(t, m["speed"].mean(axis=1), label="mean")
    axs[0, 1].set_ylabel("speed [m/s]")
    axs[0, 1].legend(fontsize=8)
    axs[1, 0].plot(t, m["phi_A"], label="alignment")
    axs[1, 0].plot(t, m["phi_C"], label="collision risk")
    axs[1, 0].legend(fontsize=8)
    axs[1, 0].set_xlabel("time [s]")
    axs[1, 1].semilogy(t[:-1], np.maximum(rep.h_abs.max(axis=1), 1e-12), label="|H|")
    if rep.f_abs is not None:
        axs[1, 1].semilogy(t[:-1], np.maximum(rep.f_abs.max(axis=1), 1e-12), label="|F|")
    axs[1, 1].legend(fontsize=8)
    axs[1, 1].set_xlabel("time [s]")
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "metrics.png"), dpi=120)
    plt.close(fig)


def render_sweep(rows, out_dir, metrics=("energy_mean", "phi_A", "phi_C", "T_avg")):
    """One panel per metric: seed-mean against the swept value, per algorithm."""
    os.makedirs(out_dir, exist_ok=True)
    algos = sorted({r["algo"] for r in rows})
    fig, axs = plt.subplots(1, len(metrics), figsize=(4 * len(metrics), 3.5))
    for ax, key in zip(np.atleast_1d(axs), metrics):
        for a in algos:
            sel = [r for r in rows if r["algo"] == a]
            vals = sorted({float(r["value"]) for r in sel})
            ys = [np.mean([r[key] for r in sel if float(r["value"]) == v]) for v in vals]
            ax.plot(vals, ys, marker="o", label=a)
        ax.set_xlabel(rows[0]["axis"] if rows else "")
        ax.set_title(key)
    np.atleast_1d(axs)[0].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "sweep.png"), dpi=120)
    plt.close(fig)
