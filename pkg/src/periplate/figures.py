"""Figure rendering for the report path (PNG files next to the CSV output)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _style(ax, xlabel, ylabel):
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    ax.grid(True, alpha=0.3)


def render_report_figures(report, out_dir, stem="run"):
    """Energy/balance/displacement figures for one recorded run."""
    paths = []
    t = report.times

    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(t, report.energy, lw=1.2, label="energy")
    ax.plot(t, report.dissipation, lw=1.0, label="dissipation")
    ax.plot(t, report.power, lw=1.0, label="power input")
    _style(ax, "t", "value")
    ax.legend(frameon=False, fontsize=8)
    p = f"{out_dir}/{stem}_energy.png"
    fig.savefig(p, dpi=140, bbox_inches="tight")
    plt.close(fig)
    paths.append(p)

    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    resid = np.abs(report.residuals[1:])
    ax.semilogy(t[1:], np.maximum(resid, 1e-20), lw=1.0)
    _style(ax, "t", "|balance residual|")
    p = f"{out_dir}/{stem}_balance.png"
    fig.savefig(p, dpi=140, bbox_inches="tight")
    plt.close(fig)
    paths.append(p)

    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(t, report.sup_eta, lw=1.2, label="sup |eta|")
    ax.plot(t, report.mean_eta, lw=1.0, label="mean eta")
    _style(ax, "t", "displacement")
    ax.legend(frameon=False, fontsize=8)
    p = f"{out_dir}/{stem}_eta.png"
    fig.savefig(p, dpi=140, bbox_inches="tight")
    plt.close(fig)
    paths.append(p)
    return paths


def render_convergence_figure(history, out_dir, stem="run"):
    """Outer-iteration residual decay of a fixed-point search."""
    if not history:
        return []
    its = [h["iteration"] for h in history]
    res = [max(h["residual"], 1e-20) for h in history]
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    ax.semilogy(its, res, "o-", ms=3, lw=1.0)
    _style(ax, "outer iteration", "||a - T(a)||_{C^1}")
    p = f"{out_dir}/{stem}_convergence.png"
    fig.savefig(p, dpi=140, bbox_inches="tight")
    plt.close(fig)
    return [p]


def render_study_figure(amplitudes, sup_energies, sup_etas, out_dir, stem="study"):
    """Log-log scaling of response against forcing amplitude."""
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    ax.loglog(amplitudes, sup_energies, "o-", ms=4, lw=1.0, label="sup E")
    ax.loglog(amplitudes, sup_etas, "s-", ms=4, lw=1.0, label="sup |eta|")
    _style(ax, "forcing amplitude", "response")
    ax.legend(frameon=False, fontsize=8)
    p = f"{out_dir}/{stem}_scaling.png"
    fig.savefig(p, dpi=140, bbox_inches="tight")
    plt.close(fig)
    return [p]


def render_ladder_figure(distances, out_dir, stem="ladder"):
    """Inter-level Cauchy distances of the refinement ladder."""
    if not distances:
        return []
    idx = np.arange(1, len(distances) + 1)
    d_eta = [max(d["d_eta"], 1e-20) for d in distances]
    d_e = [max(d["d_sup_energy"], 1e-20) for d in distances]
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    ax.semilogy(idx, d_eta, "o-", ms=4, label="sup |eta_L - eta_{L-1}|")
    ax.semilogy(idx, d_e, "s-", ms=4, label="|sup E_L - sup E_{L-1}|")
    _style(ax, "level", "inter-level distance")
    ax.legend(frameon=False, fontsize=8)
    p = f"{out_dir}/{stem}_distances.png"
    fig.savefig(p, dpi=140, bbox_inches="tight")
    plt.close(fig)
    return [p]
