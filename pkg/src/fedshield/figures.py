"""Matplotlib figure rendering for run reports and Fisher score dumps.

Figures land next to the CSV output as PNG files; the Agg backend keeps
everything headless.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def save_round_figures(reports, outdir):
    """Accuracy, zone-ratio, and privacy-budget curves over rounds."""
    rounds = [r.round for r in reports]
    written = []

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(rounds, [r.accuracy for r in reports], marker="o")
    ax.set_xlabel("round")
    ax.set_ylabel("test accuracy")
    ax.set_ylim(0.0, 1.0)
    ax.grid(alpha=0.3)
    written.append(_finish(fig, outdir / "accuracy.png"))

    enc = [r.zone_ratios[0] * 100 for r in reports]
    pers = [r.zone_ratios[1] * 100 for r in reports]
    noise = [r.zone_ratios[2] * 100 for r in reports]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.stackplot(rounds, enc, pers, noise, labels=["encrypted", "personalized", "noise"], alpha=0.8)
    ax.set_xlabel("round")
    ax.set_ylabel("zone share (%)")
    ax.set_ylim(0, 100)
    ax.legend(loc="center right", fontsize=8)
    written.append(_finish(fig, outdir / "zone_ratios.png"))

    eps = [r.eps_dp for r in reports]
    if all(np.isfinite(e) for e in eps):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(rounds, eps, marker="s", color="tab:red")
        ax.set_xlabel("round")
        ax.set_ylabel("epsilon at delta")
        ax.grid(alpha=0.3)
        written.append(_finish(fig, outdir / "privacy_budget.png"))
    return written


def save_fisher_figures(scores, tau, outdir):
    """Raw/normalized score histograms and per-layer raw boxplots."""
    written = []

    fig, ax = plt.subplots(figsize=(6, 4))
    raw = scores.raw[scores.raw > 0]
    if len(raw):
        ax.hist(np.log10(raw), bins=60, color="tab:blue", alpha=0.85)
        ax.set_xlabel("log10 raw score")
    else:
        ax.hist(scores.raw, bins=60)
        ax.set_xlabel("raw score")
    ax.set_ylabel("parameters")
    written.append(_finish(fig, outdir / "fisher_raw_hist.png"))

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(scores.normalized, bins=60, color="tab:green", alpha=0.85)
    ax.axvline(tau, color="black", linestyle="--", label=f"threshold {tau}")
    ax.set_xlabel("normalized score")
    ax.set_ylabel("parameters")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    written.append(_finish(fig, outdir / "fisher_normalized_hist.png"))

    fig, ax = plt.subplots(figsize=(7, 4))
    data = [scores.raw[offset : offset + length] for _, offset, length in scores.layout.layers]
    ax.boxplot(data, tick_labels=scores.layout.names(), showfliers=False)
    ax.set_ylabel("raw score")
    ax.tick_params(axis="x", rotation=30)
    written.append(_finish(fig, outdir / "fisher_layer_boxplot.png"))
    return written


def save_sweep_figures(cells, outdir):
    """Heatmaps of encrypted-zone share and accuracy over the (tau, rho) grid."""
    taus = sorted({tau for tau, _, _ in cells})
    rhos = sorted({rho for _, rho, _ in cells})
    enc = np.full((len(taus), len(rhos)), np.nan)
    acc = np.full((len(taus), len(rhos)), np.nan)
    for tau, rho, report in cells:
        i, j = taus.index(tau), rhos.index(rho)
        enc[i, j] = report.zone_ratios[0] * 100
        acc[i, j] = report.accuracy

    written = []
    for grid, label, fname in ((enc, "encrypted zone (%)", "sweep_enc_zone.png"),
                               (acc, "final accuracy", "sweep_accuracy.png")):
        fig, ax = plt.subplots(figsize=(6, 4))
        im = ax.imshow(grid, aspect="auto", origin="lower", cmap="viridis")
        ax.set_xticks(range(len(rhos)), [str(r) for r in rhos])
        ax.set_yticks(range(len(taus)), [str(t) for t in taus])
        ax.set_xlabel("consensus threshold rho")
        ax.set_ylabel("sensitivity threshold tau")
        fig.colorbar(im, ax=ax, label=label)
        written.append(_finish(fig, outdir / fname))
    return written


def save_attack_figures(reports, outdir):
    """Label restoration accuracy per round."""
    rounds = [r.round for r in reports if r.attack]
    if not rounds:
        return []
    le = [r.attack["le_acc_mean"] for r in reports if r.attack]
    ln = [r.attack["ln_acc_mean"] for r in reports if r.attack]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(rounds, le, marker="o", label="label existence acc")
    ax.plot(rounds, ln, marker="s", label="label count acc")
    ax.set_xlabel("round")
    ax.set_ylabel("attacker accuracy")
    ax.set_ylim(0, 1.05)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    return [_finish(fig, outdir / "attack_accuracy.png")]
