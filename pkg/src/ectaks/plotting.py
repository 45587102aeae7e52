"""Figures for attack reports.  Always renders off-screen (Agg)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (5.5, 3.6),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "savefig.dpi": 120,
}


def plot_sp(estimates, path, census=None, title="Attack success vs. subgroup order"):
    """Monte Carlo estimates with their confidence intervals, on a log p axis.

    ``estimates`` is a list of SpEstimate; ``census`` an optional SpCensus
    drawn as the exact point and its counting lower bound.
    """
    estimates = sorted(estimates, key=lambda e: e.p)
    ps = [e.p for e in estimates]
    ys = [float(e.estimate) for e in estimates]
    lo = [y - e.ci_low for y, e in zip(ys, estimates)]
    hi = [e.ci_high - y for y, e in zip(ys, estimates)]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.errorbar(ps, ys, yerr=[lo, hi], fmt="o-", capsize=3, label="Monte Carlo (99% CI)")
        if census is not None:
            ax.plot([census.p], [float(census.fraction)], "s", ms=8, mfc="none",
                    label=f"exact, p={census.p}")
            ax.plot([census.p], [float(census.lower_bound)], "v", label="counting lower bound")
        ax.axhline(1.0, color="grey", lw=0.8, ls="--")
        ax.set_xscale("log")
        ax.set_xlabel("p")
        ax.set_ylabel("P(det A != 0)")
        ax.set_ylim(0, 1.05)
        ax.set_title(title)
        ax.legend(loc="lower right")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_rank_histogram(histograms, path, title="Rank of the attacker's matrix"):
    """Grouped bars, one group per label in ``histograms`` ({label: {rank: count}}).
    Counts are normalised to fractions so runs of different size compare."""
    labels = list(histograms)
    ranks = sorted({int(r) for h in histograms.values() for r in h})
    width = 0.8 / max(1, len(labels))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for n, label in enumerate(labels):
            h = {int(r): c for r, c in histograms[label].items()}
            total = sum(h.values()) or 1
            xs = [r + (n - (len(labels) - 1) / 2) * width for r in ranks]
            ax.bar(xs, [h.get(r, 0) / total for r in ranks], width=width, label=str(label))
        ax.set_xticks(ranks)
        ax.set_xlabel("rank")
        ax.set_ylabel("fraction")
        ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path
