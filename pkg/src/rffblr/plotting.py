"""Figures rendered next to the CLI's CSV/JSON outputs.

Everything draws through the non-interactive Agg backend, so it works on
headless machines. Each function writes one PNG and returns its path.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 3.6),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    # fixed metadata keeps repeated runs byte-identical
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_history(history, path):
    """Lower bound, gamma and active feature count per outer iteration."""
    it = range(1, len(history["elbo"]) + 1)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(9.6, 3.0))
        axes[0].plot(it, history["elbo"], color="C0")
        axes[0].set_ylabel("ELBO")
        axes[1].semilogy(it, history["gamma"], color="C1")
        axes[1].set_ylabel(r"$\gamma$")
        axes[2].plot(it, history["active"], color="C2")
        axes[2].set_ylabel("active features")
        for ax in axes:
            ax.set_xlabel("iteration")
        return _save(fig, path)


def plot_fold_scores(fold_rows, task_names, path):
    """Per-fold R^2 for every task, with the overall mean as a dashed line."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        folds = sorted({r["fold"] for r in fold_rows})
        all_scores = []
        for c, task in enumerate(task_names):
            scores = [r["r2"] for r in fold_rows if r["task"] == task]
            all_scores.extend(scores)
            ax.plot(folds, scores, "o-", color=f"C{c % 10}", label=task, ms=4)
        if all_scores:
            ax.axhline(sum(all_scores) / len(all_scores), color="k", ls="--", lw=1, label="mean")
        ax.set_xlabel("fold")
        ax.set_ylabel(r"test $R^2$")
        ax.legend(ncol=min(4, len(task_names) + 1))
        return _save(fig, path)


def plot_m_sweep(rows, path):
    """Surviving features and mean R^2 against the initial feature count."""
    m0 = [r["M_initial"] for r in rows]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(m0, [r["M_final"] for r in rows], "o-", color="C0")
        ax.plot(m0, m0, ":", color="grey", lw=1)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("initial features")
        ax.set_ylabel("features after pruning", color="C0")
        twin = ax.twinx()
        twin.plot(m0, [r["mean_r2"] for r in rows], "s--", color="C3")
        twin.set_ylabel(r"mean $R^2$", color="C3")
        twin.grid(False)
        return _save(fig, path)


def plot_bench(rows, path):
    """Training time against N, one line per task count."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for i, C in enumerate(sorted({r["C"] for r in rows})):
            sel = sorted((r for r in rows if r["C"] == C), key=lambda r: r["N"])
            ax.plot([r["N"] for r in sel], [r["mean_seconds"] for r in sel], "o-",
                    color=f"C{i % 10}", label=f"C={C}")
        ax.set_xlabel("training samples N")
        ax.set_ylabel("seconds per fit")
        ax.legend()
        return _save(fig, path)
