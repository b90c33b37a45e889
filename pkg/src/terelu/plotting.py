"""Training-curve figures: one row per run, accuracy and loss panels side by side."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

TRAIN_COLOR = "tab:orange"
VAL_COLOR = "tab:blue"


def plot_runs(runs: dict[str, dict[str, list]], path, dpi: int = 120) -> Path:
    """Render ``runs`` (name -> column name -> values, incl. ``epoch``) to ``path``.

    A third panel with the TERELU beta trajectories is added when any run
    carries ``beta_*`` columns.
    """
    if not runs:
        raise ValueError("nothing to plot")
    has_beta = any(k.startswith("beta_") for cols in runs.values() for k in cols)
    ncols = 3 if has_beta else 2
    fig, axes = plt.subplots(len(runs), ncols, figsize=(4.2 * ncols, 3.0 * len(runs)),
                             squeeze=False)
    for row, (name, cols) in enumerate(runs.items()):
        ep = cols["epoch"]
        ax_acc, ax_loss = axes[row, 0], axes[row, 1]
        ax_acc.plot(ep, cols["train_acc"], color=TRAIN_COLOR, label="train")
        ax_acc.plot(ep, cols["val_acc"], color=VAL_COLOR, label="validation")
        ax_acc.set_title(f"{name}: accuracy")
        ax_acc.set_ylabel("accuracy")
        ax_loss.plot(ep, cols["train_loss"], color=TRAIN_COLOR, label="train")
        ax_loss.plot(ep, cols["val_loss"], color=VAL_COLOR, label="validation")
        ax_loss.set_title(f"{name}: loss")
        ax_loss.set_ylabel("cross-entropy")
        for ax in (ax_acc, ax_loss):
            ax.set_xlabel("epoch")
            ax.grid(alpha=0.3)
            ax.legend(fontsize=8)
        if has_beta:
            ax_b = axes[row, 2]
            betas = sorted((k for k in cols if k.startswith("beta_")),
                           key=lambda k: int(k.split("_")[1]))
            for k in betas:
                ax_b.plot(ep, cols[k], lw=0.8, alpha=0.7)
            ax_b.set_title(f"{name}: beta per layer" if betas else f"{name}: (no beta)")
            ax_b.set_xlabel("epoch")
            ax_b.grid(alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path
