"""
Training Curves
Plots the step log (losses and learning rate) and the epoch log (validation
mIoU and classifier accuracy) of a run directory
"""

from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd
import seaborn as sns

from ..core.log import get_logger

plt.style.use("seaborn-v0_8")

logger = get_logger("training")

COLORS = {"total_loss": "#e74c3c", "seg_loss": "#3498db", "cls_loss": "#2ecc71", "lr": "#7f8c8d"}
METRIC_LABELS = {
    "val_miou_oracle": "mIoU (Oracle)",
    "val_miou": "mIoU (classifier)",
    "val_cls_acc": "Classifier accuracy",
}


def _steps_panel(ax, steps: pd.DataFrame):
    for column in ("total_loss", "seg_loss", "cls_loss"):
        sns.lineplot(data=steps, x="step", y=column, ax=ax, label=column, color=COLORS[column], linewidth=2)
    ax.set_xlabel("Step", fontsize=12, fontweight="bold")
    ax.set_ylabel("Loss", fontsize=12, fontweight="bold")
    ax.set_title("Convergence", fontsize=14, fontweight="bold")

    lr_ax = ax.twinx()
    lr_ax.plot(steps["step"], steps["lr"], "--", color=COLORS["lr"], linewidth=1.5, label="learning rate")
    lr_ax.set_ylabel("Learning rate", fontsize=12, fontweight="bold")
    lr_ax.grid(False)
    ax.legend(loc="upper right")


def _metrics_panel(ax, metrics: pd.DataFrame):
    long = metrics.melt(id_vars="epoch", value_vars=list(METRIC_LABELS), var_name="metric", value_name="value").dropna()
    long["metric"] = long["metric"].map(METRIC_LABELS)
    if not long.empty:
        sns.lineplot(data=long, x="epoch", y="value", hue="metric", marker="o", ax=ax, linewidth=2)
    ax.set_xlabel("Epoch", fontsize=12, fontweight="bold")
    ax.set_ylabel("Validation score", fontsize=12, fontweight="bold")
    ax.set_title("Classification accuracy and mIoU", fontsize=14, fontweight="bold")
    ax.set_ylim(0, 1.05)
    ax.grid(True, alpha=0.3)


def plot_curves(steps_csv: Union[str, Path], metrics_csv: Union[str, Path], output_file: Union[str, Path]) -> Path:
    """Two panels side by side; missing or empty logs leave their panel blank."""
    output_file = Path(output_file)
    steps = pd.read_csv(steps_csv) if Path(steps_csv).is_file() else pd.DataFrame()
    metrics = pd.read_csv(metrics_csv) if Path(metrics_csv).is_file() else pd.DataFrame()

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(16, 6))
    if not steps.empty:
        _steps_panel(ax1, steps)
    if not metrics.empty:
        _metrics_panel(ax2, metrics)
    plt.tight_layout()
    plt.savefig(output_file, dpi=150, bbox_inches="tight", facecolor="white")
    plt.close(fig)
    logger.info("Training curves written to %s", output_file)
    return output_file
