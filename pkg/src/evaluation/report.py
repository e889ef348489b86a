"""
Report Module
Writes evaluation reports as JSON, per-image CSV, a text table and a PNG table
"""

import json
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

from ..core.records import EvalReport, ImageScore

plt.style.use("seaborn-v0_8")

HEADER_COLOR = "#2196F3"
ROW_COLORS = ["#f5f5f5", "#ffffff"]


def per_image_frame(report: EvalReport) -> pd.DataFrame:
    rows = [s.to_dict() for s in report.per_image]
    frame = pd.DataFrame(rows, columns=["_type", "id", "miou", "dice", "n_gt", "n_kept"])
    return frame.drop(columns=["_type"])


def report_from_dict(data: Dict) -> EvalReport:
    scores = [
        ImageScore(id=s["id"], miou=s["miou"], dice=s["dice"], n_gt=s["n_gt"], n_kept=s["n_kept"])
        for s in data.get("per_image", [])
    ]
    return EvalReport(
        per_image=scores,
        miou=data["miou"],
        dice=data["dice"],
        mode=data["mode"],
        fingerprint=data["fingerprint"],
        settings=data.get("settings", {}),
    )


def load_report(path: Union[str, Path]) -> EvalReport:
    return report_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def compare_reports(reports: Sequence[EvalReport], labels: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """One row per report: label, mode, prompt, mIoU %, DICE %, images."""
    rows = []
    for i, report in enumerate(reports):
        label = labels[i] if labels else f"{report.mode}"
        rows.append(
            {
                "run": label,
                "mode": report.mode,
                "text": report.settings.get("text", ""),
                "mIoU (%)": report.miou,
                "DICE (%)": report.dice,
                "images": report.settings.get("n_images", len(report.per_image)),
            }
        )
    return pd.DataFrame(rows)


def text_table(report: EvalReport) -> str:
    summary = compare_reports([report]).to_string(index=False)
    details = per_image_frame(report).to_string(index=False, float_format=lambda x: f"{x:.4f}")
    return f"{summary}\n\nfingerprint: {report.fingerprint}\n\n{details}\n"


def render_summary_table(frame: pd.DataFrame, output_file: Union[str, Path], title: str = "DLO instance segmentation") -> Path:
    """Draw a comparison frame as a PNG table."""
    output_file = Path(output_file)
    fig, ax = plt.subplots(figsize=(10, max(2.5, len(frame) * 0.5 + 1.5)))
    ax.axis("tight")
    ax.axis("off")

    cells = [[f"{v:.2f}" if isinstance(v, float) else str(v) for v in row] for row in frame.itertuples(index=False)]
    headers = list(frame.columns)
    table = ax.table(cellText=cells, colLabels=headers, loc="center", cellLoc="center")
    table.auto_set_font_size(False)
    table.set_fontsize(10)
    table.scale(1.2, 2.0)

    for j in range(len(headers)):
        table[(0, j)].set_facecolor(HEADER_COLOR)
        table[(0, j)].set_text_props(weight="bold", color="white")
    for i in range(1, len(cells) + 1):
        for j in range(len(headers)):
            table[(i, j)].set_facecolor(ROW_COLORS[i % 2])

    plt.suptitle(title, fontsize=14, fontweight="bold")
    plt.savefig(output_file, dpi=150, bbox_inches="tight", facecolor="white")
    plt.close(fig)
    return output_file


def write_report(report: EvalReport, output_dir: Union[str, Path], stem: Optional[str] = None) -> Dict[str, Path]:
    """
    Write `<stem>.json`, `<stem>.csv`, `<stem>.txt` and `<stem>.png` under `output_dir`.

    Returns:
        dict: Format name -> written path.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    stem = stem or f"report_{report.mode}"
    paths = {
        "json": output_dir / f"{stem}.json",
        "csv": output_dir / f"{stem}.csv",
        "txt": output_dir / f"{stem}.txt",
        "png": output_dir / f"{stem}.png",
    }
    paths["json"].write_text(json.dumps(report.to_dict(), indent=2), encoding="utf-8")
    per_image_frame(report).to_csv(paths["csv"], index=False)
    paths["txt"].write_text(text_table(report), encoding="utf-8")
    render_summary_table(compare_reports([report]), paths["png"], title=f"Evaluation ({report.mode} mode)")
    return paths


def write_comparison(reports: List[EvalReport], labels: Sequence[str], output_file: Union[str, Path]) -> Path:
    frame = compare_reports(reports, labels)
    output_file = Path(output_file)
    frame.to_csv(output_file.with_suffix(".csv"), index=False)
    return render_summary_table(frame, output_file.with_suffix(".png"), title="Comparison")
