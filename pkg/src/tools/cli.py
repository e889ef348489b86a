"""
Command-line entry point: `python -m src.tools.cli <command> ...`

Commands:
- train     train the adapter on a dataset split
- eval      score a checkpoint on a split (classifier or Oracle mode)
- infer     segment one image from a text prompt
- fixtures  write a synthetic dataset
- validate  check a dataset tree and list its defects
- compare   put several evaluation reports side by side

Exit codes: 0 success, 2 configuration or user error, 3 checkpoint mismatch,
4 raster I/O error. Every successful command writes `manifest_<command>.json`.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from src import __version__
from src.adapter.checkpoint import load_adapter, read_checkpoint
from src.adapter.model import DLOAdapter
from src.backbones.gateway import build_gateway
from src.core.config import TrainConfig, load_config, validate_config
from src.core.log import get_logger, set_verbosity
from src.core.records import RecordBase
from src.core.utils import AdapterError, ConfigError
from src.dataset.fixtures import STROKE_WIDTH, generate_fixture_set
from src.dataset.scanner import RGB_SUFFIX, SEMANTIC_SUFFIX, read_mask, read_rgb, scan_dataset
from src.dataset.validation import validate_dataset
from src.evaluation.evaluator import evaluate_split
from src.evaluation.report import compare_reports, load_report, write_comparison, write_report
from src.inference.overlay import write_outputs
from src.inference.segmenter import Segmenter
from src.training.trainer import DTYPES, fit

console = Console()
logger = get_logger("cli")


@dataclass
class RunManifest(RecordBase):
    """What a command ran with; enough to run it again."""

    command: str = ""
    argv: List[str] = field(default_factory=list)
    overrides: List[str] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)
    code_version: str = __version__
    seed: Optional[int] = None
    backbone_mode: Optional[str] = None
    started: str = ""
    finished: str = ""
    outputs: Dict[str, Any] = field(default_factory=dict)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _add_config_args(ap: argparse.ArgumentParser):
    ap.add_argument("--config", help="JSON configuration file")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Dotted-key override, e.g. train.epochs=2")
    ap.add_argument("--backbones", choices=["real", "stub"], help="Backbone mode (overrides backbone.mode)")
    ap.add_argument("--verbose", action="store_true", help="Debug logging")


def _parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    ap = argparse.ArgumentParser(description="Text-promptable DLO instance segmentation adapter.")
    sub = ap.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="Train the adapter")
    _add_config_args(train)
    train.add_argument("--data", help="Dataset root (overrides train.dataset_root)")
    train.add_argument("--out", help="Run directory (overrides train.run_dir)")
    train.add_argument("--epochs", type=int, help="Epochs; warm-up and stage switch scale along")
    train.add_argument("--max-steps", type=int, help="Stop after this many steps")
    train.add_argument("--steps-per-epoch", type=int, help="Steps per epoch (default: one pass over the training records)")
    train.add_argument("--seed", type=int, help="Training seed")
    train.add_argument("--resume", action="store_true", help="Continue from state_last.pt in the run directory")
    train.set_defaults(handler=cmd_train)

    ev = sub.add_parser("eval", help="Evaluate a checkpoint")
    _add_config_args(ev)
    ev.add_argument("--checkpoint", required=True, help="Adapter checkpoint (.pt)")
    ev.add_argument("--data", help="Dataset root (overrides train.dataset_root)")
    ev.add_argument("--split", default="test", help="Split to evaluate")
    ev.add_argument("--oracle", action="store_true", help="Filter masks by ground-truth matching instead of the classifier")
    ev.add_argument("--text", help="Text prompt (default: the training prompt)")
    ev.add_argument("--out", help="Report directory (default: <checkpoint dir>/eval)")
    ev.set_defaults(handler=cmd_eval)

    infer = sub.add_parser("infer", help="Segment one image")
    _add_config_args(infer)
    infer.add_argument("image", help="RGB image")
    infer.add_argument("--checkpoint", required=True, help="Adapter checkpoint (.pt)")
    infer.add_argument("--text", default="cables", help="Text prompt")
    infer.add_argument("--mask", help="Semantic mask for the stub backbone (default: the dataset sibling)")
    infer.add_argument("--out", default="infer_out", help="Output directory")
    infer.set_defaults(handler=cmd_infer)

    fx = sub.add_parser("fixtures", help="Write a synthetic dataset")
    fx.add_argument("--out", required=True, help="Dataset root to create")
    fx.add_argument("--seed", type=int, default=0)
    fx.add_argument("--n", type=int, default=3, help="Images per split")
    fx.add_argument("--size", type=int, nargs=2, default=[128, 128], metavar=("H", "W"))
    fx.add_argument("--curves", type=int, nargs=2, default=[2, 3], metavar=("MIN", "MAX"), help="Cables per image")
    fx.add_argument("--splits", nargs="+", default=["train"], help="Splits to write")
    fx.add_argument("--stroke-width", type=int, nargs=2, default=list(STROKE_WIDTH), metavar=("MIN", "MAX"), help="Cable width in pixels")
    fx.add_argument("--verbose", action="store_true")
    fx.set_defaults(handler=cmd_fixtures)

    val = sub.add_parser("validate", help="Validate a dataset tree")
    val.add_argument("root", help="Dataset root")
    val.add_argument("--split", action="append", help="Split to check (default: every split present)")
    val.add_argument("--out", help="Where to write validation.json and the manifest (default: the root)")
    val.add_argument("--verbose", action="store_true")
    val.set_defaults(handler=cmd_validate)

    cmp = sub.add_parser("compare", help="Compare evaluation reports side by side")
    cmp.add_argument("reports", nargs="+", help="report_*.json files written by eval")
    cmp.add_argument("--labels", nargs="+", help="One label per report (default: the report mode)")
    cmp.add_argument("--out", default="comparison", help="Output stem; writes <stem>.csv and <stem>.png")
    cmp.add_argument("--verbose", action="store_true")
    cmp.set_defaults(handler=cmd_compare)

    return ap.parse_args(argv)


def _resolve_config(args: argparse.Namespace, base: Optional[Dict[str, Any]] = None) -> TrainConfig:
    overrides = list(args.set)
    if args.backbones:
        overrides.append(f"backbone.mode={args.backbones}")
    cfg = load_config(args.config, overrides, base=base)
    if getattr(args, "data", None):
        cfg.dataset_root = str(args.data)
    return cfg


def _scale_schedule(cfg: TrainConfig, epochs: int):
    """Set `epochs`, scaling warm-up and the stage switch by the same ratio."""
    ratio = epochs / cfg.epochs
    cfg.epochs = epochs
    cfg.warmup_epochs = cfg.warmup_epochs * ratio
    if epochs > 1:
        cfg.stage_switch_epoch = min(max(1, round(cfg.stage_switch_epoch * ratio)), epochs - 1)
    validate_config(cfg)


def _header(title: str, lines: Sequence[str]):
    console.print(Panel.fit("\n".join(lines), title=f"[white]{title}[/white]"))


def _load_model(args: argparse.Namespace) -> Tuple[TrainConfig, Any, DLOAdapter, Dict[str, Any]]:
    """Configuration (the checkpoint's own unless --config is given), backbones and loaded adapter."""
    payload = read_checkpoint(args.checkpoint)
    base = None if args.config else payload.get("metadata", {}).get("config")
    cfg = _resolve_config(args, base)
    gateway = build_gateway(cfg.backbone, cfg.adapter, DTYPES[cfg.dtype])
    model = DLOAdapter.for_gateway(cfg.adapter, gateway)
    metadata = load_adapter(args.checkpoint, model)
    return cfg, gateway, model, metadata


def cmd_train(args: argparse.Namespace) -> Tuple[RunManifest, Path]:
    cfg = _resolve_config(args)
    if args.out:
        cfg.run_dir = str(args.out)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.max_steps is not None:
        cfg.max_steps = args.max_steps
    if args.steps_per_epoch is not None:
        cfg.steps_per_epoch = args.steps_per_epoch
    if args.epochs is not None:
        _scale_schedule(cfg, args.epochs)

    _header(
        "Training",
        [
            f"Dataset:   {cfg.dataset_root}",
            f"Run dir:   {cfg.run_dir}",
            f"Backbones: {cfg.backbone.mode}",
            f"Epochs:    {cfg.epochs} (warm-up {cfg.warmup_epochs}, peak lr {cfg.peak_lr})",
        ],
    )
    result = fit(cfg, resume=args.resume)
    _header(
        "Training finished",
        [
            f"[bold green]{result.state.step} steps[/bold green]",
            f"Trainable parameters: {result.n_parameters:,}",
            f"Best checkpoint: {result.best_checkpoint}",
            f"Last checkpoint: {result.last_checkpoint}",
            f"Metrics: {result.metrics_path}",
        ],
    )
    manifest = RunManifest(
        config=cfg.to_dict(),
        seed=cfg.seed,
        backbone_mode=cfg.backbone.mode,
        outputs={"best": result.best_checkpoint, "last": result.last_checkpoint, "metrics": result.metrics_path},
    )
    return manifest, Path(cfg.run_dir)


def cmd_eval(args: argparse.Namespace) -> Tuple[RunManifest, Path]:
    cfg, gateway, model, _ = _load_model(args)
    if cfg.dataset_root is None:
        raise ConfigError("No dataset root: pass --data or set train.dataset_root")
    mode = "oracle" if args.oracle else "classifier"
    text = args.text or cfg.text_prompt
    manifest = scan_dataset(cfg.dataset_root, args.split)
    segmenter = Segmenter(model, gateway, cfg.eval.classifier_threshold, text)
    report = evaluate_split(manifest, segmenter, mode, cfg.eval, cfg.loss, text)

    out = Path(args.out) if args.out else Path(args.checkpoint).parent / "eval"
    paths = write_report(report, out, stem=f"report_{args.split}_{mode}")
    _header(
        "Evaluation",
        [
            f"Split: {args.split} ({report.settings['n_images']} images), mode: {mode}, prompt: '{text}'",
            f"[bold green]mIoU {report.miou:.2f}%[/bold green]   DICE {report.dice:.2f}%",
            f"Report: {paths['json']}",
        ],
    )
    run = RunManifest(
        config=cfg.to_dict(),
        seed=cfg.seed,
        backbone_mode=cfg.backbone.mode,
        outputs={k: str(v) for k, v in paths.items()},
    )
    return run, out


def _sibling_semantic(image_path: Path) -> Optional[Path]:
    """`<split>/Masks/<id>_mask.png` for an image at `<split>/RGB/<id>_0001.png`."""
    if image_path.parent.name != "RGB" or not image_path.name.endswith(RGB_SUFFIX):
        return None
    record_id = image_path.name[: -len(RGB_SUFFIX)]
    candidate = image_path.parent.parent / "Masks" / f"{record_id}{SEMANTIC_SUFFIX}"
    return candidate if candidate.is_file() else None


def cmd_infer(args: argparse.Namespace) -> Tuple[RunManifest, Path]:
    cfg, gateway, model, _ = _load_model(args)
    image_path = Path(args.image)
    image = read_rgb(image_path)

    reference = None
    if gateway.mode == "stub":
        mask_path = Path(args.mask) if args.mask else _sibling_semantic(image_path)
        if mask_path is None:
            raise ConfigError("The stub backbone needs a semantic mask: pass --mask or use an image from a dataset tree")
        reference = read_mask(mask_path)

    segmenter = Segmenter(model, gateway, cfg.eval.classifier_threshold, args.text)
    result = segmenter.run(image, args.text, reference)
    out = Path(args.out)
    paths = write_outputs(image, result, out)

    if len(result.kept) == 0:
        console.print(f"[yellow]No mask passed the classifier threshold for '{args.text}'[/yellow]")
    _header(
        "Inference",
        [
            f"Image:  {image_path}",
            f"Prompt: '{args.text}'",
            f"[bold green]{len(result.kept)} instance(s)[/bold green] of {len(result.bundle)} prompts",
            f"Overlay: {paths['overlay'][0]}",
        ],
    )
    run = RunManifest(
        config=cfg.to_dict(),
        seed=cfg.seed,
        backbone_mode=cfg.backbone.mode,
        outputs={"overlay": str(paths["overlay"][0]), "instances": [str(p) for p in paths["instances"]], "summary": str(paths["summary"][0])},
    )
    return run, out


def cmd_fixtures(args: argparse.Namespace) -> Tuple[RunManifest, Path]:
    root = generate_fixture_set(
        args.out, args.seed, args.n, tuple(args.size), tuple(args.curves), tuple(args.splits), tuple(args.stroke_width)
    )
    _header(
        "Fixtures",
        [f"[bold green]{args.n} image(s) per split[/bold green] written to {root}", f"Splits: {', '.join(args.splits)}  Seed: {args.seed}"],
    )
    outputs = {"root": str(root), "splits": list(args.splits), "n": args.n, "size": list(args.size)}
    run = RunManifest(seed=args.seed, outputs={**outputs, "stroke_width": list(args.stroke_width)})
    return run, root


def _defect_table(report) -> Table:
    table = Table(title="Defects")
    for column in ("kind", "record", "message", "path"):
        table.add_column(column)
    for defect in report.defects:
        table.add_row(defect.kind, defect.record_id, defect.message, str(defect.path or ""))
    return table


def cmd_validate(args: argparse.Namespace) -> Tuple[RunManifest, Path]:
    report = validate_dataset(args.root, args.split)
    counts = ", ".join(f"{split}: {n}" for split, n in report.records.items())
    status = "[bold green]no defect[/bold green]" if report.ok else f"[bold red]{len(report.defects)} defect(s)[/bold red]"
    _header("Validation", [f"Root: {args.root}", f"Records: {counts}", status])
    if not report.ok:
        console.print(_defect_table(report))

    out = Path(args.out) if args.out else Path(args.root)
    out.mkdir(parents=True, exist_ok=True)
    (out / "validation.json").write_text(json.dumps(report.to_dict(), indent=2), encoding="utf-8")
    run = RunManifest(outputs={"report": str(out / "validation.json"), "defects": len(report.defects), "kinds": report.kinds()})
    return run, out


def cmd_compare(args: argparse.Namespace) -> Tuple[RunManifest, Path]:
    if args.labels and len(args.labels) != len(args.reports):
        raise ConfigError(f"Got {len(args.labels)} label(s) for {len(args.reports)} report(s)")
    missing = [p for p in args.reports if not Path(p).is_file()]
    if missing:
        raise ConfigError(f"Report not found: {', '.join(missing)}")
    reports = [load_report(path) for path in args.reports]
    labels = args.labels or [f"{r.mode}:{Path(p).stem}" for r, p in zip(reports, args.reports)]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    figure = write_comparison(reports, labels, out)

    table = Table(title="Comparison")
    frame = compare_reports(reports, labels)
    for column in frame.columns:
        table.add_column(str(column))
    for row in frame.itertuples(index=False):
        table.add_row(*(f"{v:.2f}" if isinstance(v, float) else str(v) for v in row))
    console.print(table)
    run = RunManifest(outputs={"csv": str(out.with_suffix(".csv")), "figure": str(figure), "reports": list(args.reports)})
    return run, out.parent


def _write_manifest(run: RunManifest, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"manifest_{run.command}.json"
    path.write_text(json.dumps(run.to_dict(), indent=2), encoding="utf-8")
    return path


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = _parse_args(argv)
    set_verbosity(args.verbose)
    started = _now()
    try:
        run, out_dir = args.handler(args)
        run.command = args.command
        run.argv = argv
        run.overrides = list(getattr(args, "set", []))
        run.started = started
        run.finished = _now()
        _write_manifest(run, out_dir)
    except AdapterError as e:
        console.print(f"\n[bold red][{type(e).__name__}][/bold red] {e}")
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
