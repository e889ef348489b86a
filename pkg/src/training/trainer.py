"""
Trainer
-------
Trains the adapter on top of frozen backbones.

Key Features:
- One image per step, all N prompt batches decoded together
- Matching-derived segmentation loss and classifier labels in the same step
- Warm-up + cosine schedule, AdamW, gradient clipping
- Joint or staged (prompt encoder first, classifier second) schedules
- Per-epoch validation (Oracle mIoU, classifier mIoU, classifier accuracy)
- Best/last checkpoints and a resumable state; resuming reproduces the
  uninterrupted run step for step
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch

from ..adapter.checkpoint import save_adapter
from ..adapter.model import DLOAdapter, count_parameters
from ..backbones.gateway import BackboneGateway, build_gateway
from ..core.config import PARAMETER_BUDGET, TrainConfig, config_fingerprint
from ..core.log import get_logger
from ..core.records import ClassifierOutput, InstanceRecord, MaskBundle, MatchResult, PromptSet, RecordBase
from ..core.utils import ConfigError, NonFiniteLossError
from ..dataset.capacity import truncate_to_capacity
from ..dataset.scanner import iter_records, scan_dataset
from ..evaluation.evaluator import validation_metrics
from ..inference.segmenter import Segmenter
from ..losses.functional import segmentation_loss, total_loss, weighted_bce
from ..matching.matcher import cost_matrix, labels_from_matching, solve_assignment
from .augment import augment, step_rng
from .curves import plot_curves
from .schedule import lr_at, step_epoch
from .state import TrainState, load_state, save_state

logger = get_logger("training")

DTYPES = {"float32": torch.float32, "float64": torch.float64}

STEPS_FILE = "steps.csv"
METRICS_FILE = "metrics.csv"
CONFIG_FILE = "config.json"
BEST_FILE = "adapter_best.pt"
LAST_FILE = "adapter_last.pt"
STATE_FILE = "state_last.pt"
NONFINITE_FILE = "state_nonfinite.pt"
CURVES_FILE = "curves.png"

METRIC_COLUMNS = ["epoch", "lr", "seg_loss", "cls_loss", "val_miou_oracle", "val_miou", "val_cls_acc"]

_ORDER_STREAM = 1


@dataclass
class StepLoss(RecordBase):
    step: int = 0
    epoch: float = 0.0
    lr: float = 0.0
    seg_loss: float = 0.0
    cls_loss: float = 0.0
    total_loss: float = 0.0
    n_matched: int = 0
    stage: str = "joint"


@dataclass
class StepOutput:
    """Graph-carrying intermediates of one forward pass."""

    prompts: PromptSet
    bundle: MaskBundle
    match: MatchResult
    labels: torch.Tensor
    decision: ClassifierOutput
    seg: torch.Tensor
    cls: torch.Tensor
    total: torch.Tensor


@dataclass
class FitResult(RecordBase):
    run_dir: str = ""
    best_checkpoint: Optional[str] = None
    last_checkpoint: Optional[str] = None
    metrics_path: str = ""
    steps_path: str = ""
    state: TrainState = field(default_factory=TrainState)
    n_parameters: int = 0


def epoch_order(seed: int, epoch: int, n: int, length: Optional[int] = None) -> np.ndarray:
    """
    Shuffled record order of one epoch.

    With `length` above `n` the epoch visits back-to-back permutations of the
    records; the first `n` entries do not depend on `length`.
    """
    rng = np.random.default_rng([seed, epoch, _ORDER_STREAM])
    length = n if length is None else length
    order = [rng.permutation(n) for _ in range(-(-length // n))]
    return np.concatenate(order)[:length]


def step_seed(seed: int, step: int) -> int:
    return int(np.random.SeedSequence([seed, step]).generate_state(1)[0])


def report_parameters(model: DLOAdapter) -> int:
    n = count_parameters(model)
    low, high = PARAMETER_BUDGET
    logger.info("Adapter trainable parameters: %s", f"{n:,}")
    if not low <= n <= high:
        logger.warning("Trainable parameter count %s lies outside [%s, %s]", f"{n:,}", f"{low:,}", f"{high:,}")
    return n


def load_split(cfg: TrainConfig, split: Optional[str], required: bool = True) -> List[InstanceRecord]:
    """
    Load every usable record of a split, truncated to the prompt capacity.

    Raises:
        ConfigError: dataset root unset or missing, or a required split is absent.
    """
    if cfg.dataset_root is None:
        raise ConfigError("train.dataset_root is not set")
    root = Path(cfg.dataset_root)
    if not root.is_dir():
        raise ConfigError(f"Dataset root not found: {root}")
    if split is None or not (root / split).is_dir():
        if required:
            raise ConfigError(f"Split '{split}' not found under {root}")
        return []
    manifest = scan_dataset(root, split)
    n = cfg.adapter.num_prompts
    return [truncate_to_capacity(record, n) for record in iter_records(manifest)]


class Trainer:
    def __init__(self, cfg: TrainConfig, gateway: Optional[BackboneGateway] = None, model: Optional[DLOAdapter] = None):
        """
        Initialize the Trainer.

        Args:
            cfg: Resolved training configuration.
            gateway: Frozen backbones; built from `cfg.backbone` when None.
            model: Adapter to train; a fresh one seeded with `cfg.seed` when None.
        """
        self.cfg = cfg
        self.dtype = DTYPES[cfg.dtype]
        self.gateway = gateway or build_gateway(cfg.backbone, cfg.adapter, self.dtype)
        if model is None:
            torch.manual_seed(cfg.seed)
            model = DLOAdapter.for_gateway(cfg.adapter, self.gateway)
        self.model = model
        self.optimizer = torch.optim.AdamW(
            self.model.parameters(),
            lr=cfg.peak_lr,
            betas=tuple(cfg.betas),
            weight_decay=cfg.weight_decay,
        )
        self.state = TrainState(fingerprint=config_fingerprint(cfg.to_dict()))
        self.segmenter = Segmenter(self.model, self.gateway, cfg.eval.classifier_threshold, cfg.text_prompt)
        self.run_dir = Path(cfg.run_dir)
        self.n_parameters = report_parameters(self.model)

    def stage(self, epoch: float) -> str:
        """Training stage of an epoch: joint, or encoder then classifier when staged."""
        if self.cfg.schedule == "staged":
            return "encoder" if epoch < self.cfg.stage_switch_epoch else "classifier"
        return "joint"

    def forward(self, record: InstanceRecord, image: Optional[np.ndarray] = None, stage: str = "joint") -> StepOutput:
        """
        Losses of one record. Only the parts trained in `stage` keep a graph.

        Args:
            record: Training record (ground truth).
            image: Input image, the record image when None (e.g. an augmented copy).
            stage: "joint", "encoder" or "classifier".
        """
        cfg = self.cfg
        image = record.image if image is None else image
        reference = record.semantic_mask if self.gateway.mode == "stub" else None
        grid = self.gateway.semantic_grid(image, cfg.text_prompt, reference)
        embedding = self.gateway.image_embedding(image)

        with torch.set_grad_enabled(stage != "classifier"):
            prompts = self.model.encode(grid)
            bundle = self.gateway.decode(embedding, prompts)
            probs = bundle.probabilities()
            target = bundle.to_decoder_frame(record.stacked_submasks())
            match = solve_assignment(cost_matrix(probs, target, cfg.loss))
            seg = segmentation_loss(probs, target, match.pairs, cfg.loss)
        labels = labels_from_matching(match, len(bundle), dtype=probs.dtype)

        weight = self._classifier_weight(stage)
        with torch.set_grad_enabled(weight > 0):
            decision = self.model.classify(prompts, bundle, cfg.eval.classifier_threshold)
            cls = weighted_bce(decision.logits, labels, cfg.loss.bce_pos_weight)
        total = total_loss(seg, cls, weight)
        return StepOutput(prompts, bundle, match, labels, decision, seg, cls, total)

    def _classifier_weight(self, stage: str) -> float:
        if stage == "encoder":
            return 0.0
        if stage == "classifier":
            return self.cfg.loss.classifier_loss_weight or 1.0
        return self.cfg.loss.classifier_loss_weight

    def train_step(self, record: InstanceRecord, epoch: Optional[float] = None, stage: Optional[str] = None) -> StepLoss:
        """
        One optimisation step on one record.

        Raises:
            NonFiniteLossError: the loss is NaN or infinite; the state is
                dumped to `state_nonfinite.pt` in the run directory first.
        """
        cfg = self.cfg
        step = self.state.step
        epoch = float(self.state.epoch) if epoch is None else epoch
        stage = stage or self.stage(epoch)
        torch.manual_seed(step_seed(cfg.seed, step))
        lr = lr_at(epoch, cfg)
        for group in self.optimizer.param_groups:
            group["lr"] = lr

        self.model.train()
        image = augment(record.image, step_rng(cfg.seed, step), cfg.augment)
        out = self.forward(record, image, stage)

        if not torch.isfinite(out.total.detach()).all():
            dump = save_state(self.run_dir / NONFINITE_FILE, self.snapshot())
            raise NonFiniteLossError(f"Non-finite loss at step {step} (record {record.id})", str(dump))

        self.optimizer.zero_grad(set_to_none=True)
        if out.total.requires_grad:
            out.total.backward()
            self._clip(step)
            self.optimizer.step()

        self.state.step = step + 1
        return StepLoss(
            step=step,
            epoch=epoch,
            lr=lr,
            seg_loss=float(out.seg.detach()),
            cls_loss=float(out.cls.detach()),
            total_loss=float(out.total.detach()),
            n_matched=len(out.match.pairs),
            stage=stage,
        )

    def _clip(self, step: int):
        if not self.cfg.grad_clip:
            return
        norm = torch.nn.utils.clip_grad_norm_(self.model.parameters(), self.cfg.grad_clip)
        if float(norm) > self.cfg.grad_clip:
            logger.debug("Step %d: gradient norm %.4f clipped to %.4f", step, float(norm), self.cfg.grad_clip)

    def snapshot(self) -> TrainState:
        return TrainState(
            step=self.state.step,
            epoch=self.state.epoch,
            position=self.state.position,
            best_value=self.state.best_value,
            best_epoch=self.state.best_epoch,
            adapter=self.model.state_dict(),
            optimizer=self.optimizer.state_dict(),
            rng=torch.get_rng_state(),
            fingerprint=self.state.fingerprint,
        )

    def restore(self, state: TrainState):
        if state.fingerprint and state.fingerprint != self.state.fingerprint:
            logger.warning("Resuming a run started with a different configuration")
        self.model.load_state_dict(state.adapter)
        self.optimizer.load_state_dict(state.optimizer)
        if state.rng is not None:
            torch.set_rng_state(state.rng)
        self.state = TrainState(
            step=state.step,
            epoch=state.epoch,
            position=state.position,
            best_value=state.best_value,
            best_epoch=state.best_epoch,
            fingerprint=self.state.fingerprint,
        )
        logger.info("Resumed at step %d (epoch %d, position %d)", state.step, state.epoch, state.position)

    def _epoch_row(self, epoch: int, losses: Sequence[StepLoss], val_records: Sequence[InstanceRecord]) -> Dict:
        row = {
            "epoch": epoch,
            "lr": losses[-1].lr if losses else lr_at(epoch, self.cfg),
            "seg_loss": float(np.mean([s.seg_loss for s in losses])) if losses else math.nan,
            "cls_loss": float(np.mean([s.cls_loss for s in losses])) if losses else math.nan,
            "val_miou_oracle": math.nan,
            "val_miou": math.nan,
            "val_cls_acc": math.nan,
        }
        last = epoch + 1 == self.cfg.epochs
        if val_records and ((epoch + 1) % max(self.cfg.validate_every, 1) == 0 or last):
            row.update(validation_metrics(val_records, self.segmenter, self.cfg.eval, self.cfg.loss))
            logger.info(
                "Epoch %d: val mIoU %.4f (oracle %.4f), classifier accuracy %.4f",
                epoch, row["val_miou"], row["val_miou_oracle"], row["val_cls_acc"],
            )
        return row

    def _track_best(self, row: Dict) -> bool:
        value = row["val_miou"]
        if math.isnan(value):
            return False
        if self.state.best_value is None or value > self.state.best_value:
            self.state.best_value = value
            self.state.best_epoch = int(row["epoch"])
            save_adapter(self.run_dir / BEST_FILE, self.model, self._metadata())
            return True
        return False

    def _metadata(self) -> Dict:
        return {
            "step": self.state.step,
            "epoch": self.state.epoch,
            "best_value": self.state.best_value,
            "text_prompt": self.cfg.text_prompt,
            "backbone_mode": self.gateway.mode,
            "config": self.cfg.to_dict(),
        }

    def _save(self, steps: List[Dict], metrics: List[Dict]):
        save_adapter(self.run_dir / LAST_FILE, self.model, self._metadata())
        save_state(self.run_dir / STATE_FILE, self.snapshot())
        pd.DataFrame(steps, columns=list(StepLoss.__dataclass_fields__)).to_csv(self.run_dir / STEPS_FILE, index=False)
        pd.DataFrame(metrics, columns=METRIC_COLUMNS).to_csv(self.run_dir / METRICS_FILE, index=False)

    def _previous_rows(self) -> Tuple[List[Dict], List[Dict]]:
        steps, metrics = [], []
        if (self.run_dir / STEPS_FILE).is_file():
            frame = pd.read_csv(self.run_dir / STEPS_FILE)
            steps = frame[frame["step"] < self.state.step].to_dict("records")
        if (self.run_dir / METRICS_FILE).is_file():
            frame = pd.read_csv(self.run_dir / METRICS_FILE)
            metrics = frame[frame["epoch"] < self.state.epoch].to_dict("records")
        return steps, metrics

    def fit(
        self,
        train_records: Sequence[InstanceRecord],
        val_records: Optional[Sequence[InstanceRecord]] = None,
        resume: bool = False,
    ) -> FitResult:
        """
        Run the schedule over `train_records`.

        Args:
            train_records: Training set, shuffled per epoch with `(seed, epoch)`.
            val_records: Validation set; the training set is tracked when empty.
            resume: Continue from `state_last.pt` in the run directory.

        Returns:
            FitResult: Run directory, checkpoint and log paths, final state.
        """
        cfg = self.cfg
        if not train_records:
            raise ConfigError("No usable training record")
        self.run_dir.mkdir(parents=True, exist_ok=True)
        (self.run_dir / CONFIG_FILE).write_text(json.dumps(cfg.to_dict(), indent=2), encoding="utf-8")

        steps: List[Dict] = []
        metrics: List[Dict] = []
        if resume:
            self.restore(load_state(self.run_dir / STATE_FILE))
            steps, metrics = self._previous_rows()
        if not val_records:
            logger.info("No validation records; tracking training-set metrics")
            val_records = train_records

        n = len(train_records)
        per_epoch = cfg.steps_per_epoch or n
        stopped = False
        for epoch in range(self.state.epoch, cfg.epochs):
            order = epoch_order(cfg.seed, epoch, n, per_epoch)
            stage = self.stage(epoch)
            losses = []
            for position in range(self.state.position, per_epoch):
                if cfg.max_steps is not None and self.state.step >= cfg.max_steps:
                    stopped = True
                    break
                loss = self.train_step(train_records[order[position]], step_epoch(epoch, position, per_epoch), stage)
                self.state.position = position + 1
                losses.append(loss)
                steps.append(loss.to_dict())
                if cfg.log_every and loss.step % cfg.log_every == 0:
                    logger.info(
                        "step %d epoch %.2f lr %.2e seg %.4f cls %.4f total %.4f",
                        loss.step, loss.epoch, loss.lr, loss.seg_loss, loss.cls_loss, loss.total_loss,
                    )
            if stopped:
                logger.info("Stopped at max_steps=%d", cfg.max_steps)
                break
            self.state.epoch, self.state.position = epoch + 1, 0
            row = self._epoch_row(epoch, losses, val_records)
            metrics.append(row)
            self._track_best(row)
            self._save(steps, metrics)

        self._save(steps, metrics)
        plot_curves(self.run_dir / STEPS_FILE, self.run_dir / METRICS_FILE, self.run_dir / CURVES_FILE)
        best = self.run_dir / BEST_FILE
        return FitResult(
            run_dir=str(self.run_dir),
            best_checkpoint=str(best) if best.is_file() else None,
            last_checkpoint=str(self.run_dir / LAST_FILE),
            metrics_path=str(self.run_dir / METRICS_FILE),
            steps_path=str(self.run_dir / STEPS_FILE),
            state=self.state,
            n_parameters=self.n_parameters,
        )


def fit(cfg: TrainConfig, gateway: Optional[BackboneGateway] = None, resume: bool = False) -> FitResult:
    """Load the configured splits and train."""
    train_records = load_split(cfg, cfg.train_split)
    val_records = load_split(cfg, cfg.val_split, required=False)
    logger.info("Training on %d records, validating on %d", len(train_records), len(val_records))
    return Trainer(cfg, gateway).fit(train_records, val_records, resume=resume)
