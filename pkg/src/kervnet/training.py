"""Training loop, per-epoch reporting, and time-to-accuracy bookkeeping.

Wall time is accumulated over the optimization loop only; validation and
checkpoint writes are excluded from the reported training time.  The
time-to-accuracy summary is the cumulative training wall time at the end
of the first epoch whose validation accuracy reaches the target.

Metrics and timing are written to separate CSVs: everything in
``metrics.csv`` is a pure function of (config, seed) and byte-identical
across reruns, while ``timing.csv`` carries the wall-clock numbers that
necessarily vary run to run.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, batches
from .errors import DivergenceError
from .layers import softmax_cross_entropy
from .models import Model
from .optim import SGD, SgdConfig, lr_at_epoch


@dataclass
class EpochRow:
    epoch: int
    train_loss: float
    train_acc: float
    val_acc: float
    lr: float
    wall_seconds: float
    hypers: dict[str, float] = field(default_factory=dict)


@dataclass
class TrainReport:
    rows: list[EpochRow] = field(default_factory=list)
    target_acc: float = 0.98
    best_val_acc: float = 0.0
    epochs_to_target: int | None = None
    seconds_to_target: float | None = None

    def hyper_columns(self) -> list[str]:
        return sorted(self.rows[0].hypers) if self.rows else []

    def metrics_csv(self) -> str:
        """Deterministic per-epoch metrics (no wall clock)."""
        cols = ["epoch", "train_loss", "train_acc", "val_acc", "lr"]
        hyper_cols = self.hyper_columns()
        lines = [",".join(cols + hyper_cols)]
        for r in self.rows:
            vals = [str(r.epoch), repr(r.train_loss), repr(r.train_acc),
                    repr(r.val_acc), repr(r.lr)]
            vals += [repr(r.hypers[h]) for h in hyper_cols]
            lines.append(",".join(vals))
        return "\n".join(lines) + "\n"

    def timing_csv(self) -> str:
        lines = ["epoch,wall_seconds,cumulative_seconds"]
        cum = 0.0
        for r in self.rows:
            cum += r.wall_seconds
            lines.append(f"{r.epoch},{r.wall_seconds:.6f},{cum:.6f}")
        secs = "" if self.seconds_to_target is None else f"{self.seconds_to_target:.6f}"
        lines.append(f"seconds_to_target,{secs},")
        return "\n".join(lines) + "\n"

    def summary_csv(self) -> str:
        epochs = "" if self.epochs_to_target is None else str(self.epochs_to_target)
        return ("best_val_acc,epochs_to_target,target_acc\n"
                f"{self.best_val_acc!r},{epochs},{self.target_acc!r}\n")


def evaluate(model: Model, dataset: Dataset, batch_size: int = 200) -> float:
    """Classification accuracy with caching disabled."""
    correct = 0
    n = len(dataset)
    for start in range(0, n, batch_size):
        logits = model.forward(dataset.images[start:start + batch_size],
                               train_mode=False)
        correct += int((logits.argmax(axis=1)
                        == dataset.labels[start:start + batch_size]).sum())
    return correct / n


def train_model(model: Model, train_set: Dataset, val_set: Dataset,
                opt_config: SgdConfig, batch_size: int = 50, seed: int = 0,
                target_acc: float = 0.98, log=None) -> TrainReport:
    """Run the full SGD recipe and return the per-epoch report."""
    opt = SGD(model.params(), model.grads(), model.param_tags(), opt_config)
    report = TrainReport(target_acc=target_acc)
    cumulative = 0.0
    for epoch in range(opt_config.max_epochs):
        lr = lr_at_epoch(opt_config, epoch)
        loss_sum = 0.0
        seen = 0
        correct = 0
        wall = 0.0
        for batch_idx, (xb, yb) in enumerate(batches(train_set, batch_size,
                                                     seed, epoch)):
            t0 = time.perf_counter()
            logits = model.forward(xb, train_mode=True)
            loss, grad = softmax_cross_entropy(logits, yb)
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}, batch {batch_idx}")
            model.zero_grads()
            model.backward(grad)
            opt.step(lr)
            wall += time.perf_counter() - t0
            loss_sum += loss * len(yb)
            correct += int((logits.argmax(axis=1) == yb).sum())
            seen += len(yb)
        val_acc = evaluate(model, val_set)
        cumulative += wall
        row = EpochRow(
            epoch=epoch,
            train_loss=loss_sum / seen,
            train_acc=correct / seen,
            val_acc=val_acc,
            lr=lr,
            wall_seconds=wall,
            hypers=model.kernel_hypers(),
        )
        report.rows.append(row)
        report.best_val_acc = max(report.best_val_acc, val_acc)
        if report.epochs_to_target is None and val_acc >= target_acc:
            report.epochs_to_target = epoch + 1
            report.seconds_to_target = cumulative
        if log is not None:
            hyp = "".join(f" {k}={v:.4f}" for k, v in row.hypers.items())
            log(f"epoch {epoch:2d}: loss {row.train_loss:.4f} "
                f"train {row.train_acc:.4f} val {val_acc:.4f} "
                f"lr {lr:g} ({wall:.1f}s){hyp}")
    return report
