"""Training and evaluation loops shared by the estimator and the command line."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import model as model_mod
from .data import WindowSample, batch_iter, stack_samples
from .errors import NumericalError
from .functional import l1_loss
from .metrics import HORIZONS_MS, horizon_frames
from .model import DMSGCNModel
from .optim import Adam, lr_schedule
from .tensor import Tape, backward, no_grad, use_tape

log = logging.getLogger(__name__)


@dataclass
class TrainSettings:
    epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lr_decay_every: int = 10
    lr_decay_factor: float = 0.5
    shuffle_seed: int = 0
    checkpoint_every: int = 0


@dataclass
class EpochLog:
    epoch: int
    lr: float
    train_loss: float
    val_loss: float = math.nan


@dataclass
class History:
    epochs: list = field(default_factory=list)

    @property
    def train_losses(self) -> list[float]:
        return [e.train_loss for e in self.epochs]

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "lr", "train_loss", "val_loss"])
            for e in self.epochs:
                w.writerow([e.epoch, repr(e.lr), repr(e.train_loss), repr(e.val_loss)])


def to_frames(samples: Sequence[WindowSample], dtype) -> tuple[np.ndarray, np.ndarray]:
    obs, tgt = stack_samples(samples)
    return obs.astype(dtype), tgt.astype(dtype)


def train_step(model: DMSGCNModel, opt: Adam, observed: np.ndarray, target: np.ndarray) -> float:
    tape = Tape()
    with use_tape(tape):
        loss = l1_loss(model.forward_frames(observed), target)
        value = float(loss.data)
        if not math.isfinite(value):
            raise NumericalError(f"loss became {value}")
        backward(loss)
    tape.clear()
    opt.step()
    return value


def evaluate_loss(model: DMSGCNModel, samples, batch_size: int = 64) -> float:
    """Sample-weighted l1 loss in evaluation mode."""
    if not samples:
        return math.nan
    was_training = model.training
    model.eval()
    total, n = 0.0, 0
    with no_grad():
        for batch in batch_iter(samples, batch_size):
            obs, tgt = to_frames(batch, model.dtype)
            total += float(l1_loss(model.forward_frames(obs), tgt).data) * len(batch)
            n += len(batch)
    model.train(was_training)
    return total / n


def train(
    model: DMSGCNModel,
    train_samples: Sequence[WindowSample],
    val_samples: Sequence[WindowSample] = (),
    settings: TrainSettings | None = None,
    checkpoint_dir=None,
    on_epoch: Callable[[EpochLog], None] | None = None,
) -> History:
    """Adam on the l1 objective with a step-halving learning rate.

    Batches are reshuffled every epoch from ``settings.shuffle_seed + epoch``.
    Epoch numbers are zero-based, so the rate first halves at epoch 10.
    """
    s = settings or TrainSettings()
    opt = Adam(model.parameters(), lr=s.lr, beta1=s.beta1, beta2=s.beta2, eps=s.eps)
    history = History()
    model.train()
    for epoch in range(s.epochs):
        opt.lr = lr_schedule(epoch, s.lr, s.lr_decay_every, s.lr_decay_factor)
        total, n = 0.0, 0
        for batch in batch_iter(train_samples, s.batch_size, shuffle_seed=s.shuffle_seed + epoch):
            obs, tgt = to_frames(batch, model.dtype)
            total += train_step(model, opt, obs, tgt) * len(batch)
            n += len(batch)
        entry = EpochLog(epoch, opt.lr, total / n, evaluate_loss(model, val_samples))
        model.train()
        history.epochs.append(entry)
        log.info("epoch %d lr %.3g train %.4f val %.4f", epoch, entry.lr, entry.train_loss,
                 entry.val_loss)
        if on_epoch is not None:
            on_epoch(entry)
        if checkpoint_dir and s.checkpoint_every and (epoch + 1) % s.checkpoint_every == 0:
            model_mod.save(model, Path(checkpoint_dir) / f"epoch_{epoch:04d}")
    model.eval()
    return history


def predict(model: DMSGCNModel, observed: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """``(n, T, V, 3)`` observed frames to ``(n, K, V, 3)`` float64 predictions."""
    was_training = model.training
    model.eval()
    out = []
    with no_grad():
        for start in range(0, len(observed), batch_size):
            chunk = np.asarray(observed[start:start + batch_size], dtype=model.dtype)
            out.append(model.forward_frames(chunk).data.astype(np.float64))
    model.train(was_training)
    return np.concatenate(out) if out else np.empty((0,))


# -- evaluation report ----------------------------------------------------------

@dataclass
class EvalReport:
    """Per-action and sample-weighted average MPJPE at fixed millisecond horizons."""

    horizons_ms: tuple
    frames: tuple
    window_rows: list  # (source, offset, action, errors-per-horizon)
    seconds: float = 0.0

    @property
    def actions(self) -> list[str]:
        return sorted({r[2] for r in self.window_rows})

    def errors(self, action: str | None = None) -> np.ndarray:
        rows = [r[3] for r in self.window_rows if action is None or r[2] == action]
        return np.mean(rows, axis=0) if rows else np.full(len(self.frames), np.nan)

    def counts(self) -> dict:
        out: dict = {}
        for r in self.window_rows:
            out[r[2]] = out.get(r[2], 0) + 1
        return out

    @property
    def average(self) -> np.ndarray:
        return self.errors(None)

    def table(self) -> str:
        head = ["ms".ljust(16)] + [f"{ms:>8d}" for ms in self.horizons_ms] + ["       n"]
        lines = ["".join(head), "".join(["frame".ljust(16)] + [
            f"{f:>8d}" for f in self.frames])]
        counts = self.counts()
        for action in self.actions:
            lines.append(action.ljust(16) + "".join(f"{e:8.2f}" for e in self.errors(action))
                         + f"{counts[action]:8d}")
        lines.append("average".ljust(16) + "".join(f"{e:8.2f}" for e in self.average)
                     + f"{len(self.window_rows):8d}")
        return "\n".join(lines)

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["action", "n"] + [f"{ms}ms" for ms in self.horizons_ms])
            counts = self.counts()
            for action in self.actions:
                w.writerow([action, counts[action]] + [repr(float(e)) for e in self.errors(action)])
            w.writerow(["average", len(self.window_rows)]
                       + [repr(float(e)) for e in self.average])

    def write_windows_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["source", "offset", "action"] + [f"{ms}ms" for ms in self.horizons_ms])
            for src, off, action, errs in self.window_rows:
                w.writerow([src, off, action] + [repr(float(e)) for e in errs])


def report_from_predictions(pred: np.ndarray, samples: Sequence[WindowSample], fps: float = 25.0,
                            horizons_ms=HORIZONS_MS) -> EvalReport:
    frames = horizon_frames(fps, horizons_ms)
    K = pred.shape[1]
    if max(frames) > K:
        raise ValueError(f"horizon frame {max(frames)} exceeds the {K} predicted frames")
    target = np.stack([s.target for s in samples]).astype(np.float64)
    per_frame = np.linalg.norm(pred - target, axis=-1).mean(axis=-1)  # n, K
    idx = [f - 1 for f in frames]
    rows = [(s.source, s.offset, s.action, per_frame[i, idx]) for i, s in enumerate(samples)]
    return EvalReport(tuple(horizons_ms), frames, rows)


def evaluate(model: DMSGCNModel, samples: Sequence[WindowSample], fps: float = 25.0,
             horizons_ms=HORIZONS_MS, batch_size: int = 64) -> EvalReport:
    t0 = time.perf_counter()
    obs = np.stack([s.observed for s in samples])
    report = report_from_predictions(predict(model, obs, batch_size), samples, fps, horizons_ms)
    report.seconds = time.perf_counter() - t0
    return report


def zero_velocity(samples: Sequence[WindowSample], K: int | None = None) -> np.ndarray:
    """Repeat each window's last observed pose over the prediction horizon."""
    obs = np.stack([s.observed for s in samples]).astype(np.float64)
    K = K or samples[0].target.shape[0]
    return np.repeat(obs[:, -1:], K, axis=1)
