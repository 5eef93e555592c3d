"""Mini-batch training helpers shared by pre-training and fine-tuning."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np

from .tensor import AdamW, Tape, Tensor, no_record, nn


class NonFiniteLossError(FloatingPointError):
    def __init__(self, value: float, epoch: int, batch: int, context: str = ""):
        self.value, self.epoch, self.batch = value, epoch, batch
        where = f" during {context}" if context else ""
        super().__init__(f"non-finite loss {value!r}{where} at epoch {epoch}, batch {batch}")


def minibatches(n: int, batch_size: int, rng: np.random.Generator, shuffle: bool = True) -> Iterator[np.ndarray]:
    order = rng.permutation(n) if shuffle else np.arange(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def optimize(loss_fn: Callable[[], Tensor], optimizer: AdamW, epoch: int = 0, batch: int = 0,
             context: str = "") -> float:
    """One optimizer step on ``loss_fn()``; gradients only for the optimizer's parameters."""
    with Tape() as tape:
        loss = loss_fn()
    value = float(loss.data)
    if not np.isfinite(value):
        raise NonFiniteLossError(value, epoch, batch, context)
    grads = tape.backward(loss, wrt=optimizer.params.values())
    optimizer.step({p: grads[p] for p in optimizer.params.values()})
    return value


@dataclass
class EarlyStopping:
    """Track a maximized metric; stop after ``patience`` epochs without improvement."""

    patience: Optional[int]
    best: float = -np.inf
    best_epoch: int = 0
    since_best: int = 0

    def observe(self, epoch: int, metric: float) -> bool:
        """Record ``metric`` for ``epoch``; return True if it is a new best."""
        if np.isfinite(metric) and metric > self.best:
            self.best, self.best_epoch, self.since_best = float(metric), epoch, 0
            return True
        self.since_best += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.patience is not None and self.since_best >= self.patience


def predict(module: nn.Module, x_num: np.ndarray, x_cat: np.ndarray, batch_size: int = 2048) -> np.ndarray:
    """Eval-mode forward pass in batches; restores the previous train/eval mode."""
    was_training = module.training
    module.eval()
    out = []
    with no_record():
        for start in range(0, x_num.shape[0], batch_size):
            sl = slice(start, start + batch_size)
            out.append(module(x_num[sl], x_cat[sl]).data)
    module.train(was_training)
    if not out:
        return np.zeros((0, 0))
    return np.concatenate(out, axis=0)


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class TrainingLog:
    """Per-epoch records, written as JSON lines."""

    records: list = field(default_factory=list)

    def append(self, **record) -> None:
        self.records.append(record)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.records:
                fh.write(json.dumps(r, sort_keys=True) + "\n")

    def column(self, key: str) -> list:
        return [r.get(key) for r in self.records]
