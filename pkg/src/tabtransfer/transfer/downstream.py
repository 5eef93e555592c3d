"""Fine-tuning a pre-trained extractor, and from-scratch downstream baselines."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..data.dataset import Dataset
from ..evaluation.metrics import UndefinedMetricError, roc_auc
from ..models import FeatureExtractor, Head, ModelSpec, TabularModel, build_extractor
from ..pretrain.checkpoint import PretrainCheckpoint
from ..tensor import AdamW, Tensor, nn, no_record, ops
from ..training import EarlyStopping, TrainingLog, minibatches, optimize, predict
from .plan import EARLY_STOP, FROM_SCRATCH, TransferPlan


@dataclass
class TransferResult:
    model: TabularModel
    plan: TransferPlan
    test_auc: Optional[float]
    epochs_run: int
    best_epoch: int
    log: TrainingLog = field(default_factory=TrainingLog)

    def record(self) -> dict:
        return {
            "setup": self.plan.setup,
            "variant": self.plan.variant,
            "n_samples": self.plan.n_samples,
            "epochs_run": self.epochs_run,
            "best_epoch": self.best_epoch,
            "test_auc": self.test_auc,
            "lr": self.plan.lr,
            "policy": self.plan.policy.kind,
        }


class _Streams:
    def __init__(self, seed: int):
        head, dropout, order, split = np.random.SeedSequence([seed, 0x7A5F]).spawn(4)
        self.head = np.random.default_rng(head)
        self.dropout = np.random.default_rng(dropout)
        self.order = np.random.default_rng(order)
        self.split = np.random.default_rng(split)


def validation_split(y: np.ndarray, fraction: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Seeded ``fraction`` hold-out, stratified by class when both classes occur.

    Returns ``(train_rows, val_rows)``.
    """
    y = np.asarray(y).reshape(-1)
    n = y.size
    n_val = int(round(fraction * n))
    if n_val < 1 or n_val >= n:
        raise ValueError(f"cannot hold out {fraction:.0%} of {n} rows")
    classes = np.unique(y)
    if classes.size < 2:
        val = rng.permutation(n)[:n_val]
    else:
        val_parts = []
        for c in classes:
            rows = rng.permutation(np.flatnonzero(y == c))
            k = int(round(fraction * rows.size))
            val_parts.append(rows[:max(1, min(k, rows.size - 1))] if rows.size > 1 else rows[:0])
        val = np.concatenate(val_parts)
    val = np.sort(val)
    train = np.setdiff1d(np.arange(n), val)
    return train, val


def _val_score(y: np.ndarray, logits: np.ndarray) -> float:
    """Validation AUC; negated BCE when the hold-out has a single class."""
    try:
        return roc_auc(y, logits)
    except UndefinedMetricError:
        z = logits.reshape(-1)
        t = y.reshape(-1)
        return -float(np.mean(np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))))


class _CachedFeatures(nn.Module):
    """Stands in for a frozen extractor: looks up precomputed representations by row id."""

    def __init__(self, features: np.ndarray):
        super().__init__()
        self.features = features

    def forward(self, rows, _unused=None) -> Tensor:
        return Tensor(self.features[np.asarray(rows)])


def _fit(model: TabularModel, plan: TransferPlan, train: Dataset, streams: _Streams,
         monitor: Optional[Dataset] = None) -> tuple[int, int, TrainingLog]:
    """Train on ``train`` per ``plan``; on early stopping restore the best snapshot.

    ``monitor`` only adds a per-epoch ``monitor_auc`` to the log; it never affects training.
    """
    y_all = train.Y[:, :1].astype(float)
    rows = np.arange(train.n_rows)
    val_rows = None
    if plan.policy.kind == EARLY_STOP:
        rows, val_rows = validation_split(train.Y[:, 0], plan.policy.val_fraction, streams.split)

    if plan.frozen:
        # the extractor stays in eval mode, so its output is fixed: compute once
        model.extractor.eval()
        feats = predict(model.extractor, train.X_num, train.X_cat)
        body = _CachedFeatures(feats)
        params = model.head.named_parameters("head.")

        def forward(idx):
            return model.head(body(idx))
    else:
        params = model.named_parameters()

        def forward(idx):
            return model(train.X_num[idx], train.X_cat[idx])

    opt = AdamW(params, lr=plan.lr, weight_decay=plan.weight_decay)
    stopper = EarlyStopping(plan.policy.patience if val_rows is not None else None)
    history = TrainingLog()
    best_state = None
    epoch = 0
    batch = min(plan.batch_size, rows.size)
    for epoch in range(1, plan.policy.epochs + 1):
        model.head.train()
        if not plan.frozen:
            model.extractor.train()
        total = 0.0
        for b, sel in enumerate(minibatches(rows.size, batch, streams.order)):
            idx = rows[sel]
            total += optimize(lambda: ops.bce_with_logits(forward(idx), y_all[idx]), opt, epoch, b,
                              f"{plan.setup} fine-tuning") * idx.size
        entry = {"epoch": epoch, "train_loss": total / rows.size}
        if val_rows is not None:
            model.head.eval()
            model.extractor.eval()
            with no_record():
                logits = forward(val_rows).data
            score = _val_score(y_all[val_rows], logits)
            entry["val_score"] = score
            if stopper.observe(epoch, score):
                best_state = model.state_dict()
        if monitor is not None:
            entry["monitor_auc"] = _evaluate(model, monitor)
        history.append(**entry)
        if stopper.should_stop:
            break
    if best_state is not None:
        model.load_state_dict(best_state)
        return epoch, stopper.best_epoch, history
    return epoch, epoch, history


def _evaluate(model: TabularModel, test: Optional[Dataset]) -> Optional[float]:
    if test is None:
        return None
    logits = predict(model, test.X_num, test.X_cat)[:, 0]
    return roc_auc(test.Y[:, 0], logits)


def finetune(checkpoint: PretrainCheckpoint, plan: TransferPlan, train: Dataset, test: Optional[Dataset] = None,
             seed: int = 0) -> TransferResult:
    """Fresh downstream head on the checkpoint's extractor, trained per ``plan``."""
    if plan.setup == FROM_SCRATCH:
        raise ValueError("use train_from_scratch for FromScratch plans")
    streams = _Streams(seed)
    extractor = checkpoint.build_extractor(streams.dropout)
    extractor.check_fingerprint(train.schema.fingerprint())
    if test is not None:
        extractor.check_fingerprint(test.schema.fingerprint())
    return _run(extractor, plan, train, test, streams)


def attach_extractor(extractor: FeatureExtractor, plan: TransferPlan, rng: np.random.Generator) -> TabularModel:
    return TabularModel(extractor, Head(plan.head, extractor.d_repr, 1, rng))


def _run(extractor: FeatureExtractor, plan: TransferPlan, train: Dataset, test: Optional[Dataset],
         streams: _Streams, monitor: Optional[Dataset] = None) -> TransferResult:
    if train.n_targets != 1:
        train = train.select_targets([0])
    model = attach_extractor(extractor, plan, streams.head)
    model.set_rng(streams.dropout)
    epochs_run, best_epoch, history = _fit(model, plan, train, streams, monitor)
    return TransferResult(model, plan, _evaluate(model, test), epochs_run, best_epoch, history)


def train_from_scratch(spec: ModelSpec, plan: TransferPlan, train: Dataset, test: Optional[Dataset] = None,
                       seed: int = 0, monitor: Optional[Dataset] = None) -> TransferResult:
    """Randomly initialized ``spec`` trained on the downstream rows only."""
    if plan.setup != FROM_SCRATCH:
        raise ValueError("train_from_scratch needs a FromScratch plan")
    streams = _Streams(seed)
    init = np.random.default_rng(np.random.SeedSequence([seed, 0x5C2A]))
    extractor = build_extractor(spec, train.schema, init)
    return _run(extractor, plan, train, test, streams, monitor)
