"""Joint predictor of one or more feature columns from the remaining columns."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..data.dataset import CATEGORICAL, Column, Dataset, SchemaError
from ..models import MLP_HEAD, FeatureExtractor, Head, TabularModel
from ..tensor import AdamW, Tensor, no_record, ops
from ..training import EarlyStopping, TrainingLog, minibatches, optimize, predict
from ..transfer.downstream import validation_split
from ..transfer.plan import EARLY_STOP, EpochPolicy


@dataclass(frozen=True)
class TargetLayout:
    """Packed output layout: one output per numerical feature, one logit per
    embedding slot of each categorical feature."""

    columns: tuple[Column, ...]

    @classmethod
    def for_features(cls, source: Dataset, features: Sequence[str]) -> "TargetLayout":
        cols = []
        for name in features:
            try:
                cols.append(source.schema.column(name))
            except KeyError:
                raise SchemaError(f"feature {name!r} is not a column of the source data") from None
        # numerical first, matching the dataset storage order
        return cls(tuple(c for c in cols if c.kind != CATEGORICAL) + tuple(c for c in cols if c.kind == CATEGORICAL))

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def numerical(self) -> list[str]:
        return [c.name for c in self.columns if c.kind != CATEGORICAL]

    @property
    def categorical(self) -> list[Column]:
        return [c for c in self.columns if c.kind == CATEGORICAL]

    @property
    def width(self) -> int:
        return len(self.numerical) + sum(c.n_embeddings for c in self.categorical)

    def slices(self) -> list[slice]:
        start = len(self.numerical)
        out = []
        for c in self.categorical:
            out.append(slice(start, start + c.n_embeddings))
            start += c.n_embeddings
        return out

    def targets(self, source: Dataset) -> tuple[np.ndarray, np.ndarray]:
        num = np.column_stack([source.numerical_column(n) for n in self.numerical]) if self.numerical \
            else np.zeros((source.n_rows, 0))
        cat = np.column_stack([source.categorical_column(c.name) for c in self.categorical]) if self.categorical \
            else np.zeros((source.n_rows, 0), dtype=np.int64)
        if np.isnan(num).any() or (cat < 0).any():
            raise SchemaError("feature targets must be complete; impute the source data first")
        return num.astype(float), cat.astype(np.int64)


def joint_loss(out: Tensor, layout: TargetLayout, num: np.ndarray, cat: np.ndarray) -> Tensor:
    """Sum over features of each feature's mean loss: MSE for numerical, CE for categorical."""
    terms = []
    n_num = len(layout.numerical)
    if n_num:
        pred = ops.getitem(out, (slice(None), slice(0, n_num)))
        terms.append(ops.mul(ops.mse(pred, num), float(n_num)))
    for j, sl in enumerate(layout.slices()):
        terms.append(ops.softmax_cross_entropy(ops.getitem(out, (slice(None), sl)), cat[:, j]))
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total


@dataclass
class FeaturePredictor:
    """Extractor plus a joint output head; input columns are the source data
    without the predicted features."""

    model: TabularModel
    layout: TargetLayout
    validation_error: dict = field(default_factory=dict)
    epochs_run: int = 0
    best_epoch: int = 0
    log: TrainingLog = field(default_factory=TrainingLog)

    @property
    def features(self) -> list[str]:
        return self.layout.names

    def raw_outputs(self, inputs: Dataset) -> np.ndarray:
        self.model.extractor.check_fingerprint(inputs.schema.fingerprint())
        return predict(self.model, inputs.X_num, inputs.X_cat)

    def predict(self, inputs: Dataset) -> dict[str, np.ndarray]:
        """Pseudo-values keyed by feature name; categorical values are the
        most likely observed category code."""
        out = self.raw_outputs(inputs)
        values = {name: out[:, j].copy() for j, name in enumerate(self.layout.numerical)}
        for col, sl in zip(self.layout.categorical, self.layout.slices()):
            logits = out[:, sl][:, :col.category_count]   # never predict the reserved missing slot
            values[col.name] = np.argmax(logits, axis=1).astype(np.int64)
        return values


def feature_errors(values: dict[str, np.ndarray], truth: Dataset, layout: TargetLayout) -> dict[str, float]:
    """MSE per numerical feature, error rate per categorical feature."""
    num, cat = layout.targets(truth)
    errors = {name: float(np.mean((values[name] - num[:, j]) ** 2)) for j, name in enumerate(layout.numerical)}
    for j, col in enumerate(layout.categorical):
        errors[col.name] = float(np.mean(values[col.name] != cat[:, j]))
    return errors


def fit_feature_predictor(extractor: FeatureExtractor, source: Dataset, features: Sequence[str], lr: float,
                          policy: EpochPolicy, batch_size: int, seed: int = 0,
                          weight_decay: float = 0.0) -> FeaturePredictor:
    """Train ``extractor`` end to end with a fresh two-hidden-layer head to
    predict ``features`` of ``source`` from its other columns.

    With an early-stopping policy, a hold-out of the rows picks the epoch with
    the lowest joint loss; otherwise the final epoch is kept. The reported
    validation error is measured on the hold-out when there is one, else on
    the training rows.
    """
    layout = TargetLayout.for_features(source, features)
    inputs = source.drop_features(layout.names)
    extractor.check_fingerprint(inputs.schema.fingerprint())
    head_seq, dropout_seq, order_seq, split_seq = np.random.SeedSequence([seed, 0x9F5E]).spawn(4)
    model = TabularModel(extractor, Head(MLP_HEAD, extractor.d_repr, layout.width, np.random.default_rng(head_seq)))
    model.set_rng(np.random.default_rng(dropout_seq))
    order = np.random.default_rng(order_seq)
    num, cat = layout.targets(source)

    rows = np.arange(source.n_rows)
    val_rows = None
    if policy.kind == EARLY_STOP and source.n_rows >= 2:
        rows, val_rows = _holdout(source.n_rows, policy.val_fraction, np.random.default_rng(split_seq))

    X, C = inputs.X_num, inputs.X_cat
    opt = AdamW(model.named_parameters(), lr=lr, weight_decay=weight_decay)
    stopper = EarlyStopping(policy.patience if val_rows is not None else None)
    log = TrainingLog()
    best_state = None
    batch = max(1, min(batch_size, rows.size))
    epoch = 0
    for epoch in range(1, policy.epochs + 1):
        model.train()
        total = 0.0
        for b, sel in enumerate(minibatches(rows.size, batch, order)):
            idx = rows[sel]
            total += optimize(lambda: joint_loss(model(X[idx], C[idx]), layout, num[idx], cat[idx]), opt, epoch, b,
                              "feature prediction") * idx.size
        entry = {"epoch": epoch, "train_loss": total / rows.size}
        if val_rows is not None:
            model.eval()
            with no_record():
                val_loss = float(joint_loss(model(X[val_rows], C[val_rows]), layout, num[val_rows], cat[val_rows]).data)
            entry["val_loss"] = val_loss
            if stopper.observe(epoch, -val_loss):
                best_state = model.state_dict()
        log.append(**entry)
        if stopper.should_stop:
            break
    best_epoch = epoch
    if best_state is not None:
        model.load_state_dict(best_state)
        best_epoch = stopper.best_epoch
    predictor = FeaturePredictor(model, layout, epochs_run=epoch, best_epoch=best_epoch, log=log)
    check = source.subset(val_rows if val_rows is not None else rows)
    predictor.validation_error = feature_errors(predictor.predict(check.drop_features(features)), check, layout)
    return predictor


def _holdout(n: int, fraction: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    if int(round(fraction * n)) < 1 or int(round(fraction * n)) >= n:
        return np.arange(n), None
    return validation_split(np.zeros(n), fraction, rng)


def predictor_outputs_in_band(values: np.ndarray, reference: np.ndarray, n_std: float = 3.0) -> np.ndarray:
    """Mask of pseudo-values inside ``[min - n_std*sd, max + n_std*sd]`` of the reference values."""
    reference = np.asarray(reference, dtype=float)
    sd = float(np.std(reference))
    lo, hi = float(np.min(reference)) - n_std * sd, float(np.max(reference)) + n_std * sd
    values = np.asarray(values, dtype=float)
    return (values >= lo) & (values <= hi)
