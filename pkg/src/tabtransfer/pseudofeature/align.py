"""Aligning upstream and downstream feature sets with predicted pseudo-values.

``align_upstream_missing`` handles columns that only the downstream data has:
pre-train without them, fine-tune that extractor on the downstream rows to
predict them, fill them into the upstream rows, and pre-train again on the
augmented upstream data. ``align_downstream_missing`` handles columns that
only the upstream data has: a predictor trained on the upstream rows fills
them into the downstream rows.

All values stay in the preprocessed (model input) space.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..data.dataset import CATEGORICAL, Column, Dataset, SchemaError
from ..gbdt.params import GbdtParams
from ..gbdt.stacking import dataset_matrix, fit_dataset
from ..models import ModelSpec, build_extractor
from ..models.extractors import InputLayout
from ..pretrain.checkpoint import PretrainCheckpoint
from ..pretrain.config import PretrainConfig
from ..pretrain.strategies import pretrain
from ..transfer.plan import DOWNSTREAM_PATIENCE, FINETUNE_LR, MLP_E2E, EpochPolicy, select_epoch_policy
from .predictor import FeaturePredictor, fit_feature_predictor, predictor_outputs_in_band

log = logging.getLogger(__name__)

UPSTREAM_MISSING = "UpstreamMissing"
DOWNSTREAM_MISSING = "DownstreamMissing"
DIRECTIONS = (UPSTREAM_MISSING, DOWNSTREAM_MISSING)
BAND_STDS = 3.0


@dataclass
class AlignmentResult:
    """Both sides on one schema, plus the artifacts of every stage."""

    direction: str
    features: tuple[str, ...]
    upstream: Dataset
    downstream: Dataset
    checkpoint: PretrainCheckpoint
    predictor: FeaturePredictor
    upstream_val: Optional[Dataset] = None
    stage_checkpoint: Optional[PretrainCheckpoint] = None
    band_violations: dict = field(default_factory=dict)
    checkpoint_paths: dict = field(default_factory=dict)

    @property
    def fingerprint(self) -> str:
        return self.upstream.schema.fingerprint()

    def align(self, dataset: Dataset) -> Dataset:
        """Bring further downstream rows (e.g. a test set) onto the aligned schema,
        imputing the features with the same predictor when the downstream lacks them."""
        if self.direction == UPSTREAM_MISSING:
            return dataset.align_to(self.upstream.schema)
        base = dataset.align_to(self.upstream.drop_features(self.features).schema)
        values = self.predictor.predict(base)
        return append_features(base, self.predictor.layout.columns, values).align_to(self.upstream.schema)

    def manifest(self) -> dict:
        return {
            "direction": self.direction,
            "features": list(self.features),
            "feature_kinds": {c.name: c.kind for c in self.predictor.layout.columns},
            "schema_fingerprint": self.fingerprint,
            "predictor_validation_error": self.predictor.validation_error,
            "predictor_epochs_run": self.predictor.epochs_run,
            "predictor_best_epoch": self.predictor.best_epoch,
            "band_violations": self.band_violations,
            "stage_checkpoints": dict(self.checkpoint_paths),
        }

    def save(self, out_dir) -> dict:
        """Write the checkpoints and ``alignment.json``; returns the manifest."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if self.stage_checkpoint is not None:
            self.stage_checkpoint.save(out / "stage1.npz")
            self.checkpoint_paths["stage1"] = "stage1.npz"
        self.checkpoint.save(out / "final.npz")
        self.checkpoint_paths["final"] = "final.npz"
        manifest = self.manifest()
        (out / "alignment.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return manifest


def _check_sides(have: Dataset, lack: Dataset, features: Sequence[str], have_side: str, lack_side: str) -> None:
    if not features:
        raise ValueError("name at least one feature to align")
    if len(set(features)) != len(features):
        raise ValueError("feature names must be unique")
    have_names = {c.name for c in have.schema.columns}
    lack_names = {c.name for c in lack.schema.columns}
    for name in features:
        if name in have_names and name in lack_names:
            raise SchemaError(f"feature {name!r} is present on both sides; nothing to align")
        if name not in have_names:
            raise SchemaError(f"feature {name!r} is missing from the {have_side} data")
    shared = have_names - set(features)
    if shared != lack_names:
        raise SchemaError(f"the {lack_side} columns must equal the {have_side} columns minus the aligned features")


def append_features(base: Dataset, columns: Sequence[Column], values: dict[str, np.ndarray]) -> Dataset:
    out = base
    for col in columns:
        if col.kind == CATEGORICAL:
            out = out.with_categorical(col, values[col.name])
        else:
            out = out.with_numerical(col.name, values[col.name])
    return out


def _band_report(values: dict[str, np.ndarray], reference: Dataset, columns: Sequence[Column]) -> dict[str, int]:
    report = {}
    for col in columns:
        if col.kind == CATEGORICAL:
            continue
        inside = predictor_outputs_in_band(values[col.name], reference.numerical_column(col.name), BAND_STDS)
        report[col.name] = int(np.sum(~inside))
        if report[col.name]:
            log.warning("%d pseudo-values of %r fall outside the %g-sd band of the observed values",
                        report[col.name], col.name, BAND_STDS)
    return report


def _downstream_policy(n_rows: int) -> EpochPolicy:
    try:
        return select_epoch_policy(n_rows, MLP_E2E)
    except ValueError:   # sizes off the grid use the early-stopping rule of the large sizes
        return EpochPolicy.early_stop()


def align_upstream_missing(upstream: Dataset, downstream: Dataset, features: Sequence[str], spec: ModelSpec,
                           config: PretrainConfig, seed: int = 0, upstream_val: Optional[Dataset] = None,
                           predictor_lr: float = FINETUNE_LR,
                           stage_checkpoint: Optional[PretrainCheckpoint] = None) -> AlignmentResult:
    """Fill ``features`` (present only downstream) into the upstream rows and
    pre-train on the result.

    The predictor fine-tunes the first-stage extractor end to end with a
    two-hidden-layer head on the downstream rows, with the epoch rule of
    end-to-end transfer at the downstream size. A ``stage_checkpoint`` already
    pre-trained on ``upstream`` replaces the first stage.
    """
    features = tuple(features)
    _check_sides(downstream, upstream, features, "downstream", "upstream")
    if stage_checkpoint is None:
        stage1 = pretrain(spec, upstream, config, seed, val=upstream_val).checkpoint
    elif stage_checkpoint.fingerprint != upstream.schema.fingerprint():
        raise SchemaError("the stage checkpoint was not pre-trained on the upstream feature set")
    else:
        stage1 = stage_checkpoint

    columns = [downstream.schema.column(f) for f in features]
    source = append_features(downstream.drop_features(features).align_to(upstream.schema), columns,
                             {c.name: _column_values(downstream, c) for c in columns})
    extractor = stage1.build_extractor(np.random.default_rng([seed, 0x51]))
    predictor = fit_feature_predictor(extractor, source, features, lr=predictor_lr,
                                      policy=_downstream_policy(downstream.n_rows),
                                      batch_size=min(256, downstream.n_rows), seed=seed)

    values = predictor.predict(upstream)
    augmented = append_features(upstream, predictor.layout.columns, values)
    augmented_val = None
    if upstream_val is not None:
        augmented_val = append_features(upstream_val, predictor.layout.columns, predictor.predict(upstream_val))
    final = pretrain(spec, augmented, config, seed, val=augmented_val).checkpoint
    return AlignmentResult(
        UPSTREAM_MISSING, features, augmented, downstream.align_to(augmented.schema), final, predictor,
        upstream_val=augmented_val, stage_checkpoint=stage1,
        band_violations=_band_report(values, downstream, predictor.layout.columns),
    )


def align_downstream_missing(upstream: Dataset, downstream: Dataset, features: Sequence[str], spec: ModelSpec,
                             config: PretrainConfig, seed: int = 0, upstream_val: Optional[Dataset] = None,
                             checkpoint: Optional[PretrainCheckpoint] = None) -> AlignmentResult:
    """Fill ``features`` (present only upstream) into the downstream rows.

    The predictor is a fresh ``spec`` extractor trained on the upstream rows
    with the pre-training learning rate, early-stopped on a hold-out of those
    rows. ``checkpoint`` is the extractor pre-trained on the full upstream
    data; it is trained here when not given.
    """
    features = tuple(features)
    _check_sides(upstream, downstream, features, "upstream", "downstream")
    if checkpoint is None:
        checkpoint = pretrain(spec, upstream, config, seed, val=upstream_val).checkpoint
    elif checkpoint.fingerprint != upstream.schema.fingerprint():
        raise SchemaError("the checkpoint was not pre-trained on the full upstream feature set")

    inputs_schema = upstream.drop_features(features).schema
    rng = np.random.default_rng([seed, 0x52])
    extractor = build_extractor(spec, InputLayout.from_schema(inputs_schema), rng)
    patience = config.patience if config.patience is not None else DOWNSTREAM_PATIENCE
    predictor = fit_feature_predictor(
        extractor, upstream, features, lr=config.lr if config.lr is not None else spec.lr,
        policy=EpochPolicy.early_stop(max_epochs=config.epochs, patience=patience),
        batch_size=config.batch_size, seed=seed, weight_decay=config.weight_decay or 0.0)

    result = AlignmentResult(DOWNSTREAM_MISSING, features, upstream, downstream, checkpoint, predictor,
                             upstream_val=upstream_val)
    result.downstream = result.align(downstream)
    values = {c.name: _column_values(result.downstream, c) for c in predictor.layout.columns}
    result.band_violations = _band_report(values, upstream, predictor.layout.columns)
    return result


def _column_values(ds: Dataset, col: Column) -> np.ndarray:
    return ds.categorical_column(col.name) if col.kind == CATEGORICAL else ds.numerical_column(col.name)


def select_important_features(dataset: Dataset, k: int, params: GbdtParams = GbdtParams(), seed: int = 0,
                              target: int = 0, exclude: Sequence[str] = ()) -> list[str]:
    """The ``k`` columns with the largest total split gain of a boosted
    ensemble fit on ``dataset`` (raw, imputed features) for one target.

    Equal gains keep the schema order.
    """
    _, _, names = dataset_matrix(dataset)
    candidates = [n for n in names if n not in set(exclude)]
    if not 1 <= k <= len(candidates):
        raise ValueError(f"k={k} must lie in [1, {len(candidates)}] (the number of candidate features)")
    gains = fit_dataset(dataset, params, seed=seed, target=target).feature_importance()
    by_name = dict(zip(names, gains))
    order = sorted(range(len(candidates)), key=lambda i: (-by_name[candidates[i]], i))
    return [candidates[i] for i in order[:k]]
