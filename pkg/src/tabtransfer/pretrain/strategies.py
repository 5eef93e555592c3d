"""Upstream pre-training: supervised multi-label, masked-feature, contrastive, SCARF."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..data.dataset import Dataset
from ..evaluation.metrics import mean_auc
from ..models import InputLayout, ModelSpec, attach_head, build_extractor
from ..tensor import AdamW, Tensor, nn, ops
from ..training import EarlyStopping, TrainingLog, minibatches, optimize, predict
from .augment import column_pools, cutmix, mixup_embed, mlm_mask, scarf_corrupt
from .checkpoint import PretrainCheckpoint
from .config import CONTRASTIVE, MLM, SCARF, SUPERVISED, PretrainConfig
from .losses import ColumnHeads, ProjectionHead, info_nce

@dataclass
class PretrainResult:
    checkpoint: PretrainCheckpoint
    log: TrainingLog
    extractor: Optional[nn.Module] = None
    heads: Optional[nn.Module] = None


class _Streams:
    """Independent RNG streams for init, dropout, batch order and augmentation."""

    def __init__(self, seed: int):
        init, dropout, order, aug = np.random.SeedSequence(seed).spawn(4)
        self.init = np.random.default_rng(init)
        self.dropout = np.random.default_rng(dropout)
        self.order = np.random.default_rng(order)
        self.aug = np.random.default_rng(aug)


def _optimizer(params: dict, spec: ModelSpec, config: PretrainConfig) -> AdamW:
    lr = config.lr if config.lr is not None else spec.lr
    wd = config.weight_decay if config.weight_decay is not None else spec.weight_decay
    return AdamW(params, lr=lr, weight_decay=wd)


def _layout(dataset: Dataset) -> InputLayout:
    return InputLayout.from_schema(dataset.schema)


def pretrain_supervised(spec: ModelSpec, upstream: Dataset, config: PretrainConfig, seed: int = 0,
                        val: Optional[Dataset] = None) -> PretrainResult:
    """Multi-label BCE on all upstream targets; early stopping on mean validation AUC."""
    if upstream.n_targets < 1:
        raise ValueError("supervised pre-training needs upstream targets")
    rs = _Streams(seed)
    extractor = build_extractor(spec, _layout(upstream), rs.init)
    model = attach_head(extractor, "Linear", upstream.n_targets, rs.init)
    model.set_rng(rs.dropout)
    opt = _optimizer(model.named_parameters(), spec, config)
    stopper = EarlyStopping(config.patience if val is not None else None)
    history = TrainingLog()
    best_state = model.state_dict()
    X, C, Y = upstream.X_num, upstream.X_cat, upstream.Y.astype(float)
    epoch = 0
    for epoch in range(1, config.epochs + 1):
        model.train()
        losses = []
        for b, idx in enumerate(minibatches(upstream.n_rows, config.batch_size, rs.order)):
            losses.append(optimize(lambda: ops.bce_with_logits(model(X[idx], C[idx]), Y[idx]), opt, epoch, b,
                                   "supervised pre-training") * len(idx))
        train_loss = float(np.sum(losses) / upstream.n_rows)
        metric = mean_auc(val.Y, predict(model, val.X_num, val.X_cat)) if val is not None else -train_loss
        history.append(epoch=epoch, train_loss=train_loss, val_auc=metric if val is not None else None)
        if stopper.observe(epoch, metric):
            best_state = model.state_dict()
        if stopper.should_stop:
            break
    model.load_state_dict(best_state)
    ckpt = _checkpoint(model.extractor, model.head, spec, SUPERVISED, stopper, epoch, upstream,
                       best_metric=stopper.best if val is not None else None)
    return PretrainResult(ckpt, history, model.extractor, model.head)


def _checkpoint(extractor, head, spec, strategy, stopper, epochs_run, upstream, best_metric) -> PretrainCheckpoint:
    return PretrainCheckpoint(
        spec=spec,
        layout=extractor.layout,
        strategy=strategy,
        extractor_state=extractor.state_dict(),
        head_state=head.state_dict() if head is not None else {},
        best_metric=best_metric,
        best_epoch=stopper.best_epoch if stopper is not None else epochs_run,
        epochs_run=epochs_run,
        target_names=tuple(upstream.schema.target_names),
    )


def _self_supervised(spec: ModelSpec, upstream: Dataset, config: PretrainConfig, seed: int, strategy: str,
                     build_heads: Callable, batch_loss: Callable, min_batch: int = 1) -> PretrainResult:
    rs = _Streams(seed)
    extractor = build_extractor(spec, _layout(upstream), rs.init)
    heads = build_heads(extractor, rs.init)
    params = dict(extractor.named_parameters("extractor."))
    params.update(heads.named_parameters("heads."))
    extractor.set_rng(rs.dropout)
    heads.set_rng(rs.dropout)
    opt = _optimizer(params, spec, config)
    history = TrainingLog()
    X, C = upstream.X_num, upstream.X_cat
    epoch = 0
    for epoch in range(1, config.epochs + 1):
        extractor.train()
        heads.train()
        total, count = 0.0, 0
        for b, idx in enumerate(minibatches(upstream.n_rows, config.batch_size, rs.order)):
            if len(idx) < min_batch:
                continue
            value = optimize(lambda: batch_loss(extractor, heads, X[idx], C[idx], rs.aug), opt, epoch, b,
                             f"{strategy} pre-training")
            total += value * len(idx)
            count += len(idx)
        history.append(epoch=epoch, train_loss=total / max(count, 1))
    stopper = EarlyStopping(None)
    stopper.best_epoch = epoch
    ckpt = _checkpoint(extractor, heads, spec, strategy, stopper, epoch, upstream, None)
    return PretrainResult(ckpt, history, extractor, heads)


def mlm_batch_loss(extractor, heads: ColumnHeads, x_num, x_cat, rng) -> Tensor:
    index, mask = mlm_mask(x_num.shape[0], extractor.layout.n_features, rng)
    out = heads(extractor(x_num, x_cat, mask=mask))
    return heads.masked_loss(out, x_num, x_cat, index)


def pretrain_mlm(spec: ModelSpec, upstream: Dataset, config: PretrainConfig, seed: int = 0) -> PretrainResult:
    """Mask one feature per row in embedding space and predict it with that column's head."""
    return _self_supervised(
        spec, upstream, config, seed, MLM,
        lambda ex, rng: ColumnHeads(ex.d_repr, ex.layout, rng),
        mlm_batch_loss,
    )


class ContrastiveHeads(nn.Module):
    def __init__(self, d: int, layout: InputLayout, projection_dim: int, rng: np.random.Generator,
                 denoise: bool = True):
        super().__init__()
        self.projection = ProjectionHead(d, projection_dim, rng)
        self.denoise = ColumnHeads(d, layout, rng, hidden=d) if denoise else None


def contrastive_batch_loss(config: PretrainConfig):
    def loss(extractor, heads: ContrastiveHeads, x_num, x_cat, rng) -> Tensor:
        h_clean = extractor(x_num, x_cat)
        num, cat, _, _ = cutmix(x_num, x_cat, config.cutmix_keep, rng)
        mixed = mixup_embed(extractor.embed(num, cat), config.mixup, rng.permutation(x_num.shape[0]))
        h_aug = extractor.encode(mixed)
        total = info_nce(heads.projection(h_clean), heads.projection(h_aug), config.temperature)
        if heads.denoise is not None and config.denoise_weight:
            rec = heads.denoise.reconstruction_loss(heads.denoise(h_aug), x_num, x_cat)
            total = total + ops.mul(rec, config.denoise_weight)
        return total

    return loss


def pretrain_contrastive(spec: ModelSpec, upstream: Dataset, config: PretrainConfig, seed: int = 0) -> PretrainResult:
    """Clean view vs CutMix-then-Mixup view: InfoNCE plus per-column denoising."""
    return _self_supervised(
        spec, upstream, config, seed, CONTRASTIVE,
        lambda ex, rng: ContrastiveHeads(ex.d_repr, ex.layout, config.projection_dim, rng),
        contrastive_batch_loss(config),
        min_batch=2,
    )


def pretrain_scarf(spec: ModelSpec, upstream: Dataset, config: PretrainConfig, seed: int = 0) -> PretrainResult:
    """Clean view vs a view with entries resampled from the column marginals; InfoNCE only."""
    pools = column_pools(upstream.X_num, upstream.X_cat)

    def loss(extractor, heads: ContrastiveHeads, x_num, x_cat, rng) -> Tensor:
        num, cat, _ = scarf_corrupt(x_num, x_cat, config.scarf_rate, pools, rng)
        return info_nce(heads.projection(extractor(x_num, x_cat)), heads.projection(extractor(num, cat)),
                        config.temperature)

    return _self_supervised(
        spec, upstream, config, seed, SCARF,
        lambda ex, rng: ContrastiveHeads(ex.d_repr, ex.layout, config.projection_dim, rng, denoise=False),
        loss,
        min_batch=2,
    )


def pretrain(spec: ModelSpec, upstream: Dataset, config: PretrainConfig, seed: int = 0,
             val: Optional[Dataset] = None) -> PretrainResult:
    if config.strategy == SUPERVISED:
        return pretrain_supervised(spec, upstream, config, seed, val)
    runner = {MLM: pretrain_mlm, CONTRASTIVE: pretrain_contrastive, SCARF: pretrain_scarf}[config.strategy]
    return runner(spec, upstream, config, seed)
