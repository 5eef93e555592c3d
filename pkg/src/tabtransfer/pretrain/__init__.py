from .augment import column_pools, cutmix, mixup_embed, mlm_mask, scarf_corrupt
from .checkpoint import PretrainCheckpoint
from .config import CONTRASTIVE, MLM, SCARF, STRATEGIES, SUPERVISED, PretrainConfig
from .losses import ColumnHeads, ProjectionHead, info_nce
from .strategies import (
    PretrainResult,
    pretrain,
    pretrain_contrastive,
    pretrain_mlm,
    pretrain_scarf,
    pretrain_supervised,
)

__all__ = [
    "CONTRASTIVE",
    "ColumnHeads",
    "MLM",
    "PretrainCheckpoint",
    "PretrainConfig",
    "PretrainResult",
    "ProjectionHead",
    "SCARF",
    "STRATEGIES",
    "SUPERVISED",
    "column_pools",
    "cutmix",
    "info_nce",
    "mixup_embed",
    "mlm_mask",
    "pretrain",
    "pretrain_contrastive",
    "pretrain_mlm",
    "pretrain_scarf",
    "pretrain_supervised",
    "scarf_corrupt",
]
