from .downstream import TransferResult, finetune, train_from_scratch, validation_split
from .plan import (
    DOWNSTREAM_GRID,
    EARLY_STOP,
    FINETUNE_LR,
    FIXED,
    FROM_SCRATCH,
    FS,
    FS2,
    LH_E2E,
    LH_FROZEN,
    MLP_E2E,
    MLP_FROZEN,
    SCRATCH_LR,
    SETUPS,
    TRANSFER_SETUPS,
    EpochPolicy,
    TransferPlan,
    head_kind,
    is_frozen,
    make_plan,
    select_epoch_policy,
)

__all__ = [
    "DOWNSTREAM_GRID",
    "EARLY_STOP",
    "FINETUNE_LR",
    "FIXED",
    "FROM_SCRATCH",
    "FS",
    "FS2",
    "LH_E2E",
    "LH_FROZEN",
    "MLP_E2E",
    "MLP_FROZEN",
    "SCRATCH_LR",
    "SETUPS",
    "TRANSFER_SETUPS",
    "EpochPolicy",
    "TransferPlan",
    "TransferResult",
    "finetune",
    "head_kind",
    "is_frozen",
    "make_plan",
    "select_epoch_policy",
    "train_from_scratch",
    "validation_split",
]
