"""Downstream training setups and the epoch-selection rule."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

LH_FROZEN = "LH_Frozen"
MLP_FROZEN = "MLP_Frozen"
LH_E2E = "LH_E2E"
MLP_E2E = "MLP_E2E"
FROM_SCRATCH = "FromScratch"
TRANSFER_SETUPS = (LH_FROZEN, MLP_FROZEN, LH_E2E, MLP_E2E)
SETUPS = TRANSFER_SETUPS + (FROM_SCRATCH,)

FS = "FS"      # from scratch, architecture tuned on an upstream subsample
FS2 = "FS-2"   # from scratch, architecture of the transfer model

FINETUNE_LR = 5e-5
SCRATCH_LR = 1e-4
MAX_DOWNSTREAM_EPOCHS = 200
DOWNSTREAM_GRID = (4, 10, 20, 100, 200)
VAL_FRACTION = 0.2
DOWNSTREAM_PATIENCE = 30
MAX_BATCH = 256

FIXED = "fixed"
EARLY_STOP = "early_stop"


@dataclass(frozen=True)
class EpochPolicy:
    kind: str
    epochs: int
    patience: Optional[int] = None
    val_fraction: float = 0.0

    @classmethod
    def fixed(cls, epochs: int) -> "EpochPolicy":
        if epochs < 1:
            raise ValueError("a fixed policy needs at least one epoch")
        return cls(FIXED, int(epochs))

    @classmethod
    def early_stop(cls, max_epochs: int = MAX_DOWNSTREAM_EPOCHS, patience: int = DOWNSTREAM_PATIENCE,
                   val_fraction: float = VAL_FRACTION) -> "EpochPolicy":
        return cls(EARLY_STOP, max_epochs, patience, val_fraction)


def head_kind(setup: str) -> str:
    return "MLP2x200" if setup.startswith("MLP") else "Linear"


def is_frozen(setup: str) -> bool:
    return setup in (LH_FROZEN, MLP_FROZEN)


def select_epoch_policy(n_samples: int, setup: str, tuned_epoch: Optional[int] = None,
                        override: Optional[EpochPolicy] = None) -> EpochPolicy:
    """Number of downstream epochs, or validation early stopping, by data size and setup.

    ``setup`` is a transfer setup, ``FS`` (needs ``tuned_epoch``) or ``FS-2``
    (treated like an end-to-end setup).
    """
    if override is not None:
        return override
    if setup == FS:
        if tuned_epoch is None:
            raise ValueError("FS needs the best epoch found while tuning on the upstream subsample")
        return EpochPolicy.fixed(tuned_epoch)
    if setup not in TRANSFER_SETUPS + (FS2, FROM_SCRATCH):
        raise ValueError(f"unknown setup {setup!r}")
    if n_samples not in DOWNSTREAM_GRID:
        raise ValueError(f"n_samples={n_samples} is outside the grid {DOWNSTREAM_GRID}; pass an override policy")
    if n_samples in (4, 10):
        return EpochPolicy.fixed(30)
    if n_samples == 20:
        return EpochPolicy.fixed(60)
    if setup == MLP_FROZEN:
        return EpochPolicy.fixed(100)
    if setup == LH_FROZEN:
        return EpochPolicy.fixed(200)
    return EpochPolicy.early_stop()


@dataclass(frozen=True)
class TransferPlan:
    setup: str
    n_samples: int
    policy: EpochPolicy
    lr: float
    head: str = "Linear"
    weight_decay: float = 0.0
    variant: str = ""

    @property
    def batch_size(self) -> int:
        return max(1, min(MAX_BATCH, self.n_samples))

    @property
    def frozen(self) -> bool:
        return is_frozen(self.setup)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["batch_size"] = self.batch_size
        return d


def make_plan(setup: str, n_samples: int, head: Optional[str] = None, tuned_epoch: Optional[int] = None,
              override: Optional[EpochPolicy] = None, weight_decay: float = 0.0, variant: str = "") -> TransferPlan:
    """Plan for a transfer setup, or for ``FromScratch`` with ``variant`` FS / FS-2."""
    if setup == FROM_SCRATCH:
        if variant not in (FS, FS2):
            raise ValueError("FromScratch needs variant 'FS' or 'FS-2'")
        policy = select_epoch_policy(n_samples, variant, tuned_epoch, override)
        return TransferPlan(setup, n_samples, policy, SCRATCH_LR, head or "Linear", weight_decay, variant)
    if setup not in TRANSFER_SETUPS:
        raise ValueError(f"unknown setup {setup!r}; expected one of {SETUPS}")
    policy = select_epoch_policy(n_samples, setup, override=override)
    return TransferPlan(setup, n_samples, policy, FINETUNE_LR, head or head_kind(setup), weight_decay)
