"""Boosting hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields


@dataclass(frozen=True)
class GbdtParams:
    """Second-order boosting settings; defaults follow the XGBoost library defaults.

    ``reg_lambda`` is the L2 leaf penalty, ``reg_alpha`` the L1 leaf penalty and
    ``gamma`` the minimum gain a split must exceed.
    """

    n_estimators: int = 100
    max_depth: int = 6
    learning_rate: float = 0.3
    subsample: float = 1.0
    min_child_weight: float = 1.0
    reg_lambda: float = 1.0
    reg_alpha: float = 0.0
    gamma: float = 0.0
    colsample_bytree: float = 1.0
    colsample_bylevel: float = 1.0

    def __post_init__(self):
        if self.n_estimators < 0:
            raise ValueError("n_estimators must be non-negative")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        for name in ("subsample", "colsample_bytree", "colsample_bylevel"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {value}")
        for name in ("min_child_weight", "reg_lambda", "reg_alpha", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GbdtParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown GBDT parameters: {sorted(unknown)}")
        return cls(**d)
