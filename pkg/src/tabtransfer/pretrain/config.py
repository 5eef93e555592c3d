from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Union

SUPERVISED = "Supervised"
MLM = "MLM"
CONTRASTIVE = "Contrastive"
SCARF = "SCARF"
STRATEGIES = (SUPERVISED, MLM, CONTRASTIVE, SCARF)

_DEFAULT_BATCH = {SUPERVISED: 256, MLM: 512, CONTRASTIVE: 200, SCARF: 200}
_DEFAULT_PATIENCE = {SUPERVISED: 30, MLM: None, CONTRASTIVE: None, SCARF: None}
AUTO = "auto"


@dataclass
class PretrainConfig:
    """Upstream training settings.

    ``patience`` and ``batch_size`` default per strategy when left at
    ``"auto"``/``None``; ``patience=None`` after resolution means train for
    all ``epochs``. ``lr``/``weight_decay`` of ``None`` fall back to the model
    spec.
    """

    strategy: str = SUPERVISED
    epochs: int = 500
    patience: Union[int, None, str] = AUTO
    batch_size: Optional[int] = None
    lr: Optional[float] = None
    weight_decay: Optional[float] = None
    cutmix_keep: float = 0.9
    mixup: float = 0.9
    scarf_lambda: float = 0.6
    temperature: float = 1.0
    projection_dim: int = 128
    denoise_weight: float = 1.0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.patience == AUTO:
            self.patience = _DEFAULT_PATIENCE[self.strategy]
        if self.batch_size is None:
            self.batch_size = _DEFAULT_BATCH[self.strategy]
        for name in ("cutmix_keep", "mixup", "scarf_lambda"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be positive or None")

    @property
    def scarf_rate(self) -> float:
        """Fraction of entries SCARF corrupts."""
        return 1.0 - self.scarf_lambda

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PretrainConfig":
        return cls(**d)
