"""Architecture hyperparameters with the published defaults."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Union

MLP = "MLP"
RESNET = "ResNet"
FT_TRANSFORMER = "FTTransformer"
ARCHS = (MLP, RESNET, FT_TRANSFORMER)


def _check_dropout(name: str, p: float) -> None:
    if not 0.0 <= p < 1.0:
        raise ValueError(f"{name} must lie in [0, 1), got {p}")


@dataclass
class MLPSpec:
    layers: list = field(default_factory=lambda: [300, 200, 300])
    dropout: float = 0.2
    cat_embedding: int = 128
    lr: float = 1e-4
    weight_decay: float = 1e-5
    arch: str = MLP

    def __post_init__(self):
        self.layers = [int(s) for s in self.layers]
        if any(s <= 0 for s in self.layers) or self.cat_embedding <= 0:
            raise ValueError("MLP sizes must be positive")
        _check_dropout("dropout", self.dropout)


@dataclass
class ResNetSpec:
    n_blocks: int = 5
    layer_size: int = 200
    hidden_factor: float = 3.0
    hidden_dropout: float = 0.2
    residual_dropout: float = 0.2
    cat_embedding: int = 128
    lr: float = 1e-4
    weight_decay: float = 0.0
    arch: str = RESNET

    @property
    def hidden_size(self) -> int:
        return int(self.layer_size * self.hidden_factor)

    def __post_init__(self):
        if self.n_blocks < 0 or self.layer_size <= 0 or self.hidden_size <= 0 or self.cat_embedding <= 0:
            raise ValueError("ResNet sizes must be positive")
        _check_dropout("hidden_dropout", self.hidden_dropout)
        _check_dropout("residual_dropout", self.residual_dropout)


@dataclass
class FTTransformerSpec:
    n_layers: int = 3
    d_embed: int = 192
    n_heads: int = 8
    attention_dropout: float = 0.2
    ffn_dropout: float = 0.1
    ffn_factor: float = 4 / 3
    residual_dropout: float = 0.0
    lr: float = 1e-4
    weight_decay: float = 1e-5
    arch: str = FT_TRANSFORMER

    @property
    def ffn_hidden(self) -> int:
        return max(1, int(self.d_embed * self.ffn_factor))

    def __post_init__(self):
        if self.n_layers < 0 or self.d_embed <= 0 or self.n_heads <= 0:
            raise ValueError("FT-Transformer sizes must be positive")
        if self.d_embed % self.n_heads:
            raise ValueError(f"n_heads={self.n_heads} must divide d_embed={self.d_embed}")
        for name in ("attention_dropout", "ffn_dropout", "residual_dropout"):
            _check_dropout(name, getattr(self, name))


ModelSpec = Union[MLPSpec, ResNetSpec, FTTransformerSpec]
_BY_ARCH = {MLP: MLPSpec, RESNET: ResNetSpec, FT_TRANSFORMER: FTTransformerSpec}


def default_spec(arch: str) -> ModelSpec:
    if arch not in _BY_ARCH:
        raise ValueError(f"unknown architecture {arch!r}; expected one of {ARCHS}")
    return _BY_ARCH[arch]()


def spec_from_dict(d: dict) -> ModelSpec:
    d = dict(d)
    arch = d.pop("arch", None)
    if arch not in _BY_ARCH:
        raise ValueError(f"unknown architecture {arch!r}; expected one of {ARCHS}")
    cls = _BY_ARCH[arch]
    known = {f.name for f in fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"{arch}: unknown spec fields {sorted(unknown)}")
    return cls(**d)


def spec_to_dict(spec: ModelSpec) -> dict:
    return asdict(spec)
