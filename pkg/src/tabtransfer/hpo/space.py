"""Search-space distributions and the per-model spaces."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Union

import numpy as np

from ..gbdt.params import GbdtParams
from ..models.spec import FT_TRANSFORMER, MLP, RESNET, FTTransformerSpec, MLPSpec, ResNetSpec

GBDT = "GBDT"


@dataclass(frozen=True)
class UniformInt:
    low: int
    high: int

    def __post_init__(self):
        if self.low > self.high:
            raise ValueError("bounds out of order")

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.low, self.high + 1))

    def contains(self, x) -> bool:
        return float(x).is_integer() and self.low <= x <= self.high


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def __post_init__(self):
        if self.low > self.high:
            raise ValueError("bounds out of order")

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.low, self.high))

    def contains(self, x) -> bool:
        return self.low <= x <= self.high


@dataclass(frozen=True)
class LogUniform:
    low: float
    high: float

    def __post_init__(self):
        if not 0 < self.low <= self.high:
            raise ValueError("log-uniform bounds must be positive and ordered")

    def sample(self, rng: np.random.Generator) -> float:
        return float(math.exp(rng.uniform(math.log(self.low), math.log(self.high))))

    def contains(self, x) -> bool:
        return self.low * (1 - 1e-12) <= x <= self.high * (1 + 1e-12)


@dataclass(frozen=True)
class ZeroOr:
    """Exactly 0 with probability ``p_zero``, otherwise a draw from ``inner``."""

    inner: Union[Uniform, LogUniform]
    p_zero: float = 0.5

    def sample(self, rng: np.random.Generator) -> float:
        if rng.random() < self.p_zero:
            return 0.0
        return self.inner.sample(rng)

    def contains(self, x) -> bool:
        return x == 0 or self.inner.contains(x)


Distribution = Union[UniformInt, Uniform, LogUniform, ZeroOr]


@dataclass(frozen=True)
class SearchSpace:
    """Named distributions plus a builder that turns one sample into a model or GBDT configuration.

    ``repeated`` names a size parameter whose value sets how many per-layer
    draws of the ``per_layer`` distribution are made.
    """

    name: str
    params: Mapping[str, Distribution]
    build: Callable[[dict], object]
    repeated: tuple[str, str] | None = None
    per_layer: Distribution | None = None

    def sample(self, rng: np.random.Generator) -> dict:
        config = {k: d.sample(rng) for k, d in self.params.items()}
        if self.repeated is not None:
            count_key, list_key = self.repeated
            config[list_key] = [self.per_layer.sample(rng) for _ in range(config[count_key])]
        return config

    def contains(self, config: dict) -> bool:
        ok = all(self.params[k].contains(config[k]) for k in self.params)
        if self.repeated is not None:
            count_key, list_key = self.repeated
            ok = ok and len(config[list_key]) == config[count_key] and all(self.per_layer.contains(v) for v in config[list_key])
        return ok


def _build_mlp(c: dict) -> MLPSpec:
    return MLPSpec(layers=list(c["layers"]), dropout=c["dropout"], cat_embedding=c["cat_embedding"], lr=c["lr"],
                   weight_decay=c["weight_decay"])


def _build_resnet(c: dict) -> ResNetSpec:
    return ResNetSpec(n_blocks=c["n_blocks"], layer_size=c["layer_size"], hidden_factor=c["hidden_factor"],
                      hidden_dropout=c["hidden_dropout"], residual_dropout=c["residual_dropout"],
                      cat_embedding=c["cat_embedding"], lr=c["lr"], weight_decay=c["weight_decay"])


FT_HEADS = 8


def _build_ft(c: dict) -> FTTransformerSpec:
    # the head count is fixed, so the embedding width is rounded to a multiple of it
    d = max(FT_HEADS, FT_HEADS * int(round(c["d_embed"] / FT_HEADS)))
    return FTTransformerSpec(n_layers=c["n_layers"], d_embed=d, n_heads=FT_HEADS,
                             attention_dropout=c["attention_dropout"], ffn_dropout=c["ffn_dropout"],
                             ffn_factor=c["ffn_factor"], residual_dropout=c["residual_dropout"], lr=c["lr"],
                             weight_decay=c["weight_decay"])


def _build_gbdt(c: dict) -> GbdtParams:
    return GbdtParams(**c)


def mlp_space() -> SearchSpace:
    return SearchSpace(MLP, {
        "n_layers": UniformInt(1, 8),
        "cat_embedding": UniformInt(64, 512),
        "dropout": ZeroOr(Uniform(0.0, 0.5)),
        "lr": LogUniform(1e-5, 1e-2),
        "weight_decay": ZeroOr(LogUniform(1e-6, 1e-3)),
    }, _build_mlp, repeated=("n_layers", "layers"), per_layer=UniformInt(1, 512))


def resnet_space() -> SearchSpace:
    return SearchSpace(RESNET, {
        "n_blocks": UniformInt(1, 8),
        "cat_embedding": UniformInt(64, 512),
        "layer_size": UniformInt(64, 512),
        "hidden_factor": Uniform(1.0, 4.0),
        "hidden_dropout": Uniform(0.0, 0.5),
        "residual_dropout": ZeroOr(Uniform(0.0, 0.5)),
        "lr": LogUniform(1e-5, 1e-2),
        "weight_decay": ZeroOr(LogUniform(1e-6, 1e-3)),
    }, _build_resnet)


def ft_transformer_space() -> SearchSpace:
    return SearchSpace(FT_TRANSFORMER, {
        "n_layers": UniformInt(1, 4),
        "d_embed": UniformInt(64, 512),
        "residual_dropout": ZeroOr(Uniform(0.0, 0.2)),
        "attention_dropout": Uniform(0.0, 0.5),
        "ffn_dropout": Uniform(0.0, 0.5),
        "ffn_factor": Uniform(2.0 / 3.0, 8.0 / 3.0),
        "lr": LogUniform(1e-5, 1e-3),
        "weight_decay": LogUniform(1e-6, 1e-3),
    }, _build_ft)


def gbdt_space() -> SearchSpace:
    return SearchSpace(GBDT, {
        "n_estimators": UniformInt(2, 1000),
        "max_depth": UniformInt(3, 10),
        "min_child_weight": LogUniform(1e-8, 1e5),
        "subsample": Uniform(0.5, 1.0),
        "learning_rate": LogUniform(1e-5, 1.0),
        "colsample_bylevel": Uniform(0.5, 1.0),
        "colsample_bytree": Uniform(0.5, 1.0),
        "gamma": ZeroOr(LogUniform(1e-8, 1e2)),
        "reg_lambda": ZeroOr(LogUniform(1e-8, 1e2)),
        "reg_alpha": ZeroOr(LogUniform(1e-8, 1e2)),
    }, _build_gbdt)


SPACES = {MLP: mlp_space, RESNET: resnet_space, FT_TRANSFORMER: ft_transformer_space, GBDT: gbdt_space}


def space_for(family: str) -> SearchSpace:
    try:
        return SPACES[family]()
    except KeyError:
        raise ValueError(f"no search space for {family!r}; expected one of {sorted(SPACES)}") from None
