"""Feature extractors: preprocessed features in, one representation vector per row out.

Every extractor splits its forward pass into ``embed`` (per-feature input
embedding, where masking and embedding-space mixing happen) and ``encode``
(the body that produces the representation).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..data.dataset import Schema
from ..tensor import Tensor, default_dtype, nn, ops
from .layers import ResidualBlock, TransformerBlock
from .spec import FT_TRANSFORMER, MLP, RESNET, FTTransformerSpec, MLPSpec, ModelSpec, ResNetSpec


class FingerprintMismatch(ValueError):
    pass


@dataclass(frozen=True)
class InputLayout:
    """Feature layout an extractor is built for."""

    n_numerical: int
    cardinalities: tuple
    fingerprint: str = ""

    @classmethod
    def from_schema(cls, schema: Schema) -> "InputLayout":
        return cls(len(schema.numerical), tuple(c.n_embeddings for c in schema.categorical), schema.fingerprint())

    @property
    def n_categorical(self) -> int:
        return len(self.cardinalities)

    @property
    def n_features(self) -> int:
        return self.n_numerical + self.n_categorical


def _normal(rng: np.random.Generator, d: int, shape) -> Tensor:
    return Tensor((rng.standard_normal(shape) / np.sqrt(d)).astype(default_dtype()), requires_grad=True)


def _as_input(x_num, x_cat, layout: InputLayout) -> tuple[Tensor, np.ndarray]:
    x_num = x_num if isinstance(x_num, Tensor) else Tensor(np.asarray(x_num, dtype=default_dtype()))
    x_cat = np.zeros((x_num.shape[0], 0), dtype=np.int64) if x_cat is None else np.asarray(x_cat, dtype=np.int64)
    if x_num.ndim != 2 or x_num.shape[1] != layout.n_numerical:
        raise ValueError(f"expected {layout.n_numerical} numerical columns, got shape {x_num.shape}")
    if x_cat.shape != (x_num.shape[0], layout.n_categorical):
        raise ValueError(f"expected categorical shape {(x_num.shape[0], layout.n_categorical)}, got {x_cat.shape}")
    return x_num, x_cat


def _blend(values: Tensor, replacement: Tensor, mask: np.ndarray) -> Tensor:
    """``values`` where ``mask`` is 0, ``replacement`` where it is 1 (mask broadcast)."""
    keep = Tensor((1.0 - mask).astype(values.dtype))
    put = Tensor(mask.astype(values.dtype))
    return values * keep + replacement * put


class FeatureExtractor(nn.Module):
    arch: str = ""

    def __init__(self, spec: ModelSpec, layout: InputLayout):
        super().__init__()
        self.spec = spec
        self.layout = layout

    @property
    def d_repr(self) -> int:
        raise NotImplementedError

    def embed(self, x_num, x_cat, mask: Optional[np.ndarray] = None) -> Tensor:
        """Input embedding. ``mask`` is a boolean ``(rows, features)`` array
        (numerical columns first); masked entries get the feature's learned
        mask embedding."""
        raise NotImplementedError

    def encode(self, embedded: Tensor) -> Tensor:
        raise NotImplementedError

    def forward(self, x_num, x_cat=None, mask: Optional[np.ndarray] = None) -> Tensor:
        return self.encode(self.embed(x_num, x_cat, mask))

    def check_fingerprint(self, fingerprint: str) -> None:
        if self.layout.fingerprint and fingerprint and fingerprint != self.layout.fingerprint:
            raise FingerprintMismatch(
                f"input schema fingerprint {fingerprint} does not match the extractor's {self.layout.fingerprint}; "
                "align the feature sets first (see tabtransfer.pseudofeature)"
            )


class _FlatEmbedding(nn.Module):
    """Numerical columns as-is, categorical columns as embedding vectors, concatenated."""

    def __init__(self, layout: InputLayout, cat_embedding: int, rng: np.random.Generator):
        super().__init__()
        self.layout = layout
        self.cat_embedding = cat_embedding
        self.tables = [nn.Embedding(n, cat_embedding, rng) for n in layout.cardinalities]
        self.num_mask = _normal(rng, 1, (layout.n_numerical,))
        self.cat_mask = _normal(rng, cat_embedding, (layout.n_categorical, cat_embedding))

    @property
    def width(self) -> int:
        return self.layout.n_numerical + self.layout.n_categorical * self.cat_embedding

    def forward(self, x_num, x_cat, mask=None) -> Tensor:
        x_num, x_cat = _as_input(x_num, x_cat, self.layout)
        n_num = self.layout.n_numerical
        if mask is not None and n_num:
            x_num = _blend(x_num, self.num_mask, mask[:, :n_num])
        parts = [x_num] if n_num else []
        for j, table in enumerate(self.tables):
            e = table(x_cat[:, j])
            if mask is not None:
                e = _blend(e, ops.getitem(self.cat_mask, j), mask[:, n_num + j, None])
            parts.append(e)
        return parts[0] if len(parts) == 1 else ops.concat(parts, axis=1)


class MLPExtractor(FeatureExtractor):
    arch = MLP

    def __init__(self, spec: MLPSpec, layout: InputLayout, rng: np.random.Generator):
        super().__init__(spec, layout)
        self.embedding = _FlatEmbedding(layout, spec.cat_embedding, rng)
        sizes = [self.embedding.width] + list(spec.layers)
        self.linears = [nn.Linear(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]
        self.drops = [nn.Dropout(spec.dropout) for _ in spec.layers]
        self._d_repr = sizes[-1]

    @property
    def d_repr(self) -> int:
        return self._d_repr

    def embed(self, x_num, x_cat, mask=None) -> Tensor:
        return self.embedding(x_num, x_cat, mask)

    def encode(self, embedded: Tensor) -> Tensor:
        h = embedded
        for lin, drop in zip(self.linears, self.drops):
            h = drop(ops.relu(lin(h)))
        return h


class ResNetExtractor(FeatureExtractor):
    arch = RESNET

    def __init__(self, spec: ResNetSpec, layout: InputLayout, rng: np.random.Generator):
        super().__init__(spec, layout)
        self.embedding = _FlatEmbedding(layout, spec.cat_embedding, rng)
        self.project = nn.Linear(self.embedding.width, spec.layer_size, rng)
        self.blocks = [
            ResidualBlock(spec.layer_size, spec.hidden_size, spec.hidden_dropout, spec.residual_dropout, rng)
            for _ in range(spec.n_blocks)
        ]

    @property
    def d_repr(self) -> int:
        return self.spec.layer_size

    def embed(self, x_num, x_cat, mask=None) -> Tensor:
        return self.embedding(x_num, x_cat, mask)

    def encode(self, embedded: Tensor) -> Tensor:
        h = self.project(embedded)
        for block in self.blocks:
            h = block(h)
        return h


class FeatureTokenizer(nn.Module):
    """Numerical feature ``i`` becomes ``x_i * W_i + b_i``; categorical features
    look up a per-column table."""

    def __init__(self, layout: InputLayout, d: int, rng: np.random.Generator):
        super().__init__()
        self.layout = layout
        self.d = d
        self.num_weight = _normal(rng, d, (layout.n_numerical, d))
        self.num_bias = _normal(rng, d, (layout.n_numerical, d))
        self.tables = [nn.Embedding(n, d, rng) for n in layout.cardinalities]
        self.mask_tokens = _normal(rng, d, (layout.n_features, d))

    def forward(self, x_num, x_cat, mask=None) -> Tensor:
        x_num, x_cat = _as_input(x_num, x_cat, self.layout)
        b = x_num.shape[0]
        parts = []
        if self.layout.n_numerical:
            parts.append(x_num.reshape(b, self.layout.n_numerical, 1) * self.num_weight + self.num_bias)
        for j, table in enumerate(self.tables):
            parts.append(table(x_cat[:, j : j + 1]))
        tokens = parts[0] if len(parts) == 1 else ops.concat(parts, axis=1)
        if mask is not None:
            tokens = _blend(tokens, self.mask_tokens, np.asarray(mask)[:, :, None])
        return tokens


class FTTransformerExtractor(FeatureExtractor):
    """Tokenizer, prepended CLS token, pre-norm transformer stack; the
    representation is the final CLS state."""

    arch = FT_TRANSFORMER

    def __init__(self, spec: FTTransformerSpec, layout: InputLayout, rng: np.random.Generator):
        super().__init__(spec, layout)
        d = spec.d_embed
        self.tokenizer = FeatureTokenizer(layout, d, rng)
        self.cls = _normal(rng, d, (d,))
        self.blocks = [
            TransformerBlock(d, spec.n_heads, spec.ffn_hidden, spec.attention_dropout, spec.ffn_dropout,
                             spec.residual_dropout, rng)
            for _ in range(spec.n_layers)
        ]

    @property
    def d_repr(self) -> int:
        return self.spec.d_embed

    def embed(self, x_num, x_cat, mask=None) -> Tensor:
        return self.tokenizer(x_num, x_cat, mask)

    def with_cls(self, tokens: Tensor) -> Tensor:
        b = tokens.shape[0]
        cls = self.cls.reshape(1, 1, self.spec.d_embed) + Tensor(np.zeros((b, 1, 1), dtype=tokens.dtype))
        return ops.concat([cls, tokens], axis=1)

    def encode(self, embedded: Tensor) -> Tensor:
        h = self.with_cls(embedded)
        for block in self.blocks:
            h = block(h)
        return ops.getitem(h, (slice(None), 0))


_EXTRACTORS = {MLP: MLPExtractor, RESNET: ResNetExtractor, FT_TRANSFORMER: FTTransformerExtractor}


def build_extractor(spec: ModelSpec, layout, rng: np.random.Generator) -> FeatureExtractor:
    """Build an extractor for a ``Schema`` or ``InputLayout``; dropout draws from ``rng``."""
    if isinstance(layout, Schema):
        layout = InputLayout.from_schema(layout)
    model = _EXTRACTORS[spec.arch](spec, layout, rng)
    model.set_rng(rng)
    return model
