from __future__ import annotations

from typing import Optional

import numpy as np

from ..tensor import Tensor, nn, ops
from .extractors import FeatureExtractor

LINEAR = "Linear"
MLP_HEAD = "MLP2x200"
HEAD_KINDS = (LINEAR, MLP_HEAD)
MLP_HEAD_WIDTH = 200


class Head(nn.Module):
    def __init__(self, kind: str, d_in: int, n_out: int, rng: np.random.Generator):
        super().__init__()
        if kind not in HEAD_KINDS:
            raise ValueError(f"unknown head kind {kind!r}; expected one of {HEAD_KINDS}")
        self.kind = kind
        self.d_in, self.n_out = d_in, n_out
        sizes = [d_in] + ([MLP_HEAD_WIDTH, MLP_HEAD_WIDTH] if kind == MLP_HEAD else []) + [n_out]
        self.linears = [nn.Linear(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]

    def forward(self, h: Tensor) -> Tensor:
        for lin in self.linears[:-1]:
            h = ops.relu(lin(h))
        return self.linears[-1](h)


class TabularModel(nn.Module):
    """Extractor followed by a head; ``forward`` returns logits."""

    def __init__(self, extractor: FeatureExtractor, head: Head):
        super().__init__()
        if head.d_in != extractor.d_repr:
            raise ValueError(f"head expects {head.d_in} inputs, extractor emits {extractor.d_repr}")
        self.extractor = extractor
        self.head = head

    @property
    def n_targets(self) -> int:
        return self.head.n_out

    def forward(self, x_num, x_cat=None) -> Tensor:
        return self.head(self.extractor(x_num, x_cat))


def attach_head(extractor: FeatureExtractor, kind: str, n_targets: int,
                rng: Optional[np.random.Generator] = None) -> TabularModel:
    """Pair ``extractor`` with a freshly initialized head. The extractor object
    is shared, not copied."""
    rng = rng if rng is not None else np.random.default_rng()
    return TabularModel(extractor, Head(kind, extractor.d_repr, n_targets, rng))
