from __future__ import annotations

from typing import Optional

import numpy as np

from ..models.extractors import InputLayout
from ..tensor import Tensor, nn, ops


def info_nce(z_clean: Tensor, z_aug: Tensor, temperature: float = 1.0) -> Tensor:
    """Cosine-similarity InfoNCE: row ``i`` of the clean view should pick row
    ``i`` of the augmented view among all augmented rows."""
    n = z_clean.shape[0]
    if n < 2:
        raise ValueError("info_nce needs at least two rows for negatives")
    if z_aug.shape != z_clean.shape:
        raise ValueError(f"info_nce: view shapes differ {z_clean.shape} vs {z_aug.shape}")
    a = ops.l2_normalize(z_clean, axis=1)
    b = ops.l2_normalize(z_aug, axis=1)
    logits = ops.mul(a @ ops.transpose(b), 1.0 / temperature)
    return ops.softmax_cross_entropy(logits, np.arange(n))


class ProjectionHead(nn.Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator):
        super().__init__()
        self.hidden = nn.Linear(d_in, d_in, rng)
        self.out = nn.Linear(d_in, d_out, rng)

    def forward(self, h: Tensor) -> Tensor:
        return self.out(ops.relu(self.hidden(h)))


class ColumnHeads(nn.Module):
    """One reconstruction head per input column.

    Each column's head is its own slice of a packed output layer: one output
    for a numerical column, one logit per category for a categorical column.
    With ``hidden`` set, a shared ReLU layer of that width precedes the outputs.
    """

    def __init__(self, d_in: int, layout: InputLayout, rng: np.random.Generator, hidden: Optional[int] = None):
        super().__init__()
        self.layout = layout
        self.hidden = nn.Linear(d_in, hidden, rng) if hidden else None
        width = layout.n_numerical + sum(layout.cardinalities)
        self.out = nn.Linear(hidden or d_in, width, rng)
        offsets = np.cumsum([layout.n_numerical] + list(layout.cardinalities))
        self.cat_slices = [slice(int(a), int(a + k)) for a, k in zip(offsets[:-1], layout.cardinalities)]

    @property
    def n_heads(self) -> int:
        return self.layout.n_features

    def forward(self, h: Tensor) -> Tensor:
        if self.hidden is not None:
            h = ops.relu(self.hidden(h))
        return self.out(h)

    def masked_loss(self, out: Tensor, x_num: np.ndarray, x_cat: np.ndarray, index: np.ndarray) -> Tensor:
        """Mean loss at each row's masked column ``index``: MSE for numerical, CE for categorical."""
        n = out.shape[0]
        n_num = self.layout.n_numerical
        terms = []
        num_rows = np.flatnonzero(index < n_num)
        if num_rows.size:
            cols = index[num_rows]
            pred = ops.getitem(out, (num_rows, cols))
            terms.append(ops.mul(ops.mse(pred, x_num[num_rows, cols]), num_rows.size / n))
        for j, sl in enumerate(self.cat_slices):
            rows = np.flatnonzero(index == n_num + j)
            if rows.size:
                logits = ops.getitem(out, (rows[:, None], np.arange(sl.start, sl.stop)[None, :]))
                terms.append(ops.mul(ops.softmax_cross_entropy(logits, x_cat[rows, j]), rows.size / n))
        total = terms[0]
        for t in terms[1:]:
            total = total + t
        return total

    def reconstruction_loss(self, out: Tensor, x_num: np.ndarray, x_cat: np.ndarray) -> Tensor:
        """Sum over columns of each column's mean reconstruction loss."""
        n_num = self.layout.n_numerical
        terms = []
        if n_num:
            pred = ops.getitem(out, (slice(None), slice(0, n_num)))
            terms.append(ops.mul(ops.mse(pred, x_num), float(n_num)))
        for j, sl in enumerate(self.cat_slices):
            logits = ops.getitem(out, (slice(None), sl))
            terms.append(ops.softmax_cross_entropy(logits, x_cat[:, j]))
        total = terms[0]
        for t in terms[1:]:
            total = total + t
        return total
