from __future__ import annotations

import numpy as np

from ..tensor import Tensor, nn, ops


class MultiHeadSelfAttention(nn.Module):
    def __init__(self, d: int, n_heads: int, dropout: float, rng: np.random.Generator):
        super().__init__()
        self.n_heads = n_heads
        self.d_head = d // n_heads
        self.q = nn.Linear(d, d, rng)
        self.k = nn.Linear(d, d, rng)
        self.v = nn.Linear(d, d, rng)
        self.out = nn.Linear(d, d, rng)
        self.drop = nn.Dropout(dropout)

    def _split(self, x: Tensor, b: int, t: int) -> Tensor:
        return ops.transpose(x.reshape(b, t, self.n_heads, self.d_head), (0, 2, 1, 3))

    def forward(self, x: Tensor) -> Tensor:
        b, t, d = x.shape
        q = self._split(self.q(x), b, t)
        k = self._split(self.k(x), b, t)
        v = self._split(self.v(x), b, t)
        scores = ops.mul(q @ ops.swapaxes(k, -1, -2), 1.0 / np.sqrt(self.d_head))
        attn = self.drop(ops.softmax(scores, axis=-1))
        ctx = ops.transpose(attn @ v, (0, 2, 1, 3)).reshape(b, t, d)
        return self.out(ctx)


class TransformerBlock(nn.Module):
    """Pre-norm block: ``x + drop(attn(LN(x)))`` then ``x + drop(ffn(LN(x)))``."""

    def __init__(self, d: int, n_heads: int, ffn_hidden: int, attention_dropout: float,
                 ffn_dropout: float, residual_dropout: float, rng: np.random.Generator):
        super().__init__()
        self.norm1 = nn.LayerNorm(d)
        self.attn = MultiHeadSelfAttention(d, n_heads, attention_dropout, rng)
        self.norm2 = nn.LayerNorm(d)
        self.ffn_in = nn.Linear(d, ffn_hidden, rng)
        self.ffn_out = nn.Linear(ffn_hidden, d, rng)
        self.ffn_drop = nn.Dropout(ffn_dropout)
        self.res_drop = nn.Dropout(residual_dropout)

    def forward(self, x: Tensor) -> Tensor:
        x = x + self.res_drop(self.attn(self.norm1(x)))
        h = self.ffn_out(self.ffn_drop(ops.gelu(self.ffn_in(self.norm2(x)))))
        return x + self.res_drop(h)


class ResidualBlock(nn.Module):
    """``x + drop_res(lin2(drop_hid(relu(lin1(bn(x))))))``."""

    def __init__(self, d: int, hidden: int, hidden_dropout: float, residual_dropout: float, rng: np.random.Generator):
        super().__init__()
        self.norm = nn.BatchNorm1d(d)
        self.lin1 = nn.Linear(d, hidden, rng)
        self.lin2 = nn.Linear(hidden, d, rng)
        self.hid_drop = nn.Dropout(hidden_dropout)
        self.res_drop = nn.Dropout(residual_dropout)

    def forward(self, x: Tensor) -> Tensor:
        h = self.hid_drop(ops.relu(self.lin1(self.norm(x))))
        return x + self.res_drop(self.lin2(h))
