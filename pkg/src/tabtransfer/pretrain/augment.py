"""Input- and embedding-space augmentations. Inputs are never modified in place."""

from __future__ import annotations

import numpy as np

from ..tensor import Tensor, ops


def mlm_mask(n_rows: int, n_features: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """One uniformly drawn feature per row. Returns ``(index, boolean mask)``."""
    if n_features < 1:
        raise ValueError("mlm_mask needs at least one feature")
    index = rng.integers(0, n_features, n_rows)
    mask = np.zeros((n_rows, n_features), dtype=bool)
    mask[np.arange(n_rows), index] = True
    return index, mask


def cutmix(x_num: np.ndarray, x_cat: np.ndarray, keep: float, rng: np.random.Generator):
    """Keep each entry with probability ``keep``; take the rest from a random partner row.

    Numerical and categorical columns share one mask over the feature axis.
    Returns ``(x_num', x_cat', keep_mask, partner)``.
    """
    n = x_num.shape[0]
    n_num = x_num.shape[1]
    partner = rng.integers(0, n, n)
    m = rng.random((n, n_num + x_cat.shape[1])) < keep
    num = np.where(m[:, :n_num], x_num, x_num[partner])
    cat = np.where(m[:, n_num:], x_cat, x_cat[partner])
    return num, cat, m, partner


def mixup_embed(embedded: Tensor, mu: float, permutation: np.ndarray) -> Tensor:
    """``mu * e_i + (1 - mu) * e_perm(i)`` row-wise."""
    if mu == 1.0:
        return embedded
    return ops.mul(embedded, mu) + ops.mul(ops.take_rows(embedded, permutation), 1.0 - mu)


def column_pools(x_num: np.ndarray, x_cat: np.ndarray) -> list[np.ndarray]:
    """Per-column value pools (numerical columns first) for SCARF resampling."""
    return [x_num[:, j].copy() for j in range(x_num.shape[1])] + [x_cat[:, j].copy() for j in range(x_cat.shape[1])]


def scarf_corrupt(x_num: np.ndarray, x_cat: np.ndarray, rate: float, pools: list, rng: np.random.Generator):
    """Replace each entry with probability ``rate`` by a uniform draw from its
    column's pool. Returns ``(x_num', x_cat', corrupted_mask)``."""
    n, n_num = x_num.shape
    n_feat = n_num + x_cat.shape[1]
    if len(pools) != n_feat:
        raise ValueError(f"expected {n_feat} column pools, got {len(pools)}")
    m = rng.random((n, n_feat)) < rate
    num, cat = x_num.copy(), x_cat.copy()
    for j, pool in enumerate(pools):
        draws = pool[rng.integers(0, len(pool), n)]
        if j < n_num:
            num[:, j] = np.where(m[:, j], draws, num[:, j])
        else:
            cat[:, j - n_num] = np.where(m[:, j], draws, cat[:, j - n_num])
    return num, cat, m
