from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import Dataset

DEFAULT_FRACTIONS = (0.65, 0.15, 0.20)
DOWNSTREAM_SIZES = (4, 10, 20, 100, 200)


@dataclass(frozen=True)
class SplitPlan:
    """Fixed row partition shared by every seed of an experiment.

    ``train`` rows feed upstream pre-training and the downstream subsamples,
    ``val`` is the upstream validation set, ``test`` the downstream test set.
    """

    seed: int
    fractions: tuple[float, float, float]
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "fractions": list(self.fractions),
            "train": self.train.tolist(),
            "val": self.val.tolist(),
            "test": self.test.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitPlan":
        return cls(
            int(d["seed"]),
            tuple(d["fractions"]),
            np.array(d["train"], dtype=np.int64),
            np.array(d["val"], dtype=np.int64),
            np.array(d["test"], dtype=np.int64),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "SplitPlan":
        return cls.from_dict(json.loads(Path(path).read_text()))


def make_splits(n_rows: int | Dataset, fractions: Sequence[float] = DEFAULT_FRACTIONS, seed: int = 0) -> SplitPlan:
    """Seeded shuffle then contiguous partition into train / val / test.

    Train and test sizes are floored; the validation part takes the
    remainder (34925 rows -> 22701 / 5239 / 6985).
    """
    if isinstance(n_rows, Dataset):
        n_rows = n_rows.n_rows
    fr = tuple(float(f) for f in fractions)
    if len(fr) != 3 or any(f < 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
        raise ValueError(f"fractions must be three non-negative numbers summing to 1, got {fractions}")
    n_train = int(np.floor(fr[0] * n_rows + 1e-9))
    n_test = int(np.floor(fr[2] * n_rows + 1e-9))
    n_val = n_rows - n_train - n_test
    if fr[1] == 0 and n_val > 0:
        n_train += n_val
        n_val = 0
    for size, f, label in ((n_train, fr[0], "train"), (n_val, fr[1], "val"), (n_test, fr[2], "test")):
        if f > 0 and size == 0:
            raise ValueError(f"dataset of {n_rows} rows too small: {label} part would be empty")
    perm = np.random.default_rng(seed).permutation(n_rows)
    return SplitPlan(seed, fr, perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:])


def make_task_split(dataset: Dataset, downstream_target_index: int) -> tuple[Dataset, Dataset]:
    """Upstream view keeps every target except one; the downstream view keeps
    only that one. Feature matrices are shared."""
    k = dataset.n_targets
    if not 0 <= downstream_target_index < k:
        raise IndexError(f"target index {downstream_target_index} out of range for {k} targets")
    upstream = dataset.select_targets([i for i in range(k) if i != downstream_target_index])
    downstream = dataset.select_targets([downstream_target_index])
    return upstream, downstream


def sample_downstream(train_rows: np.ndarray, n: int, seed: int) -> np.ndarray:
    """Uniform sample without replacement; nested across ``n`` at fixed seed."""
    train_rows = np.asarray(train_rows)
    if n > train_rows.size:
        raise ValueError(f"cannot sample {n} downstream rows from {train_rows.size}")
    if n < 0:
        raise ValueError("n must be non-negative")
    perm = np.random.default_rng(seed).permutation(train_rows.size)
    return train_rows[perm[:n]]
