"""Column schema and in-memory multi-label tabular datasets."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

NUMERICAL = "numerical"
CATEGORICAL = "categorical"
MISSING_CODE = -1
DEFAULT_MISSING_MARKERS = ("", "NA", "NaN")


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    categories: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.kind not in (NUMERICAL, CATEGORICAL):
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if not self.categories:
                raise SchemaError(f"categorical column {self.name!r} needs at least one category")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"categorical column {self.name!r} has duplicate categories")

    @property
    def category_count(self) -> int:
        return len(self.categories) if self.categories else 0

    @property
    def n_embeddings(self) -> int:
        """Embedding rows: observed categories plus the reserved missing slot."""
        return self.category_count + 1

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind}
        if self.categories is not None:
            d["categories"] = list(self.categories)
        return d


@dataclass(frozen=True)
class Schema:
    columns: tuple[Column, ...]
    target_names: tuple[str, ...]
    missing_markers: tuple[str, ...] = DEFAULT_MISSING_MARKERS
    closed: bool = True

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("column names must be unique")
        if len(set(self.target_names)) != len(self.target_names):
            raise SchemaError("target names must be unique")
        clash = set(names) & set(self.target_names)
        if clash:
            raise SchemaError(f"names used both as feature and target: {sorted(clash)}")

    @property
    def numerical(self) -> list[Column]:
        return [c for c in self.columns if c.kind == NUMERICAL]

    @property
    def categorical(self) -> list[Column]:
        return [c for c in self.columns if c.kind == CATEGORICAL]

    @property
    def feature_names(self) -> list[str]:
        """Model feature order: numerical columns first, then categorical."""
        return [c.name for c in self.numerical] + [c.name for c in self.categorical]

    @property
    def n_features(self) -> int:
        return len(self.columns)

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def fingerprint(self) -> str:
        """Hash of the feature layout; target names are deliberately excluded
        because heads are replaced on transfer."""
        layout = [[c.name, c.kind, c.category_count] for c in self.columns]
        return hashlib.sha256(json.dumps(layout).encode()).hexdigest()[:16]

    def with_targets(self, names: Sequence[str]) -> "Schema":
        return replace(self, target_names=tuple(names))

    def without(self, names: Iterable[str]) -> "Schema":
        drop = set(names)
        unknown = drop - {c.name for c in self.columns}
        if unknown:
            raise KeyError(f"unknown columns: {sorted(unknown)}")
        return replace(self, columns=tuple(c for c in self.columns if c.name not in drop))

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "columns": [c.to_dict() for c in self.columns],
            "targets": list(self.target_names),
            "missing_markers": list(self.missing_markers),
            "closed": self.closed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        cols = tuple(
            Column(c["name"], c["kind"], tuple(c["categories"]) if c.get("categories") is not None else None)
            for c in d["columns"]
        )
        return cls(
            columns=cols,
            target_names=tuple(d.get("targets", ())),
            missing_markers=tuple(d.get("missing_markers", DEFAULT_MISSING_MARKERS)),
            closed=bool(d.get("closed", True)),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "Schema":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class Dataset:
    """Feature matrices plus binary targets.

    ``X_num`` holds numerical columns in schema order (NaN = missing);
    ``X_cat`` holds categorical codes in schema order (``MISSING_CODE`` = missing).
    """

    schema: Schema
    X_num: np.ndarray
    X_cat: np.ndarray
    Y: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = self.X_num.shape[0]
        if self.X_cat.shape[0] != n or self.Y.shape[0] != n:
            raise SchemaError(f"row counts disagree: X_num={n}, X_cat={self.X_cat.shape[0]}, Y={self.Y.shape[0]}")
        if self.X_num.shape[1] != len(self.schema.numerical) or self.X_cat.shape[1] != len(self.schema.categorical):
            raise SchemaError("feature matrix widths do not match schema")
        if self.Y.shape[1] != len(self.schema.target_names):
            raise SchemaError("target matrix width does not match schema")
        for j, col in enumerate(self.schema.categorical):
            codes = self.X_cat[:, j]
            bad = (codes != MISSING_CODE) & ((codes < 0) | (codes > col.category_count))
            if bad.any():
                raise SchemaError(f"column {col.name!r}: category codes outside [0, {col.category_count}]")

    @property
    def n_rows(self) -> int:
        return self.X_num.shape[0]

    @property
    def n_targets(self) -> int:
        return self.Y.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return replace(self, X_num=self.X_num[rows], X_cat=self.X_cat[rows], Y=self.Y[rows])

    def select_targets(self, indices: Sequence[int]) -> "Dataset":
        indices = list(indices)
        names = [self.schema.target_names[i] for i in indices]
        return replace(self, schema=self.schema.with_targets(names), Y=self.Y[:, indices])

    def has_missing(self) -> bool:
        return bool(np.isnan(self.X_num).any() or (self.X_cat == MISSING_CODE).any())

    def numerical_column(self, name: str) -> np.ndarray:
        idx = [c.name for c in self.schema.numerical].index(name)
        return self.X_num[:, idx]

    def drop_features(self, names: Iterable[str]) -> "Dataset":
        names = list(names)
        schema = self.schema.without(names)
        num_keep = [i for i, c in enumerate(self.schema.numerical) if c.name not in names]
        cat_keep = [i for i, c in enumerate(self.schema.categorical) if c.name not in names]
        return replace(self, schema=schema, X_num=self.X_num[:, num_keep], X_cat=self.X_cat[:, cat_keep])

    def with_numerical(self, name: str, values: np.ndarray) -> "Dataset":
        """Append (or overwrite) a numerical column; the column goes last in
        the schema when new."""
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if values.shape[0] != self.n_rows:
            raise SchemaError(f"column {name!r} has {values.shape[0]} rows, dataset has {self.n_rows}")
        names = [c.name for c in self.schema.numerical]
        if name in names:
            X = self.X_num.copy()
            X[:, names.index(name)] = values
            return replace(self, X_num=X)
        schema = replace(self.schema, columns=self.schema.columns + (Column(name, NUMERICAL),))
        return replace(self, schema=schema, X_num=np.column_stack([self.X_num, values]))

    def categorical_column(self, name: str) -> np.ndarray:
        idx = [c.name for c in self.schema.categorical].index(name)
        return self.X_cat[:, idx]

    def with_categorical(self, column: Column, codes: np.ndarray) -> "Dataset":
        """Append (or overwrite) a categorical column given as integer codes."""
        if column.kind != CATEGORICAL:
            raise SchemaError(f"column {column.name!r} is not categorical")
        codes = np.asarray(codes, dtype=np.int64).reshape(-1)
        if codes.shape[0] != self.n_rows:
            raise SchemaError(f"column {column.name!r} has {codes.shape[0]} rows, dataset has {self.n_rows}")
        names = [c.name for c in self.schema.categorical]
        if column.name in names:
            j = names.index(column.name)
            if self.schema.categorical[j] != column:
                raise SchemaError(f"column {column.name!r} exists with different categories")
            C = self.X_cat.copy()
            C[:, j] = codes
            return replace(self, X_cat=C)
        schema = replace(self.schema, columns=self.schema.columns + (column,))
        return replace(self, schema=schema, X_cat=np.column_stack([self.X_cat, codes]).astype(np.int64))

    def align_to(self, schema: Schema) -> "Dataset":
        """Reorder columns to match ``schema`` (same column set required)."""
        if {c.name for c in schema.columns} != {c.name for c in self.schema.columns}:
            raise SchemaError("cannot align datasets with different column sets")
        own_num = [c.name for c in self.schema.numerical]
        own_cat = [c.name for c in self.schema.categorical]
        X_num = self.X_num[:, [own_num.index(c.name) for c in schema.numerical]]
        X_cat = self.X_cat[:, [own_cat.index(c.name) for c in schema.categorical]]
        return replace(self, schema=replace(schema, target_names=self.schema.target_names), X_num=X_num, X_cat=X_cat)


def empty_like(schema: Schema) -> Dataset:
    return Dataset(
        schema,
        np.zeros((0, len(schema.numerical))),
        np.zeros((0, len(schema.categorical)), dtype=np.int64),
        np.zeros((0, len(schema.target_names)), dtype=np.int64),
    )
