"""CSV ingestion against a sidecar schema, and CSV export."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dataset import CATEGORICAL, MISSING_CODE, NUMERICAL, Column, Dataset, Schema, SchemaError


class CsvFormatError(ValueError):
    pass


_TRUE = {"1", "1.0", "true", "True", "TRUE"}
_FALSE = {"0", "0.0", "false", "False", "FALSE"}


def _parse_float(text: str, markers: set) -> float:
    if text in markers:
        return math.nan
    try:
        return float(text)
    except ValueError:
        return math.nan


def load_csv(path, schema_path=None, schema: Optional[Schema] = None) -> Dataset:
    """Read a comma-separated, header-first UTF-8 file into a :class:`Dataset`.

    Columns are matched to the schema by header name, so file column order is
    free. Extra header columns are ignored.
    """
    if schema is None:
        if schema_path is None:
            raise ValueError("load_csv needs a schema or schema_path")
        schema = Schema.load(schema_path)
    markers = set(schema.missing_markers)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file (no header)") from None
        pos = {name: i for i, name in enumerate(header)}
        needed = [c.name for c in schema.columns] + list(schema.target_names)
        missing = [n for n in needed if n not in pos]
        if missing:
            raise CsvFormatError(f"{path}: header lacks columns {missing}")
        num_idx = [pos[c.name] for c in schema.numerical]
        cat_cols = schema.categorical
        cat_idx = [pos[c.name] for c in cat_cols]
        cat_maps = [{v: k for k, v in enumerate(c.categories)} for c in cat_cols]
        tgt_idx = [pos[n] for n in schema.target_names]
        nums, cats, ys = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise CsvFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            nums.append([_parse_float(row[i], markers) for i in num_idx])
            codes = []
            for col, i, cmap in zip(cat_cols, cat_idx, cat_maps):
                value = row[i]
                if value in markers:
                    codes.append(MISSING_CODE)
                elif value in cmap:
                    codes.append(cmap[value])
                elif schema.closed:
                    raise SchemaError(f"{path}:{lineno}: unknown category {value!r} in column {col.name!r}")
                else:
                    codes.append(MISSING_CODE)
            cats.append(codes)
            targets = []
            for name, i in zip(schema.target_names, tgt_idx):
                value = row[i].strip()
                if value in _TRUE:
                    targets.append(1)
                elif value in _FALSE:
                    targets.append(0)
                else:
                    raise CsvFormatError(f"{path}:{lineno}: target {name!r} is not binary: {value!r}")
            ys.append(targets)
    n = len(nums)
    return Dataset(
        schema,
        np.array(nums, dtype=np.float64).reshape(n, len(num_idx)),
        np.array(cats, dtype=np.int64).reshape(n, len(cat_idx)),
        np.array(ys, dtype=np.int64).reshape(n, len(tgt_idx)),
    )


def infer_schema(path, targets: Sequence[str], max_categories: int = 64) -> Schema:
    """Guess column kinds from a CSV: parseable-as-float columns are
    numerical, the rest categorical (sorted category labels)."""
    markers = {"", "NA", "NaN"}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        values: list[set] = [set() for _ in header]
        numeric = [True] * len(header)
        for row in reader:
            for i, v in enumerate(row):
                if v in markers:
                    continue
                values[i].add(v)
                if numeric[i]:
                    try:
                        float(v)
                    except ValueError:
                        numeric[i] = False
    missing = [t for t in targets if t not in header]
    if missing:
        raise CsvFormatError(f"{path}: header lacks target columns {missing}")
    cols = []
    for i, name in enumerate(header):
        if name in targets:
            continue
        if numeric[i]:
            cols.append(Column(name, NUMERICAL))
        else:
            if len(values[i]) > max_categories:
                raise SchemaError(f"column {name!r} has {len(values[i])} distinct labels; too many to treat as categorical")
            cols.append(Column(name, CATEGORICAL, tuple(sorted(values[i]))))
    return Schema(tuple(cols), tuple(targets))


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def write_csv(dataset: Dataset, path) -> None:
    """Write features in schema column order followed by targets."""
    schema = dataset.schema
    num_pos = {c.name: i for i, c in enumerate(schema.numerical)}
    cat_pos = {c.name: i for i, c in enumerate(schema.categorical)}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([c.name for c in schema.columns] + list(schema.target_names))
        for r in range(dataset.n_rows):
            row = []
            for c in schema.columns:
                if c.kind == NUMERICAL:
                    row.append(_fmt(dataset.X_num[r, num_pos[c.name]]))
                else:
                    code = int(dataset.X_cat[r, cat_pos[c.name]])
                    row.append("" if code == MISSING_CODE or code >= c.category_count else c.categories[code])
            row.extend(str(int(v)) for v in dataset.Y[r])
            w.writerow(row)
