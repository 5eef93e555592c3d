"""Dataset ingestion and synthetic benchmark generation commands."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..data.dataset import MISSING_CODE
from ..data.synthetic import SyntheticSpec, generate_files
from .config import ExperimentConfig
from .workspace import Workspace, write_json

SUBDIR = "ingest"


def ingest(cfg: ExperimentConfig, out_dir) -> dict:
    """Load and validate the configured data, fix the splits and write a summary.

    Writes ``schema.json``, ``splits.json`` (row indices) and ``summary.json``
    (per-column missing rates, per-target prevalence) under ``ingest/``.
    """
    out = Path(out_dir) / SUBDIR
    ws = Workspace(cfg, out_dir)
    ds = ws.dataset
    out.mkdir(parents=True, exist_ok=True)
    ds.schema.save(out / "schema.json")
    write_json(out / "splits.json", {"config_hash": cfg.hash, "seed": cfg.split_seed,
                                     "fractions": list(cfg.fractions),
                                     **{name: getattr(ws.splits, name).tolist() for name in ("train", "val", "test")}})
    missing = {c.name: float(np.mean(np.isnan(ds.X_num[:, j]))) for j, c in enumerate(ds.schema.numerical)}
    missing.update({c.name: float(np.mean(ds.X_cat[:, j] == MISSING_CODE)) for j, c in enumerate(ds.schema.categorical)})
    summary = {
        "config_hash": cfg.hash,
        "seed": cfg.split_seed,
        "rows": ds.n_rows,
        "numerical": len(ds.schema.numerical),
        "categorical": len(ds.schema.categorical),
        "targets": list(ds.schema.target_names),
        "prevalence": {name: float(ds.Y[:, k].mean()) for k, name in enumerate(ds.schema.target_names)},
        "missing_rate": missing,
        "schema_fingerprint": ds.schema.fingerprint(),
        "split_sizes": {name: int(getattr(ws.splits, name).size) for name in ("train", "val", "test")},
    }
    write_json(out / "summary.json", summary)
    return summary


def generate_synthetic(spec: SyntheticSpec, out_dir, config_hash: str = "") -> dict:
    """Write the synthetic benchmark files; identical for identical specs."""
    return generate_files(spec, out_dir, config_hash)
