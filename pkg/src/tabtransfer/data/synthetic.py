"""Shared-latent synthetic multi-label benchmark.

Recipe (also written to the manifest):

* latent factors ``z ~ N(0, I_L)`` per row;
* numerical feature ``j``: ``a_j . z / |a_j| + feature_noise * e``, then a
  monotone distortion (``exp`` or cube) on a fraction of columns;
* categorical feature: ``argmax_k (b_k . z + Gumbel)``;
* target ``k``: ``1[w_k . z / |w_k| + score_noise * e > t_k]`` with ``t_k`` set
  from the target prevalence, then labels flipped with prob. ``label_noise``.

All targets read the same latent factors, so upstream targets carry
information about any held-out downstream target.

With ``pseudo_feature`` on, columns ``num_0``/``num_1`` become independent
N(0, 1) inputs and an extra column ``pseudo = num_0 * num_1 + noise`` is
emitted; target 0 leans mostly on it and a few upstream targets lean on it
moderately.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .csvio import write_csv
from .dataset import CATEGORICAL, MISSING_CODE, NUMERICAL, Column, Dataset, Schema
from .preprocess import norm_ppf


@dataclass
class SyntheticSpec:
    rows: int = 5000
    n_numerical: int = 30
    n_categorical: int = 1
    n_categories: int = 3
    latent_dim: int = 4
    n_targets: int = 12
    weight_sparsity: float = 0.3
    feature_noise: float = 1.5
    score_noise: float = 0.3
    label_noise: float = 0.02
    distorted_fraction: float = 0.3
    missing_rate: float = 0.01
    prevalence: Optional[list] = None
    pseudo_feature: bool = False
    pseudo_noise: float = 0.1
    pseudo_target_weight: float = 0.85
    pseudo_upstream_weight: float = 0.5
    pseudo_upstream_targets: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.rows < 1 or self.n_targets < 1 or self.latent_dim < 1:
            raise ValueError("rows, n_targets and latent_dim must be positive")
        if self.pseudo_feature and self.n_numerical < 2:
            raise ValueError("pseudo_feature needs at least two numerical columns")
        for name in ("weight_sparsity", "label_noise", "distorted_fraction", "missing_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def prevalences(self) -> np.ndarray:
        if self.prevalence is not None:
            p = np.broadcast_to(np.asarray(self.prevalence, dtype=float), (self.n_targets,))
            return p.copy()
        return np.linspace(0.6, 0.1, self.n_targets) if self.n_targets > 1 else np.array([0.5])


@dataclass
class SyntheticData:
    dataset: Dataset
    latents: np.ndarray
    manifest: dict = field(default_factory=dict)


def generate(spec: SyntheticSpec) -> SyntheticData:
    rng = np.random.default_rng(spec.seed)
    n, L = spec.rows, spec.latent_dim
    z = rng.standard_normal((n, L))

    A = rng.standard_normal((spec.n_numerical, L))
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    X = z @ A.T + spec.feature_noise * rng.standard_normal((n, spec.n_numerical))
    n_distort = int(round(spec.distorted_fraction * spec.n_numerical))
    distort = {}
    for j in rng.choice(spec.n_numerical, size=n_distort, replace=False).tolist():
        kind = "exp" if j % 2 == 0 else "cube"
        X[:, j] = np.exp(X[:, j]) if kind == "exp" else X[:, j] ** 3
        distort[f"num_{j}"] = kind

    pseudo = None
    if spec.pseudo_feature:
        X[:, 0] = rng.standard_normal(n)
        X[:, 1] = rng.standard_normal(n)
        distort.pop("num_0", None)
        distort.pop("num_1", None)
        pseudo = X[:, 0] * X[:, 1] + spec.pseudo_noise * rng.standard_normal(n)

    B = rng.standard_normal((spec.n_categorical, spec.n_categories, L))
    gumbel = -np.log(-np.log(rng.uniform(1e-12, 1.0, (n, spec.n_categorical, spec.n_categories))))
    C = np.argmax(np.einsum("nl,ckl->nck", z, B) + gumbel, axis=2).astype(np.int64)

    W = rng.standard_normal((spec.n_targets, L))
    keep = rng.random((spec.n_targets, L)) >= spec.weight_sparsity
    keep[np.arange(spec.n_targets), rng.integers(0, L, spec.n_targets)] = True
    W = W * keep
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    W *= np.where(W.sum(axis=1, keepdims=True) < 0, -1.0, 1.0)

    latent_score = z @ W.T
    score = latent_score.copy()
    pseudo_targets: list[int] = []
    if pseudo is not None:
        ps = (pseudo - pseudo.mean()) / pseudo.std()
        score[:, 0] = spec.pseudo_target_weight * ps + np.sqrt(1 - spec.pseudo_target_weight ** 2) * latent_score[:, 0]
        pseudo_targets = list(range(1, min(1 + spec.pseudo_upstream_targets, spec.n_targets)))
        w = spec.pseudo_upstream_weight
        for k in pseudo_targets:
            score[:, k] = w * ps + np.sqrt(1 - w ** 2) * latent_score[:, k]
    score = score + spec.score_noise * rng.standard_normal(score.shape)
    prev = spec.prevalences()
    sd = np.sqrt(1.0 + spec.score_noise ** 2)
    thresholds = -norm_ppf(np.clip(prev, 1e-6, 1 - 1e-6)) * sd
    Y = (score > thresholds[None, :]).astype(np.int64)
    flips = rng.random(Y.shape) < spec.label_noise
    Y = np.where(flips, 1 - Y, Y)

    if spec.missing_rate > 0:
        X[rng.random(X.shape) < spec.missing_rate] = np.nan
        C[rng.random(C.shape) < spec.missing_rate] = MISSING_CODE
        if pseudo is not None:
            # the pseudo-feature sources stay complete so the recovery target is exact
            X[:, :2] = np.where(np.isnan(X[:, :2]), 0.0, X[:, :2])

    cols = [Column(f"num_{j}", NUMERICAL) for j in range(spec.n_numerical)]
    if pseudo is not None:
        cols.append(Column("pseudo", NUMERICAL))
        X = np.column_stack([X, pseudo])
    letters = tuple(chr(ord("a") + k) if k < 26 else f"c{k}" for k in range(spec.n_categories))
    cols += [Column(f"cat_{j}", CATEGORICAL, letters) for j in range(spec.n_categorical)]
    schema = Schema(tuple(cols), tuple(f"target_{k}" for k in range(spec.n_targets)))
    ds = Dataset(schema, X, C, Y)

    manifest = {
        "generator": "shared-latent multilabel",
        "spec": asdict(spec),
        "recipe": [
            "z ~ N(0, I_latent_dim)",
            "num_j = normalize(a_j).z + feature_noise*N(0,1); distorted columns get exp or cube",
            "cat_j = argmax_k(b_jk.z + Gumbel)",
            "target_k = 1[normalize(w_k).z + score_noise*N(0,1) > threshold_k], then label flips w.p. label_noise",
        ],
        "mixing": A.tolist(),
        "target_weights": W.tolist(),
        "thresholds": thresholds.tolist(),
        "distorted_columns": distort,
    }
    if pseudo is not None:
        manifest["pseudo"] = {
            "feature": "pseudo",
            "sources": ["num_0", "num_1"],
            "formula": "num_0 * num_1 + pseudo_noise * N(0,1)",
            "downstream_target": "target_0",
            "upstream_targets": [f"target_{k}" for k in pseudo_targets],
        }
    return SyntheticData(ds, z, manifest)


def generate_files(spec: SyntheticSpec, out_dir, config_hash: str = "") -> dict:
    """Write ``data.csv``, ``schema.json``, ``latents.csv`` and ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = generate(spec)
    write_csv(data.dataset, out / "data.csv")
    data.dataset.schema.save(out / "schema.json")
    with open(out / "latents.csv", "w", encoding="utf-8") as fh:
        fh.write(",".join(f"z_{i}" for i in range(data.latents.shape[1])) + "\n")
        for row in data.latents:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    manifest = dict(data.manifest)
    manifest["seed"] = spec.seed
    manifest["config_hash"] = config_hash or hashlib.sha256(json.dumps(asdict(spec), sort_keys=True).encode()).hexdigest()[:16]
    manifest["files"] = ["data.csv", "schema.json", "latents.csv"]
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest
