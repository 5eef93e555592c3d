"""Pseudo-feature experiment: the same downstream task without the feature,
with predicted pseudo-values, and with the real values."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..evaluation import compute_ranks, stderr
from ..gbdt.params import GbdtParams
from ..pretrain.strategies import pretrain
from ..pseudofeature import UPSTREAM_MISSING, align_downstream_missing, align_upstream_missing, select_important_features
from ..transfer.downstream import finetune
from ..transfer.plan import make_plan
from .config import ConfigError, ExperimentConfig, resolved
from .reports import write_csv
from .workspace import Workspace, append_jsonl, read_jsonl, write_json

MISSING = "missing"
PSEUDO = "pseudo"
TRUE = "true"
ARMS = (MISSING, PSEUDO, TRUE)
SUBDIR = "pseudofeature"


@dataclass
class PseudoFeatureSummary:
    direction: str
    features: list
    mean_auc: dict        # n -> arm -> mean AUC
    mean_rank: dict       # n -> arm -> rank


def choose_features(ws: Workspace, cfg: ExperimentConfig) -> list[str]:
    """Named features, or the k most important for the downstream target by
    GBDT total gain (default parameters) on the downstream training pool."""
    entry = cfg.pseudofeature
    data = ws.task(entry.task)
    if entry.features:
        known = set(data.downstream.schema.feature_names)
        unknown = [f for f in entry.features if f not in known]
        if unknown:
            raise ConfigError(f"pseudofeature.features not in the data: {unknown}")
        return list(entry.features)
    pool = data.downstream_raw.subset(ws.splits.train)
    return select_important_features(pool, entry.k, GbdtParams(), seed=cfg.pretrain_seed)


def _prepare(cfg: ExperimentConfig, out: Path, resume: bool) -> None:
    manifest = out / "manifest.json"
    if manifest.exists():
        previous = json.loads(manifest.read_text(encoding="utf-8"))
        if not resume:
            raise ConfigError(f"{out} already holds a pseudo-feature run; pass --resume to continue it")
        if previous.get("config_hash") != cfg.hash:
            raise ConfigError(f"{out} holds a run of config {previous.get('config_hash')}, not {cfg.hash}")
    out.mkdir(parents=True, exist_ok=True)


def run_pseudofeature(cfg: ExperimentConfig, out_dir, resume: bool = False) -> PseudoFeatureSummary:
    if cfg.pseudofeature is None:
        raise ConfigError("the configuration has no 'pseudofeature' section")
    entry = cfg.pseudofeature
    model = cfg.model(entry.model)
    out = Path(out_dir) / SUBDIR
    _prepare(cfg, out, resume)
    ws = Workspace(cfg, out_dir)
    data = ws.task(entry.task)
    features = choose_features(ws, cfg)
    write_json(out / "manifest.json", {"config_hash": cfg.hash, "config": resolved(cfg), "direction": entry.direction,
                                       "features": features, "arms": list(ARMS), "seeds": cfg.seeds,
                                       "n_samples": entry.n_samples, "setup": entry.setup, "model": entry.model})

    results_path = out / "results.jsonl"
    done = {(r["n_samples"], r["seed"]) for r in read_jsonl(results_path) if r["arm"] == TRUE}
    full_up, full_val = data.upstream_train, data.upstream_val
    lack_up, lack_val = full_up.drop_features(features), full_val.drop_features(features)
    test = data.downstream.subset(ws.splits.test)

    for seed in cfg.seeds:
        pending = [n for n in entry.n_samples if (n, seed) not in done]
        if not pending:
            continue
        # every arm pre-trains with the job seed so the arms differ only in the feature
        ck_true = pretrain(model.spec, full_up, model.pretrain, seed, val=full_val).checkpoint
        ck_missing = pretrain(model.spec, lack_up, model.pretrain, seed, val=lack_val).checkpoint
        for n in pending:
            train = data.downstream.subset(ws.downstream_rows(n, seed))
            plan = make_plan(entry.setup, n)
            auc = {
                MISSING: finetune(ck_missing, plan, train.drop_features(features), test.drop_features(features),
                                  seed).test_auc,
                TRUE: finetune(ck_true, plan, train, test, seed).test_auc,
            }
            if entry.direction == UPSTREAM_MISSING:
                aligned = align_upstream_missing(lack_up, train, features, model.spec, model.pretrain, seed=seed,
                                                 upstream_val=lack_val, stage_checkpoint=ck_missing)
                auc[PSEUDO] = finetune(aligned.checkpoint, plan, aligned.downstream, aligned.align(test),
                                       seed).test_auc
            else:
                aligned = align_downstream_missing(full_up, train.drop_features(features), features, model.spec,
                                                   model.pretrain, seed=seed, upstream_val=full_val,
                                                   checkpoint=ck_true)
                auc[PSEUDO] = finetune(ck_true, plan, aligned.downstream,
                                       aligned.align(test.drop_features(features)), seed).test_auc
            aligned.save(out / "alignments" / f"n{n}_seed{seed}")
            for arm in ARMS:   # the TRUE record goes last: it marks the (n, seed) cell complete
                append_jsonl(results_path, {"arm": arm, "n_samples": n, "seed": seed, "test_auc": auc[arm],
                                            "direction": entry.direction, "features": features,
                                            "task": entry.task, "config_hash": cfg.hash})
    return summarize(out, cfg, features)


def summarize(out: Path, cfg: ExperimentConfig, features: list) -> PseudoFeatureSummary:
    entry = cfg.pseudofeature
    scores: dict = {}
    for r in read_jsonl(out / "results.jsonl"):
        scores.setdefault(r["n_samples"], {}).setdefault(r["arm"], {})[r["seed"]] = r["test_auc"]
    mean_auc, mean_rank, auc_rows, rank_rows = {}, {}, [], []
    for n in entry.n_samples:
        by_arm = scores.get(n, {})
        seeds = sorted(set.intersection(*(set(by_arm.get(a, {})) for a in ARMS)))
        if not seeds:
            auc_rows.append([n, 0] + [""] * len(ARMS))
            rank_rows.append([n] + [""] * len(ARMS))
            continue
        values = {a: [by_arm[a][s] for s in seeds] for a in ARMS}
        mean_auc[n] = {a: float(np.mean(v)) for a, v in values.items()}
        mean_rank[n] = compute_ranks({"task": values}).mean_rank
        auc_rows.append([n, len(seeds)] + [f"{np.mean(values[a]):.3f}±{stderr(values[a]):.3f}" for a in ARMS])
        rank_rows.append([n] + [f"{mean_rank[n][a]:.4f}" for a in ARMS])
    write_csv(out / "ranks.csv", ["n_samples"] + list(ARMS), rank_rows)
    write_csv(out / "auc.csv", ["n_samples", "seeds"] + list(ARMS), auc_rows)
    return PseudoFeatureSummary(entry.direction, features, mean_auc, mean_rank)
