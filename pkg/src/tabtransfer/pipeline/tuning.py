"""Hyperparameter search over upstream data, emitting a config fragment."""

from __future__ import annotations

from pathlib import Path

from ..gbdt.params import GbdtParams
from ..hpo import BASELINE_SUBSAMPLE, GBDT, OK, TuningContext, random_search, space_for, tuning_protocol
from ..models.spec import spec_to_dict
from .config import ConfigError, ExperimentConfig
from .workspace import Workspace, write_json

SUBDIR = "hpo"


def run_hpo(cfg: ExperimentConfig, out_dir, resume: bool = False) -> dict:
    """Random search per the config's ``hpo`` section; writes ``trials.jsonl`` and ``best.json``.

    ``best.json`` carries a ready-to-include fragment: model ``params`` for a
    GBDT, or ``spec`` (plus the ``fs`` block with the best epoch when tuned on
    a downstream-sized subsample) for a neural family.
    """
    entry = cfg.hpo
    if entry is None:
        raise ConfigError("the configuration has no 'hpo' section")
    out = Path(out_dir) / SUBDIR
    if (out / "best.json").exists() and not resume:
        raise ConfigError(f"{out} already holds a search; pass --resume to redo it")
    out.mkdir(parents=True, exist_ok=True)
    ws = Workspace(cfg, out_dir)
    data = ws.task(entry.task)
    train, val = ((data.upstream_train_raw, data.upstream_val_raw) if entry.family == GBDT
                  else (data.upstream_train, data.upstream_val))
    ctx = TuningContext(entry.family, train, val, n_samples=entry.n_samples, seed=entry.seed,
                        pretrain=entry.pretrain, max_epochs=entry.max_epochs)
    space = space_for(entry.family)
    result = random_search(space, tuning_protocol(entry.protocol, ctx), budget=entry.budget, seed=entry.seed,
                           log_path=out / "trials.jsonl")
    best = {"config_hash": cfg.hash, "seed": entry.seed, "family": entry.family, "protocol": entry.protocol,
            "task": entry.task, "budget": entry.budget, "n_samples": entry.n_samples,
            "best_value": result.best_value, "best_config": result.best_config,
            "failed_trials": sum(t.status != OK for t in result.trials)}
    trial = result.best_trial
    if trial is not None:
        built = space.build(result.best_config)
        best["best_trial"] = trial.index
        best["best_epoch"] = trial.extra.get("best_epoch")
        if isinstance(built, GbdtParams):
            best["fragment"] = {"params": built.to_dict()}
        else:
            fragment = {"spec": spec_to_dict(built)}
            if entry.protocol == BASELINE_SUBSAMPLE and trial.extra.get("best_epoch"):
                fragment["fs"] = {"spec": spec_to_dict(built),
                                  "epochs": {str(entry.n_samples): trial.extra["best_epoch"]}}
            best["fragment"] = fragment
    write_json(out / "best.json", best)
    return best
