"""The experiment matrix: job expansion, execution, resumable result log."""

from __future__ import annotations

import json
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from ..data.splits import DOWNSTREAM_SIZES
from ..gbdt.stacking import evaluate_dataset, fit_dataset
from ..transfer.downstream import finetune, train_from_scratch
from ..transfer.plan import (
    FINETUNE_LR,
    FROM_SCRATCH,
    FS,
    FS2,
    SCRATCH_LR,
    TRANSFER_SETUPS,
    is_frozen,
    make_plan,
    select_epoch_policy,
)
from .config import GBDT_STACKING, ConfigError, ExperimentConfig, resolved
from .workspace import Workspace, append_jsonl, read_jsonl, write_json

RESULTS = "results.jsonl"
FAILURES = "failures.jsonl"
TIMINGS = "timings.jsonl"
MANIFEST = "manifest.json"


@dataclass(frozen=True)
class Job:
    model: str
    setup: str
    task: int
    n_samples: int
    seed: int

    @property
    def id(self) -> str:
        return f"{self.model}/{self.setup}/task{self.task}/n{self.n_samples}/seed{self.seed}"

    @property
    def arm(self) -> str:
        return f"{self.model}/{self.setup}"


@dataclass
class RunSummary:
    total: int
    skipped: int
    executed: int
    failed: int

    @property
    def remaining(self) -> int:
        return self.total - self.skipped - self.executed + self.failed

    @property
    def exit_code(self) -> int:
        return 2 if self.failed else 0


def expand_jobs(cfg: ExperimentConfig, task_ids: Iterable[int]) -> list[Job]:
    """Task-major order so that one pre-trained checkpoint serves a run of consecutive jobs."""
    return [Job(m.name, setup, t, n, s)
            for t in task_ids for m in cfg.models for setup in m.setups for n in cfg.n_samples for s in cfg.seeds]


def validate_grid(cfg: ExperimentConfig) -> None:
    neural = [m for m in cfg.models if not m.is_gbdt]
    off_grid = [n for n in cfg.n_samples if n not in DOWNSTREAM_SIZES]
    if neural and off_grid:
        raise ConfigError(f"n_samples {off_grid} are outside the downstream grid {DOWNSTREAM_SIZES}, "
                          "which fixes the neural epoch rule")


def protocol_manifest(cfg: ExperimentConfig) -> dict:
    """Training constants a run uses, recorded verbatim for audit."""
    policies = {}
    for n in cfg.n_samples:
        if n not in DOWNSTREAM_SIZES:
            continue
        for setup in TRANSFER_SETUPS + (FS2,):
            p = select_epoch_policy(n, setup)
            policies[f"{setup}/n{n}"] = {"kind": p.kind, "epochs": p.epochs, "patience": p.patience,
                                         "val_fraction": p.val_fraction}
    return {
        "finetune_lr": FINETUNE_LR,
        "scratch_lr": SCRATCH_LR,
        "pretrain": {m.name: {"strategy": m.pretrain.strategy, "epochs": m.pretrain.epochs,
                              "patience": m.pretrain.patience, "lr": m.pretrain.lr}
                     for m in cfg.models if not m.is_gbdt},
        "epoch_policy": policies,
        "frozen_setups": [s for s in TRANSFER_SETUPS if is_frozen(s)],
        "batch_size": "min(256, n_samples)",
    }


def run_manifest(ws: Workspace, n_jobs: int) -> dict:
    cfg = ws.cfg
    return {"config_hash": cfg.hash, "config": resolved(cfg), "protocol": protocol_manifest(cfg), "jobs": n_jobs,
            "task_ids": ws.task_ids, "seeds": cfg.seeds, "pretrain_seed": cfg.pretrain_seed,
            "splits": {"seed": cfg.split_seed, "train": int(ws.splits.train.size), "val": int(ws.splits.val.size),
                       "test": int(ws.splits.test.size)}}


def run_job(ws: Workspace, job: Job) -> dict:
    entry = ws.cfg.model(job.model)
    data = ws.task(job.task)
    rows = ws.downstream_rows(job.n_samples, job.seed)
    record = {"job": job.id, "model": job.model, "setup": job.setup, "task": job.task, "target": data.target,
              "n_samples": job.n_samples, "seed": job.seed, "config_hash": ws.cfg.hash,
              "n_positive": int(data.downstream.Y[rows, 0].sum())}
    if entry.is_gbdt:
        train, test = data.downstream_raw.subset(rows), data.downstream_raw.subset(ws.splits.test)
        if job.setup == GBDT_STACKING:
            stacker = ws.stacker(entry, job.task)
            train, test = stacker.transform(train), stacker.transform(test)
        model = fit_dataset(train, entry.params, seed=job.seed)
        record.update(test_auc=evaluate_dataset(model, test), n_features=train.schema.n_features,
                      n_estimators=entry.params.n_estimators, lr=entry.params.learning_rate)
        return record
    train, test = data.downstream.subset(rows), data.downstream.subset(ws.splits.test)
    if job.setup == FS2:
        result = train_from_scratch(entry.spec, make_plan(FROM_SCRATCH, job.n_samples, variant=FS2), train, test,
                                    job.seed)
    elif job.setup == FS:
        plan = make_plan(FROM_SCRATCH, job.n_samples, variant=FS, tuned_epoch=entry.fs_epoch(job.n_samples))
        result = train_from_scratch(entry.fs_spec, plan, train, test, job.seed)
    else:
        ckpt = ws.checkpoint(entry, job.task)
        result = finetune(ckpt, make_plan(job.setup, job.n_samples), train, test, job.seed)
        record["pretrain_epochs_run"] = ckpt.epochs_run
        record["pretrain_best_epoch"] = ckpt.best_epoch
        record["pretrain_strategy"] = ckpt.strategy
    record.update(test_auc=result.test_auc, epochs_run=result.epochs_run, best_epoch=result.best_epoch,
                  lr=result.plan.lr, policy=result.plan.policy.kind, head=result.plan.head,
                  batch_size=result.plan.batch_size)
    return record


def _attempt(ws: Workspace, job: Job) -> tuple[Optional[dict], Optional[str], float]:
    start = time.perf_counter()
    try:
        return run_job(ws, job), None, time.perf_counter() - start
    except Exception as exc:  # one failed job must not end the run
        detail = "".join(traceback.format_exception_only(type(exc), exc)).strip()
        return None, detail, time.perf_counter() - start


_WORKER: dict = {}


def _worker_init(cfg: ExperimentConfig, out_dir: str) -> None:
    _WORKER["ws"] = Workspace(cfg, out_dir)


def _worker_pretrain(key: tuple) -> None:
    ws = _WORKER["ws"]
    ws.checkpoint(ws.cfg.model(key[0]), key[1])


def _worker_job(job: Job):
    return _attempt(_WORKER["ws"], job)


def completed_jobs(out_dir) -> set:
    return {r["job"] for r in read_jsonl(Path(out_dir) / RESULTS)}


def _repair_log(path: Path) -> None:
    """Drop a torn final line left by an interruption mid-write."""
    if not path.exists():
        return
    records = read_jsonl(path)
    text = path.read_text(encoding="utf-8")
    if text.count("\n") != len(records) or (text and not text.endswith("\n")):
        path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records), encoding="utf-8")


def prepare_out_dir(cfg: ExperimentConfig, out_dir, resume: bool) -> Path:
    out = Path(out_dir)
    manifest_path = out / MANIFEST
    if manifest_path.exists():
        previous = json.loads(manifest_path.read_text(encoding="utf-8"))
        if not resume:
            raise ConfigError(f"{out} already holds a run; pass --resume to continue it")
        if previous.get("config_hash") != cfg.hash:
            raise ConfigError(f"{out} holds a run of config {previous.get('config_hash')}, not {cfg.hash}")
    out.mkdir(parents=True, exist_ok=True)
    _repair_log(out / RESULTS)
    return out


def run_matrix(cfg: ExperimentConfig, out_dir, resume: bool = False, workers: int = 1,
               max_jobs: Optional[int] = None) -> RunSummary:
    """Run every pending job; completed jobs (by id) are skipped.

    Results are appended in job order whatever the worker count, so an
    interrupted-then-resumed run leaves the same log as an uninterrupted one.
    ``max_jobs`` stops after that many executed jobs.
    """
    validate_grid(cfg)
    out = prepare_out_dir(cfg, out_dir, resume)
    ws = Workspace(cfg, out)
    jobs = expand_jobs(cfg, ws.task_ids)
    write_json(out / MANIFEST, run_manifest(ws, len(jobs)))
    done = completed_jobs(out)
    pending = [j for j in jobs if j.id not in done]
    if max_jobs is not None:
        pending = pending[:max(0, max_jobs)]
    summary = RunSummary(len(jobs), sum(j.id in done for j in jobs), 0, 0)

    def record(job: Job, outcome) -> None:
        result, error, seconds = outcome
        summary.executed += 1
        append_jsonl(out / TIMINGS, {"job": job.id, "seconds": round(seconds, 3), "ok": error is None})
        if error is None:
            append_jsonl(out / RESULTS, result)
        else:
            summary.failed += 1
            append_jsonl(out / FAILURES, {"job": job.id, "error": error, "config_hash": cfg.hash})

    if workers <= 1 or len(pending) <= 1:
        for job in pending:
            record(job, _attempt(ws, job))
        return summary

    # pre-train each checkpoint once, one per worker task, before jobs that share it start
    first_task = {}
    for j in pending:
        if j.setup in TRANSFER_SETUPS and not cfg.model(j.model).is_gbdt:
            first_task.setdefault((j.model, ws.checkpoint_scope(cfg.model(j.model), j.task)), j.task)
    keys = [(model, task) for (model, _), task in first_task.items()]
    with ProcessPoolExecutor(max_workers=workers, initializer=_worker_init, initargs=(cfg, str(out))) as pool:
        list(pool.map(_worker_pretrain, keys))
        for job, outcome in zip(pending, pool.map(_worker_job, pending)):
            record(job, outcome)
    return summary


def pretrain_all(cfg: ExperimentConfig, out_dir, resume: bool = False) -> list[dict]:
    """Pre-train every neural model on every task; returns one summary per checkpoint."""
    out = prepare_out_dir(cfg, out_dir, resume)
    ws = Workspace(cfg, out)
    write_json(out / MANIFEST, run_manifest(ws, 0))
    rows, seen = [], set()
    for task in ws.task_ids:
        for entry in cfg.models:
            scope = None if entry.is_gbdt else ws.checkpoint_scope(entry, task)
            if entry.is_gbdt or (entry.name, scope) in seen:
                continue
            seen.add((entry.name, scope))
            ckpt = ws.checkpoint(entry, task)
            rows.append({"model": entry.name, "task": scope, "strategy": ckpt.strategy,
                         "epochs_run": ckpt.epochs_run, "best_epoch": ckpt.best_epoch,
                         "best_metric": ckpt.best_metric, "fingerprint": ckpt.fingerprint,
                         "path": ws.checkpoint_path(entry.name, scope).relative_to(out).as_posix(),
                         "config_hash": cfg.hash, "seed": cfg.pretrain_seed})
    write_json(out / "pretrain.json", rows)
    return rows


__all__ = ["FAILURES", "Job", "MANIFEST", "RESULTS", "RunSummary", "TIMINGS", "completed_jobs",
           "expand_jobs", "pretrain_all", "protocol_manifest", "run_job", "run_manifest", "run_matrix"]
