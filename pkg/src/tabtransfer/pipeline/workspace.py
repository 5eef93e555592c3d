"""Loaded data, fixed splits and per-task views shared by all jobs of a run."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional
import numpy as np

from ..data.csvio import load_csv
from ..data.dataset import Dataset
from ..data.preprocess import Preprocessor
from ..data.splits import SplitPlan, make_splits, make_task_split, sample_downstream
from ..data.synthetic import generate
from ..gbdt.stacking import Stacker, fit_dataset
from ..pretrain.checkpoint import PretrainCheckpoint
from ..pretrain.config import SUPERVISED
from ..pretrain.strategies import pretrain
from .config import ExperimentConfig, ModelEntry


@dataclass
class TaskData:
    """One downstream target against the remaining upstream targets.

    ``neural`` views are quantile-transformed and imputed; ``raw`` views are
    imputed only (tree models).
    """

    task: int
    target: str
    upstream_train: Dataset
    upstream_val: Dataset
    downstream: Dataset
    upstream_train_raw: Dataset
    upstream_val_raw: Dataset
    downstream_raw: Dataset


class Workspace:
    def __init__(self, cfg: ExperimentConfig, out_dir):
        self.cfg = cfg
        self.out = Path(out_dir)
        self.dataset = load_dataset(cfg)
        self.splits: SplitPlan = make_splits(self.dataset.n_rows, cfg.fractions, cfg.split_seed)
        self._tasks: dict[int, TaskData] = {}
        self._checkpoints: dict[tuple, PretrainCheckpoint] = {}
        self._stack_models: dict[tuple, object] = {}

    @property
    def task_ids(self) -> list[int]:
        return list(self.cfg.tasks) if self.cfg.tasks is not None else list(range(self.dataset.n_targets))

    def task(self, index: int) -> TaskData:
        if index not in self._tasks:
            if not 0 <= index < self.dataset.n_targets:
                raise IndexError(f"task {index} out of range for {self.dataset.n_targets} targets")
            up, down = make_task_split(self.dataset, index)
            train = up.subset(self.splits.train)
            pre = Preprocessor.fit(train)
            self._tasks[index] = TaskData(
                index, self.dataset.schema.target_names[index], pre.neural(train),
                pre.neural(up.subset(self.splits.val)), pre.neural(down), pre.raw(train),
                pre.raw(up.subset(self.splits.val)), pre.raw(down))
        return self._tasks[index]

    def downstream_rows(self, n: int, seed: int) -> np.ndarray:
        return sample_downstream(self.splits.train, n, seed)

    def checkpoint_scope(self, entry: ModelEntry, task: int) -> Optional[int]:
        """The task a checkpoint belongs to, or None when one serves every task.

        Self-supervised strategies never read labels, and every task's upstream
        training view holds the same rows and features, so their extractor is
        the same for all tasks.
        """
        return task if entry.pretrain.strategy == SUPERVISED else None

    def checkpoint_path(self, model: str, scope: Optional[int]) -> Path:
        return self.out / "checkpoints" / model / ("shared.ckpt" if scope is None else f"task{scope}.ckpt")

    def checkpoint(self, entry: ModelEntry, task: int) -> PretrainCheckpoint:
        """Pre-trained extractor for ``entry`` on ``task``'s upstream data, read
        from disk when an earlier run of the same configuration left it."""
        scope = self.checkpoint_scope(entry, task)
        key = (entry.name, scope)
        if key in self._checkpoints:
            return self._checkpoints[key]
        path = self.checkpoint_path(entry.name, scope)
        if path.exists():
            ckpt = PretrainCheckpoint.load(path)
            if ckpt.meta.get("config_hash") == self.cfg.hash:
                self._checkpoints[key] = ckpt
                return ckpt
        data = self.task(task)
        ckpt = pretrain(entry.spec, data.upstream_train, entry.pretrain, seed=self.cfg.pretrain_seed,
                        val=data.upstream_val).checkpoint
        ckpt.meta.update({"config_hash": self.cfg.hash, "seed": self.cfg.pretrain_seed, "task": scope,
                          "pretrain": entry.pretrain.to_dict()})
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        ckpt.save(tmp)
        tmp.replace(path)
        self._checkpoints[key] = ckpt
        return ckpt

    def stacker(self, entry: ModelEntry, task: int) -> Stacker:
        """Upstream-target GBDT models for stacking. A target's model depends
        only on the shared training rows, so it is reused across tasks."""
        data = self.task(task)
        names = tuple(data.upstream_train_raw.schema.target_names)
        models = []
        for k, name in enumerate(names):
            key = (entry.name, name)
            if key not in self._stack_models:
                self._stack_models[key] = fit_dataset(data.upstream_train_raw, entry.params,
                                                      seed=self.cfg.pretrain_seed, target=k)
            models.append(self._stack_models[key])
        return Stacker(names, tuple(models))


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.synthetic is not None:
        return generate(cfg.synthetic).dataset
    return load_csv(cfg.csv, cfg.schema)


def write_json(path, payload) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    tmp.replace(path)


def read_jsonl(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        return []
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line:
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError:
                break   # a torn last line from an interrupted write
    return out


def append_jsonl(path, record: dict, fsync: bool = False) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")
        if fsync:
            fh.flush()
            os.fsync(fh.fileno())

