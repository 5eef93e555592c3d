"""Reports derived from a run's result log: rank heatmap, AUC tables, gaps.

Reports read ``results.jsonl`` and the run manifest and never write to them,
so regenerating a report is safe and reproducible.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..data.splits import DOWNSTREAM_SIZES
from ..evaluation import ALPHA, compute_ranks, stderr
from .config import ConfigError
from .runner import FAILURES, MANIFEST, RESULTS
from .workspace import read_jsonl, write_json

RANK_RULE = ("per task, the best model by mean AUC and every model whose AUCs are not significantly lower "
             "(one-sided Wilcoxon rank-sum, p >= alpha) share a rank; the group is removed and ranking repeats")


@dataclass
class Grid:
    """The job matrix a run was configured with."""

    arms: list
    tasks: list
    n_samples: list
    seeds: list
    config_hash: str
    targets: dict = field(default_factory=dict)

    @classmethod
    def from_manifest(cls, manifest: dict) -> "Grid":
        config = manifest["config"]
        arms = [f"{m['name']}/{s}" for m in config["models"] for s in m["setups"]]
        order = {n: i for i, n in enumerate(DOWNSTREAM_SIZES)}
        n_samples = sorted(config["n_samples"], key=lambda n: (order.get(n, len(order)), n))
        return cls(arms, list(manifest["task_ids"]), n_samples, list(config["seeds"]), manifest["config_hash"])


@dataclass
class Report:
    grid: Grid
    mean_rank: dict        # n -> arm -> mean rank (absent when nothing could be ranked)
    rank_stderr: dict
    auc: dict              # n -> task -> arm -> list of (seed, auc)
    ranked_tasks: dict     # n -> tasks with a complete common seed set
    missing: list
    label_counts: dict
    alpha: float = ALPHA

    def mean_auc(self, n: int, arm: str) -> float:
        """Mean test AUC of one arm at one sample size over every task and seed."""
        values = [v for t in self.grid.tasks for _, v in self.auc[n][t][arm]]
        return float(np.mean(values)) if values else float("nan")


def _cell(values) -> str:
    if not values:
        return ""
    return f"{np.mean(values):.3f}±{stderr(values):.3f}"


def build_report(records: list[dict], grid: Grid, failures: Optional[list] = None, alpha: float = ALPHA) -> Report:
    failed = {f["job"] for f in failures or []}
    scores: dict = {}
    positives: dict = {}
    for r in records:
        if r.get("config_hash") != grid.config_hash:
            continue
        arm = f"{r['model']}/{r['setup']}"
        scores.setdefault((r["n_samples"], r["task"], arm), {})[r["seed"]] = r["test_auc"]
        positives.setdefault(r["n_samples"], []).append(r.get("n_positive"))
        if r["task"] not in grid.targets:
            grid.targets[r["task"]] = r.get("target", "")

    missing, mean_rank, rank_se, auc, ranked_tasks = [], {}, {}, {}, {}
    for n in grid.n_samples:
        auc[n] = {}
        rankable = {}
        for t in grid.tasks:
            auc[n][t] = {}
            common = set(grid.seeds)
            for arm in grid.arms:
                have = scores.get((n, t, arm), {})
                auc[n][t][arm] = sorted(have.items())
                for s in grid.seeds:
                    if s not in have:
                        job = f"{arm}/task{t}/n{n}/seed{s}"
                        missing.append({"job": job, "arm": arm, "task": t, "n_samples": n, "seed": s,
                                        "reason": "failed" if job in failed else "not run"})
                common &= set(have)
            if common:
                keep = sorted(common)
                rankable[t] = {arm: [scores[(n, t, arm)][s] for s in keep] for arm in grid.arms}
        ranked_tasks[n] = sorted(rankable)
        if rankable and grid.arms:
            table = compute_ranks({f"task{t}": rankable[t] for t in sorted(rankable)}, alpha)
            mean_rank[n], rank_se[n] = table.mean_rank, table.rank_stderr
    label_counts = {n: {"min": min(v), "max": max(v)} for n, v in positives.items()
                    if all(x is not None for x in v)}
    return Report(grid, mean_rank, rank_se, auc, ranked_tasks, missing, label_counts, alpha)


def write_csv(path: Path, header: list, rows: list) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _rank_rows(report: Report, table: dict) -> list:
    rows = []
    for n in report.grid.n_samples:
        values = table.get(n)
        rows.append([n] + [f"{values[a]:.4f}" if values else "" for a in report.grid.arms])
    return rows


def write_report(report: Report, dest) -> list[Path]:
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    grid = report.grid
    written = []
    header = ["n_samples"] + grid.arms
    for name, table in (("heatmap.csv", report.mean_rank), ("rank_stderr.csv", report.rank_stderr)):
        write_csv(dest / name, header, _rank_rows(report, table))
        written.append(dest / name)
    for n in grid.n_samples:
        rows = [[t, grid.targets.get(t, "")] + [_cell([v for _, v in report.auc[n][t][a]]) for a in grid.arms]
                for t in grid.tasks]
        path = dest / f"auc_n{n}.csv"
        write_csv(path, ["task", "target"] + grid.arms, rows)
        written.append(path)
    keys = ["job", "arm", "task", "n_samples", "seed", "reason"]
    write_csv(dest / "missing.csv", keys, [[m[k] for k in keys] for m in report.missing])
    written.append(dest / "missing.csv")
    write_json(dest / "report.json", {
        "config_hash": grid.config_hash,
        "seeds": grid.seeds,
        "alpha": report.alpha,
        "rank_rule": RANK_RULE,
        "arms": grid.arms,
        "ranked_tasks": {str(n): v for n, v in report.ranked_tasks.items()},
        "missing_jobs": len(report.missing),
        "downstream_positive_labels": {str(n): v for n, v in report.label_counts.items()},
    })
    written.append(dest / "report.json")
    return written


def report_run(out_dir, dest=None, alpha: float = ALPHA) -> Report:
    """Build and write the reports for the run in ``out_dir`` (into ``out_dir/report`` by default)."""
    out = Path(out_dir)
    manifest_path = out / MANIFEST
    if not manifest_path.exists():
        raise ConfigError(f"{out} holds no run manifest")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    grid = Grid.from_manifest(manifest)
    report = build_report(read_jsonl(out / RESULTS), grid, read_jsonl(out / FAILURES), alpha)
    write_report(report, dest if dest is not None else out / "report")
    return report
