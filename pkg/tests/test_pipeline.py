import csv
import json
import re
import shutil

import numpy as np
import pytest

from tabtransfer.cli import main
from tabtransfer.data import SyntheticSpec, generate, write_csv
from tabtransfer.pipeline import (
    ConfigError,
    Grid,
    build_report,
    expand_jobs,
    load_config,
    parse_config,
    read_jsonl,
)

TINY_DATA = {"synthetic": {"rows": 400, "n_numerical": 5, "n_targets": 3, "seed": 1}}
TINY_MLP = {"name": "mlp", "arch": "MLP", "setups": ["MLP_E2E", "LH_Frozen", "FS-2"], "spec": {"layers": [16]},
            "pretrain": {"epochs": 4}}
TINY_GBDT = {"name": "gbdt", "arch": "GBDT", "setups": ["GBDT", "GBDT+stacking"], "params": {"n_estimators": 8}}


def write_config(path, **overrides):
    doc = {"data": TINY_DATA, "tasks": [0, 1], "n_samples": [10, 20], "seeds": [0, 1],
           "models": [TINY_MLP, TINY_GBDT], **overrides}
    path.write_text(json.dumps(doc))
    return str(path)


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


# ---- configuration ------------------------------------------------------------------


def test_includes_merge_and_resolve_relative_paths(tmp_path):
    shared = tmp_path / "shared"
    shared.mkdir()
    ds = generate(SyntheticSpec(rows=50, n_numerical=3, n_targets=2, seed=0)).dataset
    write_csv(ds, shared / "data.csv")
    ds.schema.save(shared / "schema.json")
    (shared / "base.json").write_text(json.dumps({"data": {"csv": "data.csv", "schema": "schema.json"},
                                                  "models": [TINY_GBDT], "seeds": [0, 1, 2]}))
    (tmp_path / "run.json").write_text(json.dumps({"include": "shared/base.json", "seeds": [5]}))
    cfg = load_config(tmp_path / "run.json")
    assert cfg.seeds == [5] and cfg.models[0].name == "gbdt"
    assert cfg.csv == str((shared / "data.csv").resolve())


def test_include_cycles_and_bad_documents_are_config_errors(tmp_path):
    (tmp_path / "a.json").write_text(json.dumps({"include": "b.json"}))
    (tmp_path / "b.json").write_text(json.dumps({"include": "a.json"}))
    with pytest.raises(ConfigError, match="cycle"):
        load_config(tmp_path / "a.json")
    with pytest.raises(ConfigError, match="unknown top-level"):
        parse_config({"data": TINY_DATA, "modles": []})
    with pytest.raises(ConfigError, match="FS setup needs"):
        parse_config({"data": TINY_DATA, "models": [{**TINY_MLP, "setups": ["FS"]}]})
    with pytest.raises(ConfigError, match="not found"):
        parse_config({"data": {"csv": str(tmp_path / "nope.csv"), "schema": "x"}})
    with pytest.raises(ConfigError, match="unique"):
        parse_config({"data": TINY_DATA, "models": [TINY_GBDT, TINY_GBDT]})


def test_hash_is_canonical_and_tracks_seed_offset():
    a = parse_config({"data": TINY_DATA, "seeds": [0, 1], "models": [TINY_GBDT]})
    b = parse_config({"models": [TINY_GBDT], "seeds": [0, 1], "data": TINY_DATA})
    assert a.hash == b.hash and re.fullmatch(r"[0-9a-f]{16}", a.hash)
    shifted = a.with_seed_offset(100)
    assert shifted.seeds == [100, 101] and shifted.hash != a.hash
    assert a.with_seed_offset(0) is a


def test_twelve_tasks_one_arm_five_seeds_expand_to_sixty_jobs():
    cfg = parse_config({"data": TINY_DATA, "n_samples": [10], "seeds": [0, 1, 2, 3, 4],
                        "models": [{**TINY_GBDT, "setups": ["GBDT"]}]})
    jobs = expand_jobs(cfg, range(12))
    assert len(jobs) == 60 and len({j.id for j in jobs}) == 60


# ---- run ----------------------------------------------------------------------------


def test_run_rows_for_twelve_tasks(tmp_path):
    data = {"synthetic": {"rows": 300, "n_numerical": 4, "n_targets": 12, "seed": 2}}
    config = write_config(tmp_path / "c.json", data=data, tasks=list(range(12)), n_samples=[10],
                          seeds=[0, 1, 2, 3, 4], models=[{**TINY_GBDT, "setups": ["GBDT"], "params": {"n_estimators": 2}}])
    assert main(["run", "--config", config, "--out", str(tmp_path / "out")]) == 0
    records = read_jsonl(tmp_path / "out" / "results.jsonl")
    assert len(records) == 60
    assert {r["task"] for r in records} == set(range(12)) and {r["seed"] for r in records} == set(range(5))


def test_interrupted_run_resumes_to_identical_results_and_reports(tmp_path):
    config = write_config(tmp_path / "c.json")
    full, part = tmp_path / "full", tmp_path / "part"
    assert main(["run", "--config", config, "--out", str(full)]) == 0
    assert main(["run", "--config", config, "--out", str(part), "--max-jobs", "11"]) == 0
    assert len(read_jsonl(part / "results.jsonl")) == 11
    assert main(["run", "--config", config, "--out", str(part), "--resume"]) == 0
    for out in (full, part):
        assert main(["report", "--out", str(out)]) == 0
    assert (full / "results.jsonl").read_bytes() == (part / "results.jsonl").read_bytes()
    assert tree_bytes(full / "report") == tree_bytes(part / "report")


def test_torn_final_line_is_dropped_on_resume(tmp_path):
    config = write_config(tmp_path / "c.json", models=[TINY_GBDT])
    out = tmp_path / "out"
    assert main(["run", "--config", config, "--out", str(out), "--max-jobs", "3"]) == 0
    with open(out / "results.jsonl", "a") as fh:
        fh.write('{"job": "gbdt/GB')
    assert main(["run", "--config", config, "--out", str(out), "--resume"]) == 0
    records = read_jsonl(out / "results.jsonl")
    assert len(records) == 16 and len({r["job"] for r in records}) == 16


def test_worker_pool_matches_serial_run(tmp_path):
    config = write_config(tmp_path / "c.json", tasks=[0], n_samples=[10])
    assert main(["run", "--config", config, "--out", str(tmp_path / "a")]) == 0
    assert main(["run", "--config", config, "--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    assert (tmp_path / "a" / "results.jsonl").read_bytes() == (tmp_path / "b" / "results.jsonl").read_bytes()


def test_empty_seed_grid_is_a_no_op(tmp_path):
    config = write_config(tmp_path / "c.json", seeds=[])
    out = tmp_path / "out"
    assert main(["run", "--config", config, "--out", str(out)]) == 0
    assert main(["run", "--config", config, "--out", str(out), "--resume"]) == 0
    assert read_jsonl(out / "results.jsonl") == []


def test_existing_out_dir_needs_resume_with_the_same_config(tmp_path):
    config = write_config(tmp_path / "c.json", models=[TINY_GBDT], tasks=[0], n_samples=[10], seeds=[0])
    other = write_config(tmp_path / "d.json", models=[TINY_GBDT], tasks=[0], n_samples=[10], seeds=[1])
    out = str(tmp_path / "out")
    assert main(["run", "--config", config, "--out", out]) == 0
    assert main(["run", "--config", config, "--out", out]) == 1
    assert main(["run", "--config", other, "--out", out, "--resume"]) == 1
    assert main(["run", "--config", config, "--out", out, "--resume", "--seed-offset", "3"]) == 1


def test_job_failures_are_recorded_and_exit_two(tmp_path):
    fs_model = {**TINY_MLP, "setups": ["FS"], "fs": {"spec": {"layers": [8]}, "epochs": {"10": 5}}}
    config = write_config(tmp_path / "c.json", models=[fs_model], tasks=[0])
    out = tmp_path / "out"
    assert main(["run", "--config", config, "--out", str(out)]) == 2
    assert {r["n_samples"] for r in read_jsonl(out / "results.jsonl")} == {10}
    failures = read_jsonl(out / "failures.jsonl")
    assert len(failures) == 2 and all("n=20" in f["error"] for f in failures)
    assert main(["report", "--out", str(out)]) == 0
    missing = read_csv(out / "report" / "missing.csv")
    assert missing[0] == ["job", "arm", "task", "n_samples", "seed", "reason"]
    assert {row[5] for row in missing[1:]} == {"failed"} and len(missing) == 3


def test_validation_errors_exit_one(tmp_path):
    off_grid = write_config(tmp_path / "c.json", n_samples=[7])
    assert main(["run", "--config", off_grid, "--out", str(tmp_path / "o")]) == 1
    assert main(["run", "--out", str(tmp_path / "o")]) == 1
    assert main(["no-such-command"]) == 1
    assert main(["run", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 1
    assert main(["report", "--out", str(tmp_path / "empty")]) == 1


def test_artifacts_carry_config_hash_and_seeds(tmp_path):
    config = write_config(tmp_path / "c.json", tasks=[0], n_samples=[10], seeds=[3])
    out = tmp_path / "out"
    assert main(["run", "--config", config, "--out", str(out)]) == 0
    assert main(["report", "--out", str(out)]) == 0
    digest = load_config(config).hash
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config_hash"] == digest and manifest["seeds"] == [3]
    assert all(r["config_hash"] == digest and r["seed"] == 3 for r in read_jsonl(out / "results.jsonl"))
    report = json.loads((out / "report" / "report.json").read_text())
    assert report["config_hash"] == digest and report["seeds"] == [3]
    from tabtransfer.pretrain import PretrainCheckpoint
    ckpt = PretrainCheckpoint.load(out / "checkpoints" / "mlp" / "task0.ckpt")
    assert ckpt.meta["config_hash"] == digest and ckpt.meta["seed"] == 0


def test_manifest_records_protocol_constants(tmp_path):
    config = write_config(tmp_path / "c.json", models=[{**TINY_MLP, "pretrain": {}}], seeds=[])
    out = tmp_path / "out"
    assert main(["run", "--config", config, "--out", str(out)]) == 0
    protocol = json.loads((out / "manifest.json").read_text())["protocol"]
    assert protocol["finetune_lr"] == 5e-5 and protocol["scratch_lr"] == 1e-4
    assert protocol["pretrain"]["mlp"]["epochs"] == 500 and protocol["pretrain"]["mlp"]["patience"] == 30
    assert protocol["epoch_policy"]["MLP_E2E/n10"] == {"kind": "fixed", "epochs": 30, "patience": None,
                                                       "val_fraction": 0.0}
    assert protocol["frozen_setups"] == ["LH_Frozen", "MLP_Frozen"]


# ---- reports ------------------------------------------------------------------------


def grid(arms, n_samples=(10,), seeds=(0, 1, 2), tasks=(0, 1)):
    return Grid(list(arms), list(tasks), list(n_samples), list(seeds), "h")


def records_for(values, n=10):
    """values[(task, arm)] -> per-seed AUCs."""
    out = []
    for (task, arm), aucs in values.items():
        model, setup = arm.split("/")
        out += [{"model": model, "setup": setup, "task": task, "n_samples": n, "seed": s, "test_auc": a,
                 "config_hash": "h", "target": f"t{task}", "n_positive": 5} for s, a in enumerate(aucs)]
    return out


def test_single_model_ranks_first_everywhere():
    report = build_report(records_for({(0, "m/A"): [0.5, 0.6, 0.7], (1, "m/A"): [0.9, 0.8, 0.7]}), grid(["m/A"]))
    assert report.mean_rank == {10: {"m/A": 1.0}}


def test_report_tables_follow_grid_order_and_cell_format(tmp_path):
    from tabtransfer.pipeline import write_report

    # four seeds each: the smallest exact one-sided p is 1/70, below alpha (three seeds give 1/20)
    values = {(t, arm): list(np.linspace(base, base + 0.03, 4)) for t in (0, 1)
              for arm, base in (("m/A", 0.8), ("m/B", 0.6))}
    recs = records_for(values, 20) + records_for(values, 4)
    manifest = {"config_hash": "h", "task_ids": [0, 1],
                "config": {"models": [{"name": "m", "setups": ["A", "B"]}], "n_samples": [20, 4], "seeds": [0, 1, 2, 3]}}
    report = build_report(recs, Grid.from_manifest(manifest))
    write_report(report, tmp_path)
    heat = read_csv(tmp_path / "heatmap.csv")
    assert heat[0] == ["n_samples", "m/A", "m/B"] and [row[0] for row in heat[1:]] == ["4", "20"]
    assert heat[1][1:] == ["1.0000", "2.0000"]
    table = read_csv(tmp_path / "auc_n20.csv")
    assert table[1][:3] == ["0", "t0", "0.815±0.006"]
    assert all(re.fullmatch(r"\d\.\d{3}±\d\.\d{3}", c) for row in table[1:] for c in row[2:])
    assert read_csv(tmp_path / "rank_stderr.csv")[1][1:] == ["0.0000", "0.0000"]


def test_missing_seeds_are_listed_and_ranking_uses_shared_seeds(tmp_path):
    values = {(0, "m/A"): [0.8, 0.81, 0.82], (0, "m/B"): [0.6, 0.61], (1, "m/A"): [0.7] * 3, (1, "m/B"): [0.7] * 3}
    report = build_report(records_for(values), grid(["m/A", "m/B"]))
    assert [(m["arm"], m["task"], m["seed"]) for m in report.missing] == [("m/B", 0, 2)]
    assert report.ranked_tasks == {10: [0, 1]}
    gap = build_report(records_for({(0, "m/A"): [0.8] * 3, (1, "m/A"): [0.8] * 3, (1, "m/B"): [0.8] * 3}),
                       grid(["m/A", "m/B"]))
    assert gap.ranked_tasks == {10: [1]} and len(gap.missing) == 3


def test_regenerating_reports_leaves_results_untouched(tmp_path):
    config = write_config(tmp_path / "c.json", models=[TINY_GBDT], tasks=[0], seeds=[0, 1])
    out = tmp_path / "out"
    assert main(["run", "--config", config, "--out", str(out)]) == 0
    before = (out / "results.jsonl").read_bytes()
    assert main(["report", "--out", str(out)]) == 0
    first = tree_bytes(out / "report")
    shutil.rmtree(out / "report")
    assert main(["report", "--out", str(out)]) == 0
    assert tree_bytes(out / "report") == first and (out / "results.jsonl").read_bytes() == before


# ---- other commands -----------------------------------------------------------------


def test_generate_synthetic_is_byte_identical_for_a_seed(tmp_path):
    args = ["generate-synthetic", "--rows", "200", "--seed", "9"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")
    assert main(["generate-synthetic", "--rows", "200", "--seed", "10", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "a" / "data.csv").read_bytes() != (tmp_path / "c" / "data.csv").read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["seed"] == 9 and manifest["config_hash"]


def test_generated_files_feed_a_csv_run(tmp_path):
    assert main(["generate-synthetic", "--rows", "300", "--seed", "4", "--out", str(tmp_path / "data")]) == 0
    (tmp_path / "c.json").write_text(json.dumps({"data": {"csv": "data/data.csv", "schema": "data/schema.json"},
                                                 "tasks": [0], "n_samples": [10], "seeds": [0],
                                                 "models": [TINY_GBDT]}))
    assert main(["ingest", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "out")]) == 0
    summary = json.loads((tmp_path / "out" / "ingest" / "summary.json").read_text())
    assert summary["rows"] == 300 and set(summary["split_sizes"]) == {"train", "val", "test"}
    splits = json.loads((tmp_path / "out" / "ingest" / "splits.json").read_text())
    assert sorted(splits["train"] + splits["val"] + splits["test"]) == list(range(300))
    assert main(["run", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "out")]) == 0
    assert len(read_jsonl(tmp_path / "out" / "results.jsonl")) == 2


def test_pretrain_command_writes_reusable_checkpoints(tmp_path):
    config = write_config(tmp_path / "c.json", tasks=[0], n_samples=[10], seeds=[0])
    out = tmp_path / "out"
    assert main(["pretrain", "--config", config, "--out", str(out)]) == 0
    ckpt = out / "checkpoints" / "mlp" / "task0.ckpt"
    stamp = ckpt.stat().st_mtime_ns
    assert main(["run", "--config", config, "--out", str(out), "--resume"]) == 0
    assert ckpt.stat().st_mtime_ns == stamp
    assert json.loads((out / "pretrain.json").read_text())[0]["model"] == "mlp"


def test_pseudofeature_command_emits_three_rank_columns(tmp_path):
    config = write_config(tmp_path / "c.json", seeds=[0, 1], pseudofeature={
        "direction": "UpstreamMissing", "model": "mlp", "setup": "MLP_E2E", "k": 2, "n_samples": [20]})
    out = tmp_path / "out"
    assert main(["pseudofeature", "--config", config, "--out", str(out)]) == 0
    ranks = read_csv(out / "pseudofeature" / "ranks.csv")
    assert ranks[0] == ["n_samples", "missing", "pseudo", "true"] and len(ranks) == 2
    manifest = json.loads((out / "pseudofeature" / "manifest.json").read_text())
    assert len(manifest["features"]) == 2 and manifest["direction"] == "UpstreamMissing"
    alignment = json.loads((out / "pseudofeature" / "alignments" / "n20_seed0" / "alignment.json").read_text())
    assert alignment["features"] == manifest["features"]
    assert len(read_jsonl(out / "pseudofeature" / "results.jsonl")) == 6
    assert main(["pseudofeature", "--config", config, "--out", str(out)]) == 1


def test_hpo_command_emits_an_includable_fragment(tmp_path):
    config = write_config(tmp_path / "c.json", hpo={"family": "MLP", "protocol": "BaselineSubsample", "budget": 2,
                                                    "n_samples": 10, "max_epochs": 3})
    out = tmp_path / "out"
    assert main(["hpo", "--config", config, "--out", str(out)]) == 0
    best = json.loads((out / "hpo" / "best.json").read_text())
    assert len(read_jsonl(out / "hpo" / "trials.jsonl")) == 2
    model = {"name": "tuned", "arch": "MLP", "setups": ["FS"], **best["fragment"]}
    cfg = parse_config({"data": TINY_DATA, "models": [model]})
    assert cfg.models[0].fs_epoch(10) == best["best_epoch"]


def test_self_supervised_checkpoint_is_shared_across_tasks(tmp_path):
    ssl = {**TINY_MLP, "name": "ssl", "setups": ["LH_E2E"], "pretrain": {"strategy": "Contrastive", "epochs": 2}}
    config = write_config(tmp_path / "c.json", models=[TINY_MLP, ssl], n_samples=[10], seeds=[0])
    out = tmp_path / "out"
    assert main(["run", "--config", config, "--out", str(out), "--workers", "2"]) == 0
    assert sorted(p.name for p in (out / "checkpoints" / "ssl").iterdir()) == ["shared.ckpt"]
    assert sorted(p.name for p in (out / "checkpoints" / "mlp").iterdir()) == ["task0.ckpt", "task1.ckpt"]
    # the premise: every task's upstream training view has identical features
    from tabtransfer.pipeline import Workspace
    ws = Workspace(load_config(config), tmp_path / "scratch")
    a, b = ws.task(0).upstream_train, ws.task(1).upstream_train
    assert a.schema.fingerprint() == b.schema.fingerprint()
    np.testing.assert_array_equal(a.X_num, b.X_num)
    np.testing.assert_array_equal(a.X_cat, b.X_cat)
