from .config import (
    GBDT_PLAIN,
    GBDT_STACKING,
    ConfigError,
    ExperimentConfig,
    ModelEntry,
    config_hash,
    load_config,
    load_document,
    parse_config,
    resolved,
)
from .ingest import generate_synthetic, ingest
from .pseudo import ARMS as PSEUDO_ARMS, run_pseudofeature
from .reports import Grid, Report, build_report, report_run, write_report
from .runner import FAILURES, MANIFEST, RESULTS, Job, RunSummary, expand_jobs, pretrain_all, protocol_manifest, run_matrix
from .tuning import run_hpo
from .workspace import Workspace, read_jsonl

__all__ = [
    "ConfigError", "ExperimentConfig", "FAILURES", "GBDT_PLAIN", "GBDT_STACKING", "Grid", "Job", "MANIFEST",
    "ModelEntry", "PSEUDO_ARMS", "RESULTS", "Report", "RunSummary", "Workspace", "build_report", "config_hash",
    "expand_jobs", "generate_synthetic", "ingest", "load_config", "load_document", "parse_config", "pretrain_all",
    "protocol_manifest", "read_jsonl", "report_run", "resolved", "run_hpo", "run_matrix", "run_pseudofeature",
    "write_report",
]
