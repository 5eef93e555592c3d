"""Experiment configuration: JSON documents with includes, validated into dataclasses."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

from ..data.splits import DEFAULT_FRACTIONS
from ..data.synthetic import SyntheticSpec
from ..gbdt.params import GbdtParams
from ..hpo.protocols import PROTOCOLS
from ..hpo.space import GBDT
from ..models.spec import ARCHS, ModelSpec, default_spec, spec_from_dict, spec_to_dict
from ..pretrain.config import PretrainConfig
from ..pseudofeature.align import DIRECTIONS
from ..transfer.plan import FS, FS2, TRANSFER_SETUPS

INCLUDE_KEY = "include"
GBDT_PLAIN = "GBDT"
GBDT_STACKING = "GBDT+stacking"
GBDT_SETUPS = (GBDT_PLAIN, GBDT_STACKING)
NEURAL_SETUPS = TRANSFER_SETUPS + (FS, FS2)


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 1)."""


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_document(path, _seen: tuple = ()) -> dict:
    """Read a JSON object, resolving ``include`` (a path or list of paths,
    relative to the including file). Included documents merge first; the
    including document's keys win."""
    path = Path(path).resolve()
    if path in _seen:
        raise ConfigError(f"include cycle through {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    includes = doc.pop(INCLUDE_KEY, [])
    includes = [includes] if isinstance(includes, str) else includes
    merged: dict = {}
    for inc in includes:
        merged = deep_merge(merged, load_document(path.parent / inc, _seen + (path,)))
    merged = deep_merge(merged, doc)
    # paths inside the document are relative to the file that names them
    for key in ("csv", "schema"):
        if isinstance(doc.get("data"), dict) and key in doc["data"]:
            merged["data"][key] = str((path.parent / doc["data"][key]).resolve())
    return merged


def config_hash(document: dict) -> str:
    return hashlib.sha256(json.dumps(document, sort_keys=True, separators=(",", ":")).encode()).hexdigest()[:16]


@dataclass
class ModelEntry:
    """One model family in the experiment matrix.

    Neural entries carry an architecture spec, a pre-training config and the
    setups to run; ``fs`` supplies the tuned spec and epochs for the ``FS``
    baseline. GBDT entries carry boosting parameters.
    """

    name: str
    arch: str
    setups: list
    spec: Optional[ModelSpec] = None
    pretrain: Optional[PretrainConfig] = None
    params: Optional[GbdtParams] = None
    fs_spec: Optional[ModelSpec] = None
    fs_epochs: dict = field(default_factory=dict)

    @property
    def is_gbdt(self) -> bool:
        return self.arch == GBDT

    def fs_epoch(self, n: int) -> int:
        epoch = self.fs_epochs.get(str(n), self.fs_epochs.get("default"))
        if epoch is None:
            raise ConfigError(f"model {self.name!r}: FS needs a tuned epoch for n={n}")
        return int(epoch)

    def to_dict(self) -> dict:
        d = {"name": self.name, "arch": self.arch, "setups": list(self.setups)}
        if self.spec is not None:
            d["spec"] = spec_to_dict(self.spec)
        if self.pretrain is not None:
            d["pretrain"] = self.pretrain.to_dict()
        if self.params is not None:
            d["params"] = self.params.to_dict()
        if self.fs_spec is not None:
            d["fs"] = {"spec": spec_to_dict(self.fs_spec), "epochs": dict(self.fs_epochs)}
        return d


@dataclass
class PseudoFeatureEntry:
    direction: str
    model: str
    setup: str
    features: list = field(default_factory=list)
    k: Optional[int] = None
    task: int = 0
    n_samples: list = field(default_factory=lambda: [200])


@dataclass
class HpoEntry:
    family: str
    protocol: str
    budget: int = 50
    n_samples: Optional[int] = None
    task: int = 0
    seed: int = 0
    max_epochs: int = 200
    pretrain: Optional[PretrainConfig] = None


@dataclass
class ExperimentConfig:
    document: dict
    hash: str
    synthetic: Optional[SyntheticSpec]
    csv: Optional[str]
    schema: Optional[str]
    fractions: tuple
    split_seed: int
    tasks: Optional[list]
    n_samples: list
    seeds: list
    pretrain_seed: int
    models: list
    pseudofeature: Optional[PseudoFeatureEntry] = None
    hpo: Optional[HpoEntry] = None

    def model(self, name: str) -> ModelEntry:
        for m in self.models:
            if m.name == name:
                return m
        raise ConfigError(f"unknown model {name!r}")

    def with_seed_offset(self, offset: int) -> "ExperimentConfig":
        """Shift every seed; the offset becomes part of the document and so of the hash."""
        if not offset:
            return self
        return _build(deep_merge(self.document, {"seed_offset": int(self.document.get("seed_offset", 0)) + offset}))


def _known(cls, d: dict, where: str) -> dict:
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    return d


def _pretrain(d: Optional[dict], where: str) -> PretrainConfig:
    try:
        return PretrainConfig(**_known(PretrainConfig, d or {}, where))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _spec(arch: str, d: Optional[dict], where: str) -> ModelSpec:
    try:
        base = spec_to_dict(default_spec(arch))
        return spec_from_dict({**base, **(d or {}), "arch": arch})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _model(d: dict, i: int) -> ModelEntry:
    where = f"models[{i}]"
    if not isinstance(d, dict) or "name" not in d or "arch" not in d:
        raise ConfigError(f"{where}: needs 'name' and 'arch'")
    unknown = set(d) - {"name", "arch", "setups", "spec", "pretrain", "params", "fs"}
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    arch = d["arch"]
    if arch == GBDT:
        setups = d.get("setups", [GBDT_PLAIN])
        bad = [s for s in setups if s not in GBDT_SETUPS]
        if bad or not setups:
            raise ConfigError(f"{where}: GBDT setups must be drawn from {GBDT_SETUPS}, got {setups}")
        try:
            params = GbdtParams.from_dict(d.get("params", {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: {exc}") from None
        return ModelEntry(d["name"], arch, list(setups), params=params)
    if arch not in ARCHS:
        raise ConfigError(f"{where}: unknown arch {arch!r}; expected one of {ARCHS + (GBDT,)}")
    setups = d.get("setups", ["MLP_E2E"])
    bad = [s for s in setups if s not in NEURAL_SETUPS]
    if bad or not setups:
        raise ConfigError(f"{where}: setups must be drawn from {NEURAL_SETUPS}, got {setups}")
    entry = ModelEntry(d["name"], arch, list(setups), spec=_spec(arch, d.get("spec"), where),
                       pretrain=_pretrain(d.get("pretrain"), f"{where}.pretrain"))
    if FS in setups:
        fs = d.get("fs")
        if not isinstance(fs, dict) or "epochs" not in fs:
            raise ConfigError(f"{where}: the FS setup needs 'fs': {{'spec': ..., 'epochs': ...}} from tuning")
        entry.fs_spec = _spec(arch, fs.get("spec"), f"{where}.fs")
        epochs = fs["epochs"]
        entry.fs_epochs = {"default": int(epochs)} if isinstance(epochs, int) else {str(k): int(v) for k, v in epochs.items()}
    return entry


def _ints(value, where: str, allow_empty: bool = False) -> list:
    if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        raise ConfigError(f"{where} must be a list of integers")
    if not value and not allow_empty:
        raise ConfigError(f"{where} must not be empty")
    return list(value)


def _build(doc: dict) -> ExperimentConfig:
    known = {"data", "split", "tasks", "n_samples", "seeds", "pretrain_seed", "models", "pseudofeature", "hpo",
             "seed_offset", "description"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    data = doc.get("data")
    if not isinstance(data, dict):
        raise ConfigError("'data' must name a 'synthetic' spec or a 'csv' file")
    synthetic = csv = schema = None
    if "synthetic" in data:
        try:
            synthetic = SyntheticSpec(**_known(SyntheticSpec, data["synthetic"] or {}, "data.synthetic"))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"data.synthetic: {exc}") from None
    elif "csv" in data:
        csv, schema = data["csv"], data.get("schema")
        if not Path(csv).is_file():
            raise ConfigError(f"data file not found: {csv}")
        if schema is None or not Path(schema).is_file():
            raise ConfigError(f"schema file not found: {schema}")
    else:
        raise ConfigError("'data' must name a 'synthetic' spec or a 'csv' file")

    split = doc.get("split", {})
    fractions = tuple(split.get("fractions", DEFAULT_FRACTIONS))
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise ConfigError("split.fractions must be three non-negative numbers summing to 1")
    tasks = _ints(doc["tasks"], "tasks") if "tasks" in doc else None
    n_samples = _ints(doc.get("n_samples", [10]), "n_samples")
    if min(n_samples) < 1:
        raise ConfigError("n_samples entries must be positive")
    offset = doc.get("seed_offset", 0)
    if not isinstance(offset, int):
        raise ConfigError("seed_offset must be an integer")
    seeds = [s + offset for s in _ints(doc.get("seeds", [0]), "seeds", allow_empty=True)]
    models = [_model(m, i) for i, m in enumerate(doc.get("models", []))]
    names = [m.name for m in models]
    if len(set(names)) != len(names):
        raise ConfigError("model names must be unique")

    cfg = ExperimentConfig(doc, config_hash(doc), synthetic, csv, schema, fractions, int(split.get("seed", 0)),
                           tasks, n_samples, seeds, int(doc.get("pretrain_seed", 0)), models)
    if "pseudofeature" in doc:
        cfg.pseudofeature = _pseudofeature(doc["pseudofeature"], cfg)
    if "hpo" in doc:
        cfg.hpo = _hpo(doc["hpo"])
    return cfg


def _pseudofeature(d: dict, cfg: ExperimentConfig) -> PseudoFeatureEntry:
    try:
        entry = PseudoFeatureEntry(**_known(PseudoFeatureEntry, d, "pseudofeature"))
    except TypeError as exc:
        raise ConfigError(f"pseudofeature: {exc}") from None
    if entry.direction not in DIRECTIONS:
        raise ConfigError(f"pseudofeature.direction must be one of {DIRECTIONS}")
    if bool(entry.features) == (entry.k is not None):
        raise ConfigError("pseudofeature needs exactly one of 'features' or 'k'")
    model = cfg.model(entry.model)
    if model.is_gbdt or entry.setup not in TRANSFER_SETUPS:
        raise ConfigError("pseudofeature needs a neural model and a transfer setup")
    _ints(entry.n_samples, "pseudofeature.n_samples")
    return entry


def _hpo(d: dict) -> HpoEntry:
    d = dict(d)
    pre = d.pop("pretrain", None)
    try:
        entry = HpoEntry(**_known(HpoEntry, d, "hpo"))
    except TypeError as exc:
        raise ConfigError(f"hpo: {exc}") from None
    if entry.family not in ARCHS + (GBDT,):
        raise ConfigError(f"hpo.family must be one of {ARCHS + (GBDT,)}")
    if entry.protocol not in PROTOCOLS:
        raise ConfigError(f"hpo.protocol must be one of {PROTOCOLS}")
    if entry.budget < 1:
        raise ConfigError("hpo.budget must be at least 1")
    entry.pretrain = _pretrain(pre, "hpo.pretrain")
    return entry


def parse_config(document: dict) -> ExperimentConfig:
    return _build(copy.deepcopy(document))


def load_config(path) -> ExperimentConfig:
    return parse_config(load_document(path))


def resolved(cfg: ExperimentConfig) -> dict[str, Any]:
    """The fully defaulted configuration, as recorded in run manifests."""
    out = {
        "config_hash": cfg.hash,
        "data": {"synthetic": asdict(cfg.synthetic)} if cfg.synthetic else {"csv": cfg.csv, "schema": cfg.schema},
        "split": {"fractions": list(cfg.fractions), "seed": cfg.split_seed},
        "tasks": cfg.tasks,
        "n_samples": cfg.n_samples,
        "seeds": cfg.seeds,
        "pretrain_seed": cfg.pretrain_seed,
        "models": [m.to_dict() for m in cfg.models],
    }
    if cfg.pseudofeature is not None:
        out["pseudofeature"] = asdict(cfg.pseudofeature)
    if cfg.hpo is not None:
        out["hpo"] = asdict(cfg.hpo)
    return out
