"""The transferable artifact: extractor weights plus provenance."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..models import FeatureExtractor, InputLayout, ModelSpec, build_extractor, spec_from_dict, spec_to_dict
from ..tensor.checkpoint import CheckpointError, load_arrays, save_arrays

_EXTRACTOR = "extractor/"
_HEAD = "head/"


@dataclass
class PretrainCheckpoint:
    spec: ModelSpec
    layout: InputLayout
    strategy: str
    extractor_state: dict
    head_state: dict = field(default_factory=dict)
    best_metric: Optional[float] = None
    best_epoch: int = 0
    epochs_run: int = 0
    target_names: tuple = ()
    meta: dict = field(default_factory=dict)

    @property
    def fingerprint(self) -> str:
        return self.layout.fingerprint

    def build_extractor(self, rng: Optional[np.random.Generator] = None) -> FeatureExtractor:
        """A fresh extractor carrying the checkpoint weights; ``rng`` drives dropout."""
        rng = rng if rng is not None else np.random.default_rng(0)
        ex = build_extractor(self.spec, self.layout, rng)
        ex.load_state_dict(self.extractor_state)
        return ex

    def save(self, path) -> None:
        arrays = {_EXTRACTOR + k: v for k, v in sorted(self.extractor_state.items())}
        arrays.update({_HEAD + k: v for k, v in sorted(self.head_state.items())})
        meta = {
            "spec": spec_to_dict(self.spec),
            "layout": {"n_numerical": self.layout.n_numerical, "cardinalities": list(self.layout.cardinalities),
                       "fingerprint": self.layout.fingerprint},
            "strategy": self.strategy,
            "best_metric": self.best_metric,
            "best_epoch": self.best_epoch,
            "epochs_run": self.epochs_run,
            "target_names": list(self.target_names),
            "extra": self.meta,
        }
        save_arrays(path, arrays, meta)

    @classmethod
    def load(cls, path) -> "PretrainCheckpoint":
        arrays, meta = load_arrays(path)
        try:
            lay = meta["layout"]
            layout = InputLayout(int(lay["n_numerical"]), tuple(int(c) for c in lay["cardinalities"]), lay["fingerprint"])
            spec = spec_from_dict(meta["spec"])
        except KeyError as exc:
            raise CheckpointError(f"{path}: not a pre-training checkpoint (missing {exc})") from None
        ex = {k[len(_EXTRACTOR):]: v for k, v in arrays.items() if k.startswith(_EXTRACTOR)}
        head = {k[len(_HEAD):]: v for k, v in arrays.items() if k.startswith(_HEAD)}
        return cls(spec, layout, meta["strategy"], ex, head, meta.get("best_metric"), int(meta.get("best_epoch", 0)),
                   int(meta.get("epochs_run", 0)), tuple(meta.get("target_names", ())), meta.get("extra", {}))
