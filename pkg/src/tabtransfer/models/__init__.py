from .extractors import (
    FeatureExtractor,
    FeatureTokenizer,
    FingerprintMismatch,
    FTTransformerExtractor,
    InputLayout,
    MLPExtractor,
    ResNetExtractor,
    build_extractor,
)
from .heads import HEAD_KINDS, LINEAR, MLP_HEAD, Head, TabularModel, attach_head
from .spec import (
    ARCHS,
    FT_TRANSFORMER,
    MLP,
    RESNET,
    FTTransformerSpec,
    MLPSpec,
    ModelSpec,
    ResNetSpec,
    default_spec,
    spec_from_dict,
    spec_to_dict,
)

__all__ = [
    "ARCHS",
    "FT_TRANSFORMER",
    "FTTransformerExtractor",
    "FTTransformerSpec",
    "FeatureExtractor",
    "FeatureTokenizer",
    "FingerprintMismatch",
    "HEAD_KINDS",
    "Head",
    "InputLayout",
    "LINEAR",
    "MLP",
    "MLPExtractor",
    "MLPSpec",
    "MLP_HEAD",
    "ModelSpec",
    "RESNET",
    "ResNetExtractor",
    "ResNetSpec",
    "TabularModel",
    "attach_head",
    "build_extractor",
    "default_spec",
    "spec_from_dict",
    "spec_to_dict",
]
