from .csvio import CsvFormatError, infer_schema, load_csv, write_csv
from .dataset import CATEGORICAL, MISSING_CODE, NUMERICAL, Column, Dataset, Schema, SchemaError
from .preprocess import ImputeStats, Preprocessor, QuantileTransform, fit_quantile_transform, impute, norm_ppf
from .splits import DEFAULT_FRACTIONS, DOWNSTREAM_SIZES, SplitPlan, make_splits, make_task_split, sample_downstream
from .synthetic import SyntheticSpec, generate, generate_files

__all__ = [
    "CATEGORICAL", "MISSING_CODE", "NUMERICAL", "Column", "CsvFormatError", "DEFAULT_FRACTIONS",
    "DOWNSTREAM_SIZES", "Dataset", "ImputeStats", "Preprocessor", "QuantileTransform", "Schema",
    "SchemaError", "SplitPlan", "SyntheticSpec", "fit_quantile_transform", "generate", "generate_files",
    "impute", "infer_schema", "load_csv", "make_splits", "make_task_split", "norm_ppf",
    "sample_downstream", "write_csv",
]
