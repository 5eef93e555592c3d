"""Transfer learning for deep tabular models, on a numpy autodiff core."""

__version__ = "0.1.0"
