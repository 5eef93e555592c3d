"""Upstream-fit preprocessing: quantile-to-normal transform and imputation."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .dataset import MISSING_CODE, Dataset

CDF_CLIP = 1e-7
MAX_QUANTILES = 1000

# Acklam's rational approximation to the standard-normal quantile function
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def norm_ppf(p) -> np.ndarray:
    """Inverse standard-normal CDF for ``p`` in (0, 1); |error| < 1.2e-9."""
    p = np.asarray(p, dtype=np.float64)
    out = np.empty_like(p)
    lo = p < _P_LOW
    hi = p > 1 - _P_LOW
    mid = ~(lo | hi)
    if mid.any():
        q = p[mid] - 0.5
        r = q * q
        num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1
        out[mid] = num / den
    for mask, sign, base in ((lo, 1.0, p), (hi, -1.0, 1 - p)):
        if mask.any():
            q = np.sqrt(-2 * np.log(base[mask]))
            num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
            den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1
            out[mask] = sign * num / den
    return out


@dataclass(frozen=True)
class QuantileTransform:
    """Per-column map value -> empirical CDF -> standard normal.

    ``references`` is ``(n_quantiles, n_columns)``; column ``j`` holds the
    empirical quantiles of the fitting data at ``levels``.
    """

    levels: np.ndarray
    references: np.ndarray
    source: str = "upstream"

    @classmethod
    def fit(cls, X_num: np.ndarray, n_quantiles: int | None = None) -> "QuantileTransform":
        n_rows, n_cols = X_num.shape
        if n_quantiles is None:
            n_quantiles = min(MAX_QUANTILES, n_rows)
        n_quantiles = max(int(n_quantiles), 2)
        levels = np.linspace(0.0, 1.0, n_quantiles)
        refs = np.empty((n_quantiles, n_cols))
        for j in range(n_cols):
            col = X_num[:, j]
            col = col[~np.isnan(col)]
            if col.size == 0:
                raise ValueError(f"quantile transform: column {j} is entirely missing")
            refs[:, j] = np.quantile(col, levels)
        # np.quantile can wobble by an ulp; the references must be monotone
        refs = np.maximum.accumulate(refs, axis=0)
        return cls(levels, refs)

    def cdf(self, X_num: np.ndarray) -> np.ndarray:
        out = np.full(X_num.shape, np.nan)
        for j in range(X_num.shape[1]):
            x = X_num[:, j]
            ok = ~np.isnan(x)
            ref = self.references[:, j]
            # averaging forward and reversed interpolation splits ties evenly
            fwd = np.interp(x[ok], ref, self.levels)
            bwd = -np.interp(-x[ok], -ref[::-1], -self.levels[::-1])
            out[ok, j] = 0.5 * (fwd + bwd)
        return out

    def transform(self, X_num: np.ndarray) -> np.ndarray:
        if X_num.shape[1] != self.references.shape[1]:
            raise ValueError(f"quantile transform fit on {self.references.shape[1]} columns, got {X_num.shape[1]}")
        u = self.cdf(X_num)
        ok = ~np.isnan(u)
        out = np.full(u.shape, np.nan)
        out[ok] = norm_ppf(np.clip(u[ok], CDF_CLIP, 1 - CDF_CLIP))
        return out

    def to_dict(self) -> dict:
        return {"source": self.source, "levels": self.levels.tolist(), "references": self.references.T.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "QuantileTransform":
        return cls(np.array(d["levels"]), np.array(d["references"]).T.reshape(len(d["levels"]), -1), d.get("source", "upstream"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "QuantileTransform":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_quantile_transform(upstream: Dataset, n_quantiles: int | None = None) -> QuantileTransform:
    return QuantileTransform.fit(upstream.X_num, n_quantiles)


@dataclass(frozen=True)
class ImputeStats:
    numerical_means: np.ndarray
    missing_codes: np.ndarray  # per categorical column: the reserved missing index

    @classmethod
    def fit(cls, upstream: Dataset) -> "ImputeStats":
        X = upstream.X_num
        means = np.zeros(X.shape[1])
        for j in range(X.shape[1]):
            col = X[:, j][~np.isnan(X[:, j])]
            means[j] = col.mean() if col.size else 0.0
        codes = np.array([c.category_count for c in upstream.schema.categorical], dtype=np.int64)
        return cls(means, codes)

    def to_dict(self) -> dict:
        return {"numerical_means": self.numerical_means.tolist(), "missing_codes": self.missing_codes.tolist()}


def impute(dataset: Dataset, stats: ImputeStats) -> Dataset:
    """Fill numerical NaNs with upstream means and map missing categorical
    codes to the reserved extra category."""
    X_num = dataset.X_num
    if np.isnan(X_num).any():
        X_num = np.where(np.isnan(X_num), stats.numerical_means[None, :], X_num)
    X_cat = dataset.X_cat
    if (X_cat == MISSING_CODE).any():
        X_cat = np.where(X_cat == MISSING_CODE, stats.missing_codes[None, :], X_cat)
    return replace(dataset, X_num=X_num, X_cat=X_cat)


@dataclass(frozen=True)
class Preprocessor:
    """Upstream-fitted pipeline. ``neural`` yields quantile-normalized,
    imputed features; ``raw`` yields imputed original-scale features (for
    tree models)."""

    quantile: QuantileTransform
    neural_stats: ImputeStats
    raw_stats: ImputeStats

    @classmethod
    def fit(cls, upstream_train: Dataset, n_quantiles: int | None = None) -> "Preprocessor":
        qt = fit_quantile_transform(upstream_train, n_quantiles)
        transformed = replace(upstream_train, X_num=qt.transform(upstream_train.X_num))
        return cls(qt, ImputeStats.fit(transformed), ImputeStats.fit(upstream_train))

    def neural(self, ds: Dataset) -> Dataset:
        return impute(replace(ds, X_num=self.quantile.transform(ds.X_num)), self.neural_stats)

    def raw(self, ds: Dataset) -> Dataset:
        return impute(ds, self.raw_stats)
