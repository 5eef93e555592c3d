"""Newton-boosted regression trees for the binary logistic objective, exact greedy splits."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .params import GbdtParams

LEAF = -1
_GAIN_EPS = 1e-12


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _shrink(G, alpha: float):
    """L1 soft-threshold of a gradient sum."""
    if alpha == 0.0:
        return G
    return np.sign(G) * np.maximum(np.abs(G) - alpha, 0.0)


def leaf_score(G, H, reg_lambda: float, reg_alpha: float = 0.0):
    """Structure score of a leaf: the loss reduction of its optimal weight, doubled."""
    T = _shrink(G, reg_alpha)
    return T * T / (H + reg_lambda)


def leaf_weight(G: float, H: float, reg_lambda: float, reg_alpha: float = 0.0) -> float:
    return float(-_shrink(G, reg_alpha) / (H + reg_lambda))


def split_gain(GL, HL, GR, HR, reg_lambda: float, reg_alpha: float = 0.0, gamma: float = 0.0):
    return 0.5 * (leaf_score(GL, HL, reg_lambda, reg_alpha) + leaf_score(GR, HR, reg_lambda, reg_alpha)
                  - leaf_score(GL + GR, HL + HR, reg_lambda, reg_alpha)) - gamma


@dataclass
class Split:
    feature: int
    gain: float
    threshold: float = np.nan                  # numerical: rows with x < threshold go left
    left_categories: tuple[int, ...] = ()      # categorical: rows whose code is listed go left

    @property
    def categorical(self) -> bool:
        return bool(self.left_categories)


def _best_numerical(X: np.ndarray, g: np.ndarray, h: np.ndarray, order: np.ndarray, features: np.ndarray,
                    p: GbdtParams) -> list[Optional[Split]]:
    """Best threshold per feature, vectorized over the candidate features.

    ``order[:, c]`` lists the node's rows sorted by feature ``features[c]``.
    """
    if features.size == 0:
        return []
    Vs = X[order, features[None, :]]
    GL = np.cumsum(g[order], axis=0)[:-1]
    HL = np.cumsum(h[order], axis=0)[:-1]
    G, H = g[order[:, 0]].sum(), h[order[:, 0]].sum()
    GR, HR = G - GL, H - HL
    # the parent score and gamma are constant per node, so rank by the children's scores
    score = leaf_score(GL, HL, p.reg_lambda, p.reg_alpha)
    score += leaf_score(GR, HR, p.reg_lambda, p.reg_alpha)
    ok = (Vs[:-1] < Vs[1:]) & (HL >= p.min_child_weight) & (HR >= p.min_child_weight)
    score[~ok] = -np.inf
    if score.shape[0] == 0:
        return [None] * features.size
    pos = np.argmax(score, axis=0)
    parent = leaf_score(G, H, p.reg_lambda, p.reg_alpha)
    out: list[Optional[Split]] = []
    for col, j in enumerate(features.tolist()):
        best = score[pos[col], col]
        if not np.isfinite(best):
            out.append(None)
            continue
        gain = 0.5 * (best - parent) - p.gamma
        lo, hi = Vs[pos[col], col], Vs[pos[col] + 1, col]
        threshold = 0.5 * (lo + hi)
        if not threshold > lo:   # adjacent floats: the midpoint rounds down
            threshold = hi
        out.append(Split(j, float(gain), threshold=float(threshold)))
    return out


def category_order(codes: np.ndarray, g: np.ndarray, h: np.ndarray, reg_lambda: float) -> np.ndarray:
    """Present categories sorted by their optimal leaf weight -G/(H+lambda), ties by code."""
    present = np.unique(codes)
    G = np.array([g[codes == c].sum() for c in present])
    H = np.array([h[codes == c].sum() for c in present])
    weight = -G / (H + reg_lambda)
    return present[np.lexsort((present, weight))]


def _best_categorical(codes: np.ndarray, g: np.ndarray, h: np.ndarray, feature: int, p: GbdtParams) -> Optional[Split]:
    """Best prefix of the categories ordered by leaf weight: the optimal binary partition for a
    second-order objective without the L1 term."""
    codes = codes.astype(np.int64)
    order = category_order(codes, g, h, p.reg_lambda)
    if order.size < 2:
        return None
    Gc = np.array([g[codes == c].sum() for c in order])
    Hc = np.array([h[codes == c].sum() for c in order])
    GL, HL = np.cumsum(Gc)[:-1], np.cumsum(Hc)[:-1]
    GR, HR = Gc.sum() - GL, Hc.sum() - HL
    gains = split_gain(GL, HL, GR, HR, p.reg_lambda, p.reg_alpha, p.gamma)
    gains = np.where((HL >= p.min_child_weight) & (HR >= p.min_child_weight), gains, -np.inf)
    k = int(np.argmax(gains))
    if not np.isfinite(gains[k]):
        return None
    return Split(feature, float(gains[k]), left_categories=tuple(sorted(order[:k + 1].tolist())))


def find_best_split(X: np.ndarray, g: np.ndarray, h: np.ndarray, features: Sequence[int], categorical: frozenset,
                    params: GbdtParams) -> Optional[Split]:
    """Highest-gain split over ``features``; on equal gain the lowest feature index wins.

    Returns ``None`` when no split has positive gain.
    """
    features = sorted(int(j) for j in features)
    num = np.array([j for j in features if j not in categorical], dtype=np.int64)
    order = np.argsort(X[:, num], axis=0, kind="stable") if num.size else np.zeros((X.shape[0], 0), np.int64)
    return _select(X, g, h, np.arange(X.shape[0]), order, num, features, categorical, params)


def _select(X, g, h, rows, order, num, features, categorical, params) -> Optional[Split]:
    candidates = dict(zip(num.tolist(), _best_numerical(X, g, h, order, num, params)))
    for j in features:
        if j in categorical:
            candidates[j] = _best_categorical(X[rows, j], g[rows], h[rows], j, params)
    best = None
    for j in features:
        s = candidates[j]
        if s is not None and s.gain > _GAIN_EPS and (best is None or s.gain > best.gain):
            best = s
    return best


@dataclass
class Tree:
    """Flat node arrays; node 0 is the root, ``left == LEAF`` marks a leaf."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    categories: list[list[int]] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)
    gain: list[float] = field(default_factory=list)
    cover: list[float] = field(default_factory=list)

    def add_node(self, value: float, cover: float) -> int:
        self.feature.append(-1)
        self.threshold.append(float("nan"))
        self.categories.append([])
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(float(value))
        self.gain.append(0.0)
        self.cover.append(float(cover))
        return len(self.value) - 1

    @property
    def n_nodes(self) -> int:
        return len(self.value)

    def depth(self) -> int:
        def walk(node: int) -> int:
            if self.left[node] == LEAF:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))
        return walk(0)

    def leaf_index(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold, dtype=np.float64)
        while True:
            active = left[node] != LEAF
            if not active.any():
                return node
            rows = np.flatnonzero(active)
            nd = node[rows]
            x = X[rows, feature[nd]]
            go_left = x < threshold[nd]
            for k in np.unique(nd):
                if self.categories[k]:
                    sel = nd == k
                    go_left[sel] = np.isin(x[sel], self.categories[k])
            node[rows] = np.where(go_left, left[nd], right[nd])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(self.value)[self.leaf_index(X)]

    def to_dict(self) -> dict:
        nodes = []
        for k in range(self.n_nodes):
            if self.left[k] == LEAF:
                nodes.append({"id": k, "leaf": self.value[k], "cover": self.cover[k]})
                continue
            entry = {"id": k, "feature": self.feature[k], "gain": self.gain[k], "cover": self.cover[k],
                     "left": self.left[k], "right": self.right[k], "value": self.value[k]}
            if self.categories[k]:
                entry["left_categories"] = list(self.categories[k])
            else:
                entry["threshold"] = self.threshold[k]
            nodes.append(entry)
        return {"nodes": nodes}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        tree = cls()
        for entry in sorted(d["nodes"], key=lambda e: e["id"]):
            if "leaf" in entry:
                tree.add_node(entry["leaf"], entry.get("cover", 0.0))
                continue
            k = tree.add_node(entry.get("value", 0.0), entry.get("cover", 0.0))
            tree.feature[k] = int(entry["feature"])
            tree.gain[k] = float(entry["gain"])
            tree.left[k], tree.right[k] = int(entry["left"]), int(entry["right"])
            if "left_categories" in entry:
                tree.categories[k] = [int(c) for c in entry["left_categories"]]
            else:
                tree.threshold[k] = float(entry["threshold"])
        return tree


@dataclass
class Ensemble:
    n_features: int
    categorical: tuple[int, ...]
    prior: float
    learning_rate: float
    trees: list[Tree] = field(default_factory=list)
    params: Optional[GbdtParams] = None
    feature_names: Optional[tuple[str, ...]] = None

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"ensemble expects {self.n_features} features, got shape {X.shape}")
        return X

    def decision_function(self, X: np.ndarray, n_trees: Optional[int] = None) -> np.ndarray:
        X = self._check(X)
        z = np.full(X.shape[0], self.prior)
        for tree in self.trees[:n_trees]:
            z += self.learning_rate * tree.predict(X)
        return z

    def predict_proba(self, X: np.ndarray, n_trees: Optional[int] = None) -> np.ndarray:
        return _sigmoid(self.decision_function(X, n_trees))

    def feature_importance(self) -> np.ndarray:
        """Total split gain per feature."""
        total = np.zeros(self.n_features)
        for tree in self.trees:
            for k in range(tree.n_nodes):
                if tree.left[k] != LEAF:
                    total[tree.feature[k]] += tree.gain[k]
        return total

    def to_dict(self) -> dict:
        return {
            "format": "tabtransfer-gbdt/1",
            "n_features": self.n_features,
            "categorical": list(self.categorical),
            "prior": self.prior,
            "learning_rate": self.learning_rate,
            "params": self.params.to_dict() if self.params is not None else None,
            "feature_names": list(self.feature_names) if self.feature_names is not None else None,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Ensemble":
        return cls(
            n_features=int(d["n_features"]),
            categorical=tuple(d["categorical"]),
            prior=float(d["prior"]),
            learning_rate=float(d["learning_rate"]),
            trees=[Tree.from_dict(t) for t in d["trees"]],
            params=GbdtParams.from_dict(d["params"]) if d.get("params") else None,
            feature_names=tuple(d["feature_names"]) if d.get("feature_names") else None,
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Ensemble":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def logistic_loss(y: np.ndarray, z: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def prior_log_odds(y: np.ndarray) -> float:
    """Log-odds of the label mean shrunk by half a pseudo-count per class, so single-class labels stay finite."""
    p = (y.sum() + 0.5) / (y.size + 1.0)
    return float(np.log(p / (1.0 - p)))


def _column_sample(features: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
    if rate >= 1.0:
        return features
    k = max(1, int(round(rate * features.size)))
    return np.sort(rng.choice(features, size=k, replace=False))


def _grow(tree: Tree, X, g, h, rows, order, depth, features, num_features, categorical, params, rng) -> int:
    """Depth-first growth. ``order`` holds ``rows`` sorted by each of ``num_features``."""
    G, H = float(g[rows].sum()), float(h[rows].sum())
    node = tree.add_node(leaf_weight(G, H, params.reg_lambda, params.reg_alpha), H)
    if depth >= params.max_depth or rows.size < 2:
        return node
    level = _column_sample(features, params.colsample_bylevel, rng)
    keep = np.isin(num_features, level)
    split = _select(X, g, h, rows, order[:, keep], num_features[keep], level.tolist(), categorical, params)
    if split is None:
        return node
    column = X[:, split.feature]
    flag = np.isin(column, split.left_categories) if split.categorical else column < split.threshold
    go_left = flag[rows]
    tree.feature[node] = split.feature
    tree.gain[node] = split.gain
    if split.categorical:
        tree.categories[node] = list(split.left_categories)
    else:
        tree.threshold[node] = split.threshold
    children = []
    for side in (True, False):
        sub = rows[go_left == side]
        mask = flag[order] == side
        sub_order = order.T[mask.T].reshape(order.shape[1], sub.size).T
        children.append(_grow(tree, X, g, h, sub, sub_order, depth + 1, features, num_features, categorical,
                              params, rng))
    tree.left[node], tree.right[node] = children
    return node


def fit_gbdt(X: np.ndarray, y: np.ndarray, params: GbdtParams = GbdtParams(), seed: int = 0,
             categorical: Sequence[int] = (), feature_names: Optional[Sequence[str]] = None) -> Ensemble:
    """Boost ``params.n_estimators`` trees on the logistic loss.

    ``categorical`` lists columns holding integer category codes. Labels with a
    single class give trees that are single leaves, i.e. a constant model.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError(f"X has shape {X.shape} but there are {y.size} labels")
    if not np.isfinite(X).all():
        raise ValueError("GBDT inputs must be finite; impute missing values first")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be binary 0/1")
    rng = np.random.default_rng(seed)
    cat = frozenset(int(j) for j in categorical)
    ens = Ensemble(X.shape[1], tuple(sorted(cat)), prior_log_odds(y) if y.size else 0.0, params.learning_rate,
                   params=params, feature_names=tuple(feature_names) if feature_names is not None else None)
    if y.size == 0:
        return ens
    all_features = np.arange(X.shape[1])
    z = np.full(y.size, ens.prior)
    n_sample = max(1, int(round(params.subsample * y.size)))
    for _ in range(params.n_estimators):
        p = _sigmoid(z)
        g, h = p - y, p * (1.0 - p)
        rows = np.arange(y.size) if params.subsample >= 1.0 else np.sort(rng.choice(y.size, n_sample, replace=False))
        features = _column_sample(all_features, params.colsample_bytree, rng)
        tree = Tree()
        num = np.array([j for j in features.tolist() if j not in cat], dtype=np.int64)
        order = rows[np.argsort(X[np.ix_(rows, num)], axis=0, kind="stable")]
        _grow(tree, X, g, h, rows, order, 0, features, num, cat, params, rng)
        ens.trees.append(tree)
        z += params.learning_rate * tree.predict(X)
    return ens
