"""Gradient-boosted regression trees under squared-error loss.

Each stage fits a CART regression tree to the current residuals (the negative
gradient of the squared loss) and adds it to the ensemble scaled by the
learning rate. Splits are found by exhaustive search over midpoints between
consecutive distinct feature values. Ties go to the lowest feature index,
then the lowest threshold.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .dataset import format_number
from .features import FeatureMatrix

RESIDUAL_STOP = 1e-12
# splits must reduce the node's SSE by more than this fraction of it
_MIN_REL_GAIN = 1e-12
# gains this close (relative to node SSE) count as tied; different features often
# induce the same partition and their cumsums differ only by rounding
_TIE_REL = 1e-9


class GbrtError(ValueError):
    pass


@dataclass(frozen=True)
class GbrtParams:
    n_trees: int = 100
    max_depth: Optional[int] = 3  # None = unlimited
    learning_rate: float = 0.1
    min_leaf: int = 5
    seed: int = 0  # reserved; fitting is deterministic

    def __post_init__(self):
        if self.n_trees < 0:
            raise GbrtError("n_trees must be >= 0")
        if self.max_depth is not None and self.max_depth < 0:
            raise GbrtError("max_depth must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise GbrtError("learning_rate must be in (0, 1]")
        if self.min_leaf < 1:
            raise GbrtError("min_leaf must be >= 1")


@dataclass(frozen=True)
class Leaf:
    value: float
    n: int


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    gain: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Split]


@dataclass(frozen=True, eq=False)
class GbrtModel:
    f0: float
    trees: tuple
    learning_rate: float
    importances: np.ndarray
    columns: tuple[str, ...]
    params: GbrtParams = field(default_factory=GbrtParams)
    train_mse: tuple[float, ...] = ()
    has_splits: bool = True

    def to_dict(self) -> dict:
        return {
            "f0": self.f0,
            "learning_rate": self.learning_rate,
            "columns": list(self.columns),
            "params": asdict(self.params),
            "importances": {c: float(v) for c, v in zip(self.columns, self.importances)},
            "has_splits": self.has_splits,
            "trees": [_node_to_dict(t) for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GbrtModel":
        columns = tuple(d["columns"])
        return cls(
            f0=d["f0"],
            trees=tuple(_node_from_dict(t) for t in d["trees"]),
            learning_rate=d["learning_rate"],
            importances=np.array([d["importances"][c] for c in columns]),
            columns=columns,
            params=GbrtParams(**d["params"]),
            has_splits=d.get("has_splits", True),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def _node_to_dict(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {"value": node.value, "n": node.n}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "gain": node.gain,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(d: dict) -> TreeNode:
    if "value" in d:
        return Leaf(d["value"], d["n"])
    return Split(d["feature"], d["threshold"], d["gain"], _node_from_dict(d["left"]), _node_from_dict(d["right"]))


class _TreeBuilder:
    """Builds one tree on a fixed design; reused across boosting stages."""

    def __init__(self, X: np.ndarray, max_depth: Optional[int], min_leaf: int):
        self.XT = np.ascontiguousarray(X.T)
        self.order = np.argsort(self.XT, axis=1, kind="stable")
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.n_features = X.shape[1]

    def build(self, r: np.ndarray):
        """Returns (root, per-row leaf values, per-feature gain)."""
        self.r = r
        self.fitted = np.empty(len(r))
        self.gains = np.zeros(self.n_features)
        root = self._grow(np.ones(len(r), dtype=bool), 0)
        return root, self.fitted, self.gains

    def _grow(self, mask: np.ndarray, depth: int) -> TreeNode:
        m = int(mask.sum())
        rn = self.r[mask]
        mean = float(rn.mean())
        can_split = (self.max_depth is None or depth < self.max_depth) and m >= 2 * self.min_leaf
        best = self._best_split(mask, m) if can_split else None
        if best is None:
            self.fitted[mask] = mean
            return Leaf(mean, m)
        f, thr, gain = best
        self.gains[f] += gain
        go_left = self.XT[f] <= thr
        left = self._grow(mask & go_left, depth + 1)
        right = self._grow(mask & ~go_left, depth + 1)
        return Split(f, thr, gain, left, right)

    def _best_split(self, mask: np.ndarray, m: int):
        k = self.min_leaf
        sel = mask[self.order]
        idx = self.order[sel].reshape(self.n_features, m)
        vals = np.take_along_axis(self.XT, idx, axis=1)
        rr = self.r[idx]
        cs = np.cumsum(rr, axis=1)
        total = cs[:, -1:]
        node_sse = float(np.sum(rr[0] ** 2) - total[0, 0] ** 2 / m)
        if node_sse <= 0.0:
            return None
        nl = np.arange(1, m, dtype=np.float64)
        sl = cs[:, :-1]
        gain = sl**2 / nl + (total - sl) ** 2 / (m - nl) - total**2 / m
        valid = vals[:, :-1] < vals[:, 1:]
        valid[:, : k - 1] = False
        if k > 1:
            valid[:, m - k :] = False
        gain = np.where(valid, gain, -np.inf)
        gmax = float(np.max(gain))
        if not gmax > _MIN_REL_GAIN * node_sse:
            return None
        # first candidate in (feature, threshold) order among the near-maximal ones
        flat = int(np.argmax(gain >= gmax - _TIE_REL * node_sse))
        f, i = divmod(flat, m - 1)
        g = float(gain[f, i])
        lo, hi = vals[f, i], vals[f, i + 1]
        thr = lo + (hi - lo) / 2.0
        if not lo <= thr < hi:
            thr = lo
        return f, float(thr), g


def _as_array(X) -> tuple[np.ndarray, Optional[tuple[str, ...]]]:
    if isinstance(X, FeatureMatrix):
        return np.asarray(X.values, dtype=np.float64), X.columns
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    return X, None


def fit(X, y=None, params: GbrtParams = GbrtParams(), columns: Optional[Sequence[str]] = None) -> GbrtModel:
    """Fit a boosted ensemble.

    ``X`` is a FeatureMatrix or a 2-D array; when ``y`` is omitted the
    FeatureMatrix target is used. Rows are put into a canonical order first,
    so the fitted model does not depend on the order of the training rows.
    """
    Xa, cols = _as_array(X)
    if y is None:
        if not isinstance(X, FeatureMatrix) or X.target is None:
            raise GbrtError("no target given")
        y = X.target
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = len(y)
    if n == 0 or Xa.shape[0] != n:
        raise GbrtError(f"X has {Xa.shape[0]} rows but y has {n}")
    if not (np.all(np.isfinite(Xa)) and np.all(np.isfinite(y))):
        raise GbrtError("inputs must be finite")
    if n < 2 * params.min_leaf:
        raise GbrtError(f"need at least {2 * params.min_leaf} rows for min_leaf={params.min_leaf}")
    if columns is not None:
        cols = tuple(columns)
    if cols is None:
        cols = tuple(f"x{j}" for j in range(Xa.shape[1]))
    if len(cols) != Xa.shape[1]:
        raise GbrtError("column names do not match X")

    canon = np.lexsort((y,) + tuple(Xa[:, j] for j in reversed(range(Xa.shape[1]))))
    Xc, yc = Xa[canon], y[canon]

    f0 = float(np.mean(yc))
    pred = np.full(n, f0)
    r = yc - pred
    mse = [float(np.mean(r**2))]
    builder = _TreeBuilder(Xc, params.max_depth, params.min_leaf)
    gains = np.zeros(Xa.shape[1])
    trees = []
    nu = params.learning_rate
    for _ in range(params.n_trees):
        if np.sum(np.abs(r)) < RESIDUAL_STOP:
            break
        root, fitted, g = builder.build(r)
        trees.append(root)
        gains += g
        pred = pred + nu * fitted
        r = yc - pred
        mse.append(float(np.mean(r**2)))

    total = gains.sum()
    has_splits = total > 0
    importances = gains / total if has_splits else np.zeros_like(gains)
    return GbrtModel(f0, tuple(trees), nu, importances, cols, params, tuple(mse), bool(has_splits))


def _predict_tree(node: TreeNode, X: np.ndarray, rows: np.ndarray, out: np.ndarray) -> None:
    if isinstance(node, Leaf):
        out[rows] = node.value
        return
    left = X[rows, node.feature] <= node.threshold
    _predict_tree(node.left, X, rows[left], out)
    _predict_tree(node.right, X, rows[~left], out)


def predict_tree(node: TreeNode, X) -> np.ndarray:
    Xa, _ = _as_array(X)
    out = np.empty(len(Xa))
    _predict_tree(node, Xa, np.arange(len(Xa)), out)
    return out


def predict(model: GbrtModel, X) -> np.ndarray:
    Xa, cols = _as_array(X)
    if cols is not None and cols != model.columns:
        raise GbrtError(f"column mismatch: model has {model.columns}, got {cols}")
    if Xa.shape[1] != len(model.columns):
        raise GbrtError(f"expected {len(model.columns)} columns, got {Xa.shape[1]}")
    total = np.zeros(len(Xa))
    tmp = np.empty(len(Xa))
    rows = np.arange(len(Xa))
    for tree in model.trees:
        _predict_tree(tree, Xa, rows, tmp)
        total += tmp
    return model.f0 + model.learning_rate * total


def feature_importances(model: GbrtModel) -> dict[str, float]:
    """Normalized split-gain importance per feature; all zeros if no split was made."""
    return {c: float(v) for c, v in zip(model.columns, model.importances)}


def write_importances(importances: Mapping[str, float], path) -> None:
    """Two-column CSV sorted by decreasing importance."""
    ranked = sorted(importances.items(), key=lambda cv: (-cv[1], cv[0]))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("attribute", "importance"))
        for c, v in ranked:
            w.writerow((c, format_number(v)))
