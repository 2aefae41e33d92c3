"""Weighted regression tree on gradient/hessian targets.

One tree implementation serves both ensembles: random forests fit it with
gradient = weight * label and hessian = weight (leaf = weighted class mean,
split gain equivalent to weighted Gini for binary labels), gradient boosting
fits it with logistic-loss gradients and hessians (leaf = Newton step).

Missing feature values (NaN) never produce split thresholds; at each split
they are routed to the child that received the larger share of training
weight, and the same side is used at prediction time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_MIN_GAIN = 1e-12
_MIN_HESSIAN = 1e-12


@dataclass
class TreeParams:
    max_depth: int = 8
    # Number of feature candidates per split; None tries every feature.
    mtry: int | None = None


@dataclass
class TreeNodes:
    """Flat node arrays; children reference node indices, -1 marks a leaf."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    missing_left: list[bool] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)

    def add_leaf(self, value: float) -> int:
        return self._add(-1, 0.0, True, -1, -1, value)

    def add_split(self, feature: int, threshold: float, missing_left: bool) -> int:
        return self._add(feature, threshold, missing_left, -1, -1, 0.0)

    def _add(self, feature, threshold, missing_left, left, right, value) -> int:
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.missing_left.append(missing_left)
        self.left.append(left)
        self.right.append(right)
        self.value.append(value)
        return len(self.feature) - 1


def _best_split_on_feature(col: np.ndarray, g: np.ndarray, h: np.ndarray
                           ) -> tuple[float, float, bool] | None:
    """Best (gain, threshold, missing_left) for one feature, or None."""
    miss = np.isnan(col)
    vals = col[~miss]
    if vals.size < 2:
        return None
    g_obs, h_obs = g[~miss], h[~miss]
    g_miss = float(g[miss].sum())
    h_miss = float(h[miss].sum())
    order = np.argsort(vals, kind="stable")
    vs = vals[order]
    cg = np.cumsum(g_obs[order])
    ch = np.cumsum(h_obs[order])
    cut = np.nonzero(vs[:-1] < vs[1:])[0]
    if cut.size == 0:
        return None
    g_tot = cg[-1] + g_miss
    h_tot = ch[-1] + h_miss
    gl, hl = cg[cut], ch[cut]
    gr, hr = cg[-1] - gl, ch[-1] - hl
    # Missing rows follow the heavier child (ties go left).
    to_left = hl >= hr
    gl_eff = gl + np.where(to_left, g_miss, 0.0)
    hl_eff = hl + np.where(to_left, h_miss, 0.0)
    gr_eff = gr + np.where(to_left, 0.0, g_miss)
    hr_eff = hr + np.where(to_left, 0.0, h_miss)
    parent = g_tot * g_tot / max(h_tot, _MIN_HESSIAN)
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = (gl_eff * gl_eff / np.maximum(hl_eff, _MIN_HESSIAN)
                + gr_eff * gr_eff / np.maximum(hr_eff, _MIN_HESSIAN) - parent)
    gain = np.where((hl_eff <= 0) | (hr_eff <= 0), -np.inf, gain)
    best = int(np.argmax(gain))
    if not np.isfinite(gain[best]) or gain[best] <= _MIN_GAIN:
        return None
    threshold = 0.5 * (vs[cut[best]] + vs[cut[best] + 1])
    return float(gain[best]), float(threshold), bool(to_left[best])


class TreeBuilder:
    def __init__(self, X: np.ndarray, g: np.ndarray, h: np.ndarray,
                 params: TreeParams, rng: np.random.Generator):
        self.X = X
        self.g = g
        self.h = h
        self.params = params
        self.rng = rng
        self.nodes = TreeNodes()
        self.gains: dict[int, float] = {}

    def build(self) -> int:
        return self._grow(np.arange(self.X.shape[0]), depth=0)

    def _leaf_value(self, idx: np.ndarray) -> float:
        h_sum = float(self.h[idx].sum())
        return float(self.g[idx].sum()) / max(h_sum, _MIN_HESSIAN)

    def _grow(self, idx: np.ndarray, depth: int) -> int:
        # Only depth gates the recursion before the split search: row-count
        # shortcuts would consume the RNG differently for weighted data and
        # its expanded-duplicate equivalent.
        params = self.params
        if depth >= params.max_depth:
            return self.nodes.add_leaf(self._leaf_value(idx))
        n_feat = self.X.shape[1]
        if params.mtry is not None and params.mtry < n_feat:
            candidates = np.sort(self.rng.choice(n_feat, size=params.mtry, replace=False))
        else:
            candidates = np.arange(n_feat)
        best = None
        for f in candidates:
            found = _best_split_on_feature(self.X[idx, f], self.g[idx], self.h[idx])
            if found is None:
                continue
            gain, threshold, missing_left = found
            if best is None or gain > best[0]:
                best = (gain, int(f), threshold, missing_left)
        if best is None:
            return self.nodes.add_leaf(self._leaf_value(idx))
        gain, feature, threshold, missing_left = best
        col = self.X[idx, feature]
        miss = np.isnan(col)
        go_left = np.where(miss, missing_left, col < threshold)
        node = self.nodes.add_split(feature, threshold, missing_left)
        self.gains[node] = gain
        self.nodes.left[node] = self._grow(idx[go_left], depth + 1)
        self.nodes.right[node] = self._grow(idx[~go_left], depth + 1)
        return node


@dataclass
class Tree:
    """Immutable fitted tree plus per-feature split gains."""

    feature: np.ndarray
    threshold: np.ndarray
    missing_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    root: int
    feature_gains: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray, g: np.ndarray, h: np.ndarray, params: TreeParams,
            rng: np.random.Generator) -> "Tree":
        builder = TreeBuilder(X, g, h, params, rng)
        root = builder.build()
        nodes = builder.nodes
        gains = np.zeros(X.shape[1])
        for node, gain in builder.gains.items():
            gains[nodes.feature[node]] += gain
        return cls(
            feature=np.asarray(nodes.feature, dtype=np.int32),
            threshold=np.asarray(nodes.threshold),
            missing_left=np.asarray(nodes.missing_left, dtype=bool),
            left=np.asarray(nodes.left, dtype=np.int32),
            right=np.asarray(nodes.right, dtype=np.int32),
            value=np.asarray(nodes.value),
            root=root,
            feature_gains=gains,
        )

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        self._walk(X, np.arange(X.shape[0]), self.root, out)
        return out

    def _walk(self, X: np.ndarray, idx: np.ndarray, node: int, out: np.ndarray) -> None:
        if idx.size == 0:
            return
        if self.feature[node] < 0:
            out[idx] = self.value[node]
            return
        col = X[idx, self.feature[node]]
        miss = np.isnan(col)
        go_left = np.where(miss, self.missing_left[node], col < self.threshold[node])
        self._walk(X, idx[go_left], int(self.left[node]), out)
        self._walk(X, idx[~go_left], int(self.right[node]), out)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "missing_left": self.missing_left.astype(int).tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "root": self.root,
        }

    @classmethod
    def from_dict(cls, doc: dict, n_features: int) -> "Tree":
        return cls(
            feature=np.asarray(doc["feature"], dtype=np.int32),
            threshold=np.asarray(doc["threshold"], dtype=np.float64),
            missing_left=np.asarray(doc["missing_left"], dtype=bool),
            left=np.asarray(doc["left"], dtype=np.int32),
            right=np.asarray(doc["right"], dtype=np.int32),
            value=np.asarray(doc["value"], dtype=np.float64),
            root=int(doc["root"]),
            feature_gains=np.zeros(n_features),
        )
