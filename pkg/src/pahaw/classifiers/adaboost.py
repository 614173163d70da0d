"""Discrete AdaBoost (two-class SAMME) over shallow weighted-Gini trees."""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import ceil, sqrt

import numpy as np
from numba import njit

from ..errors import DimensionMismatch, SingleClass
from .svm import signed_labels

MODEL_FORMAT = 1
# a perfect learner gets the weight of this error rate instead of infinity
PERFECT_ERROR = 1e-10


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """Flat binary tree.  Internal node k sends ``x[feature[k]] <= threshold[k]`` left.

    Leaves have ``feature == -1`` and carry an output in {-1, 0, +1}.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def depth(self) -> int:
        def walk(k):
            if self.feature[k] < 0:
                return 0
            return 1 + max(walk(self.left[k]), walk(self.right[k]))

        return walk(0)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                break
            rows = np.flatnonzero(inner)
            go_left = X[rows, f[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])
        return self.value[node]

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(
            np.array(d["feature"], dtype=np.int64),
            np.array(d["threshold"], dtype=float),
            np.array(d["left"], dtype=np.int64),
            np.array(d["right"], dtype=np.int64),
            np.array(d["value"], dtype=float),
        )


@njit(cache=True)
def _grow_heap_tree(X, y, w, cand, max_depth):
    """Weighted-Gini tree in heap layout (children of k at 2k+1 and 2k+2).

    ``cand[k]`` lists the candidate features for internal slot ``k`` in
    ascending order.  Ties keep the earliest candidate and the smallest
    threshold; leaves output the sign of (positive - negative) weight.
    """
    n_slots = 2 ** (max_depth + 1) - 1
    feature = -np.ones(n_slots, dtype=np.int64)
    threshold = np.zeros(n_slots)
    value = np.zeros(n_slots)
    active = np.zeros(n_slots, dtype=np.bool_)
    node_of = np.zeros(X.shape[0], dtype=np.int64)
    active[0] = True
    for k in range(n_slots):
        if not active[k]:
            continue
        rows = np.flatnonzero(node_of == k)
        wp = 0.0
        wn = 0.0
        for r in rows:
            if y[r] > 0:
                wp += w[r]
            else:
                wn += w[r]
        value[k] = np.sign(wp - wn)
        depth = int(np.log2(k + 1))
        if depth >= max_depth or len(rows) < 2 or wp <= 0 or wn <= 0:
            continue
        parent = 2.0 * wp * wn / (wp + wn)
        best = np.inf
        best_f = -1
        best_t = 0.0
        for f in cand[k]:
            v = X[rows, f]
            order = np.argsort(v, kind="mergesort")
            lp = 0.0
            ln = 0.0
            for q in range(len(order) - 1):
                r = rows[order[q]]
                if y[r] > 0:
                    lp += w[r]
                else:
                    ln += w[r]
                lo = v[order[q]]
                hi = v[order[q + 1]]
                if not hi > lo:
                    continue
                rp = wp - lp
                rn = wn - ln
                imp = 0.0
                if lp + ln > 0:
                    imp += 2.0 * lp * ln / (lp + ln)
                if rp + rn > 0:
                    imp += 2.0 * rp * rn / (rp + rn)
                if imp < best:
                    best = imp
                    best_f = f
                    t = 0.5 * (lo + hi)
                    best_t = t if t < hi else lo
        if best_f < 0 or not best < parent:
            continue
        feature[k] = best_f
        threshold[k] = best_t
        for r in rows:
            node_of[r] = 2 * k + 1 if X[r, best_f] <= best_t else 2 * k + 2
        active[2 * k + 1] = True
        active[2 * k + 2] = True
    return feature, threshold, value, active


def fit_tree(X: np.ndarray, y: np.ndarray, w: np.ndarray, max_depth: int, n_candidates: int, rng) -> DecisionTree:
    """Weighted-Gini CART with ``n_candidates`` random features tried at each split.

    Candidate sets for every possible internal node are drawn up front, so
    the random stream never depends on the labels.
    """
    d = X.shape[1]
    n_internal = 2**max_depth - 1
    m = min(n_candidates, d)
    cand = np.sort(np.argsort(rng.random((max(n_internal, 1), d)), axis=1)[:, :m], axis=1)
    feature, threshold, value, active = _grow_heap_tree(
        np.ascontiguousarray(X, dtype=float), y.astype(float), w.astype(float), cand, max_depth
    )
    slots = np.arange(len(feature))
    inner = feature >= 0
    left = np.where(inner, 2 * slots + 1, -1)
    right = np.where(inner, 2 * slots + 2, -1)
    # unreachable slots stay as zero-valued leaves; they are never visited
    value = np.where(active, value, 0.0)
    return DecisionTree(feature, threshold, left, right, value)


@dataclass(frozen=True, eq=False)
class AdaBoostModel:
    weak_learners: list[DecisionTree]
    learner_weights: np.ndarray
    learner_errors: np.ndarray  # weighted training error of each learner when fitted
    n_features: int

    @property
    def rounds_used(self) -> int:
        return len(self.weak_learners)

    def staged_decision(self, X):
        """Decision values after each round."""
        X = self._check(X)
        F = np.zeros(len(X))
        for tree, a in zip(self.weak_learners, self.learner_weights):
            F = F + a * tree.predict(X)
            yield F

    def decision_function(self, X) -> np.ndarray:
        X = self._check(X)
        F = np.zeros(len(X))
        for tree, a in zip(self.weak_learners, self.learner_weights):
            F += a * tree.predict(X)
        return F

    def predict(self, X) -> np.ndarray:
        """Labels in {-1, +1}; a zero vote maps to +1."""
        return np.where(self.decision_function(X) >= 0, 1, -1)

    def _check(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"model expects {self.n_features} features, got {X.shape[1]}")
        return X

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": MODEL_FORMAT,
                "kind": "adaboost",
                "n_features": self.n_features,
                "learner_weights": self.learner_weights.tolist(),
                "learner_errors": self.learner_errors.tolist(),
                "weak_learners": [t.to_dict() for t in self.weak_learners],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "AdaBoostModel":
        d = json.loads(text)
        if d.get("kind") != "adaboost" or d.get("format") != MODEL_FORMAT:
            raise ValueError("not a serialized AdaBoost model of a supported format")
        return cls(
            [DecisionTree.from_dict(t) for t in d["weak_learners"]],
            np.array(d["learner_weights"], dtype=float),
            np.array(d["learner_errors"], dtype=float),
            int(d["n_features"]),
        )


def adaboost_train(X, y, max_rounds: int = 500, max_depth: int = 3, seed: int = 0) -> AdaBoostModel:
    """Boost depth-limited trees with learner weight ``ln((1 - err) / err)``.

    Each split considers ``ceil(sqrt(d))`` features drawn from a generator
    seeded with ``seed``.  Boosting stops early when a learner reaches
    weighted error 0.5 or more (that learner is discarded) or error 0 (that
    learner is kept with the weight of a ``PERFECT_ERROR`` error rate).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    ys = signed_labels(y)
    if X.shape[0] != len(ys):
        raise DimensionMismatch(f"{X.shape[0]} rows but {len(ys)} labels")
    if len(np.unique(ys)) < 2:
        raise SingleClass("AdaBoost training needs both classes")
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    n, d = X.shape
    rng = np.random.default_rng(seed)
    n_candidates = ceil(sqrt(d))
    w = np.full(n, 1.0 / n)
    trees, weights, errors = [], [], []
    for _ in range(max_rounds):
        tree = fit_tree(X, ys, w, max_depth, n_candidates, rng)
        miss = tree.predict(X) != ys
        err = float(w[miss].sum())
        if err >= 0.5:
            break
        e = max(err, PERFECT_ERROR)
        a = float(np.log((1.0 - e) / e))
        trees.append(tree)
        weights.append(a)
        errors.append(err)
        if err == 0.0:
            break
        w = w * np.exp(a * miss)
        w /= w.sum()
    return AdaBoostModel(trees, np.array(weights), np.array(errors), d)
