"""k-nearest-neighbour majority vote with Euclidean distance."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, EmptyModel
from .svm import signed_labels

MODEL_FORMAT = 1


@dataclass(frozen=True, eq=False)
class KnnModel:
    reference_points: np.ndarray
    reference_labels: np.ndarray  # in {-1, +1}
    k: int = 3

    def __post_init__(self) -> None:
        if self.k < 1 or self.k % 2 == 0:
            raise ValueError(f"k must be a positive odd number, got {self.k}")
        if len(self.reference_labels) and self.k > len(self.reference_labels):
            raise ValueError(f"k={self.k} exceeds the {len(self.reference_labels)} reference points")

    def neighbours(self, X) -> np.ndarray:
        """Indices of the k nearest references per query; equal distances favour lower indices."""
        if len(self.reference_labels) == 0:
            raise EmptyModel("K-NN model has no reference points")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.reference_points.shape[1]:
            raise DimensionMismatch(
                f"model expects {self.reference_points.shape[1]} features, got {X.shape[1]}"
            )
        # accumulate one coordinate at a time so the rounding, and therefore
        # the resolution of near-ties, is the same as in a plain loop
        d2 = np.zeros((X.shape[0], self.reference_points.shape[0]))
        for j in range(X.shape[1]):
            d2 += (X[:, j, None] - self.reference_points[None, :, j]) ** 2
        return np.argsort(d2, axis=1, kind="stable")[:, : self.k]

    def decision_function(self, X) -> np.ndarray:
        """Sum of neighbour labels; its sign is the vote."""
        return self.reference_labels[self.neighbours(X)].sum(axis=1)

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) > 0, 1, -1)

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": MODEL_FORMAT,
                "kind": "knn",
                "k": self.k,
                "reference_points": self.reference_points.tolist(),
                "reference_labels": self.reference_labels.tolist(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "KnnModel":
        d = json.loads(text)
        if d.get("kind") != "knn" or d.get("format") != MODEL_FORMAT:
            raise ValueError("not a serialized K-NN model of a supported format")
        pts = np.array(d["reference_points"], dtype=float)
        return cls(pts, np.array(d["reference_labels"], dtype=float), int(d["k"]))


def knn_train(X, y, k: int = 3) -> KnnModel:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    ys = signed_labels(y)
    if X.shape[0] != len(ys):
        raise DimensionMismatch(f"{X.shape[0]} rows but {len(ys)} labels")
    return KnnModel(X.copy(), ys, k)


def knn_predict(model: KnnModel, x) -> int:
    """Label of a single query point."""
    return int(model.predict(np.asarray(x, dtype=float).reshape(1, -1))[0])
