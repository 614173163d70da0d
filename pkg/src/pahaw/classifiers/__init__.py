"""RBF SVM, AdaBoost and K-NN binary classifiers."""

from __future__ import annotations

import json

from .adaboost import AdaBoostModel, DecisionTree, adaboost_train
from .grid import grid_scores, grid_search_svm, grid_values
from .kernel import rbf_gram, rbf_kernel, squared_distances
from .knn import KnnModel, knn_predict, knn_train
from .svm import KktReport, SvmConfig, SvmModel, kkt_audit, signed_labels, svm_train

CLASSIFIER_KINDS = ("svm", "adaboost", "knn")


def load_model(text: str):
    """Rebuild any serialized model from its JSON text."""
    kind = json.loads(text).get("kind")
    cls = {"svm": SvmModel, "adaboost": AdaBoostModel, "knn": KnnModel}.get(kind)
    if cls is None:
        raise ValueError(f"unknown model kind {kind!r}")
    return cls.from_json(text)


__all__ = [
    "AdaBoostModel",
    "CLASSIFIER_KINDS",
    "DecisionTree",
    "KktReport",
    "KnnModel",
    "SvmConfig",
    "SvmModel",
    "adaboost_train",
    "grid_scores",
    "grid_search_svm",
    "grid_values",
    "kkt_audit",
    "knn_predict",
    "knn_train",
    "load_model",
    "rbf_gram",
    "rbf_kernel",
    "signed_labels",
    "squared_distances",
    "svm_train",
]
