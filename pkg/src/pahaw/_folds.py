"""Stratified fold assignment shared by cross-validation and grid search."""

from __future__ import annotations

import numpy as np


def stratified_assignment(labels: np.ndarray, n_folds: int, rng: np.random.Generator) -> np.ndarray:
    """Fold index for every row.

    Each class is shuffled and dealt round-robin into the folds.  The dealing
    position carries over from one class to the next, so the extra members
    of different classes land in different folds and fold sizes stay within
    one of each other.
    """
    labels = np.asarray(labels)
    fold_of = np.empty(len(labels), dtype=np.int64)
    pos = 0
    for cls in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == cls))
        fold_of[members] = (pos + np.arange(len(members))) % n_folds
        pos += len(members)
    return fold_of


def derived_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for a (seed, key...) tuple."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))
