"""Stratified fold assignment with seeded shuffling."""

from __future__ import annotations

import numpy as np

from ziskit.errors import InfeasibleStratification


def stratified_folds(labels, k: int, seed: int) -> np.ndarray:
    """Fold index per row; each class dealt round-robin after a seeded shuffle.

    Per-fold class counts differ from perfect proportionality by at most one
    row per class.
    """
    labels = np.asarray(labels).astype(int)
    if k < 2:
        raise ValueError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    folds = np.empty(labels.size, dtype=np.int32)
    for cls in np.unique(labels):
        idx = np.nonzero(labels == cls)[0]
        if idx.size < k:
            raise InfeasibleStratification(
                f"class {cls} has {idx.size} rows, fewer than {k} folds")
        idx = idx[rng.permutation(idx.size)]
        folds[idx] = np.arange(idx.size) % k
    return folds
