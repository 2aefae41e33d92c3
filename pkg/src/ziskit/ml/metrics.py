"""Ranking metrics for binary scores."""

from __future__ import annotations

import numpy as np

from ziskit.errors import DegenerateLabels


def auc(scores, labels, weights=None) -> float:
    """Weighted Mann-Whitney AUC with ties counted half.

    Probability (weighted) that a random positive outscores a random
    negative, counting exact ties as one half.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    weights = np.ones_like(scores) if weights is None else np.asarray(weights, dtype=np.float64)
    if scores.shape != labels.shape or scores.shape != weights.shape:
        raise ValueError("scores, labels and weights must have equal shapes")
    w_pos = float(weights[labels == 1].sum())
    w_neg = float(weights[labels == 0].sum())
    if w_pos == 0.0 or w_neg == 0.0:
        raise DegenerateLabels("AUC needs both classes present")
    order = np.argsort(scores, kind="stable")
    s = scores[order]
    w = weights[order]
    pos = (labels[order] == 1).astype(np.float64) * w
    neg = (labels[order] == 0).astype(np.float64) * w
    total = 0.0
    cum_neg = 0.0
    i = 0
    n = s.size
    while i < n:
        j = i
        while j < n and s[j] == s[i]:
            j += 1
        tie_pos = float(pos[i:j].sum())
        tie_neg = float(neg[i:j].sum())
        total += tie_pos * (cum_neg + 0.5 * tie_neg)
        cum_neg += tie_neg
        i = j
    return total / (w_pos * w_neg)
