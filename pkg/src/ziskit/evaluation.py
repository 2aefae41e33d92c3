"""Error-rate evaluation: FAR/FRR, EER sweeps, target-FAR curves, robustness.

Similarity-style scores accept high (accept_if_geq), distance-style scores
accept low (accept_if_leq). Gated or missing scores never enter FAR/FRR
denominators; they are reported through the availability fraction instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ziskit.core.types import EvaluationRecord, Label
from ziskit.errors import DegenerateLabels

ACCEPT_IF_GEQ = "accept_if_geq"
ACCEPT_IF_LEQ = "accept_if_leq"

# FAR and FRR that differ beyond three decimals make the EER a starred
# (averaged) value.
STARRED_TOLERANCE = 5e-4


@dataclass(frozen=True)
class ErrorRates:
    threshold: float
    far: float
    frr: float
    eer: float
    starred: bool


def _validate(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-d sequences")
    if not (np.any(labels == 1) and np.any(labels == 0)):
        raise DegenerateLabels("need both colocated and non-colocated scores")
    return scores, labels


def far_frr(scores, labels, threshold: float,
            polarity: str = ACCEPT_IF_GEQ) -> tuple[float, float]:
    """False accept and false reject rates at a fixed threshold.

    labels: 1 = colocated, 0 = non-colocated.
    """
    scores, labels = _validate(scores, labels)
    if polarity == ACCEPT_IF_GEQ:
        accepted = scores >= threshold
    elif polarity == ACCEPT_IF_LEQ:
        accepted = scores <= threshold
    else:
        raise ValueError(f"unknown polarity {polarity!r}")
    far = float(np.mean(accepted[labels == 0]))
    frr = float(np.mean(~accepted[labels == 1]))
    return far, frr


def candidate_thresholds(scores: np.ndarray) -> np.ndarray:
    """Midpoints between consecutive distinct scores plus open-end sentinels."""
    uniq = np.unique(scores)
    mids = (uniq[:-1] + uniq[1:]) / 2.0
    return np.concatenate(([-np.inf], mids, [np.inf]))


def equal_error_rate(scores, labels, polarity: str = ACCEPT_IF_GEQ) -> ErrorRates:
    """Operating point minimizing |FAR - FRR| over all achievable thresholds.

    Ties prefer the lower FAR, then the lower FRR. The EER is the average of
    FAR and FRR at the chosen point and is starred when they disagree beyond
    three decimals.
    """
    scores, labels = _validate(scores, labels)
    best = None
    for threshold in candidate_thresholds(scores):
        far, frr = far_frr(scores, labels, threshold, polarity)
        key = (abs(far - frr), far, frr)
        if best is None or key < best[0]:
            best = (key, threshold, far, frr)
    _, threshold, far, frr = best
    return ErrorRates(
        threshold=float(threshold),
        far=far,
        frr=frr,
        eer=(far + frr) / 2.0,
        starred=abs(far - frr) > STARRED_TOLERANCE,
    )


def frr_at_far(scores, labels, polarity: str = ACCEPT_IF_GEQ,
               far_targets: Sequence[float] = (0.001, 0.005, 0.01, 0.05)
               ) -> list[tuple[float, float]]:
    """Smallest achievable FRR with FAR at or below each target."""
    scores, labels = _validate(scores, labels)
    points = [far_frr(scores, labels, t, polarity) for t in candidate_thresholds(scores)]
    out = []
    for target in far_targets:
        if not 0 < target < 1:
            raise ValueError(f"FAR target must lie in (0, 1), got {target}")
        feasible = [frr for far, frr in points if far <= target]
        out.append((float(target), float(min(feasible))))
    return out


def class_overlap(scores, labels, bins: int = 100) -> float:
    """Overlap coefficient of the two class score histograms on a shared grid."""
    scores, labels = _validate(scores, labels)
    lo, hi = float(scores.min()), float(scores.max())
    if lo == hi:
        return 1.0
    edges = np.linspace(lo, hi, bins + 1)
    hist_pos, _ = np.histogram(scores[labels == 1], bins=edges)
    hist_neg, _ = np.histogram(scores[labels == 0], bins=edges)
    freq_pos = hist_pos / hist_pos.sum()
    freq_neg = hist_neg / hist_neg.sum()
    return float(np.minimum(freq_pos, freq_neg).sum())


@dataclass(frozen=True)
class CrossApplyResult:
    far: float
    frr: float
    delta_far: float
    delta_frr: float


def cross_apply(threshold: float, polarity: str, scores, labels) -> CrossApplyResult:
    """Apply a foreign decision threshold and report deltas vs the native EER."""
    far, frr = far_frr(scores, labels, threshold, polarity)
    native = equal_error_rate(scores, labels, polarity)
    return CrossApplyResult(far=far, frr=frr,
                            delta_far=far - native.far, delta_frr=frr - native.frr)


def availability(records: Iterable[EvaluationRecord]) -> float:
    """Fraction of records that produced a usable (non-gated) score."""
    records = list(records)
    if not records:
        return 0.0
    usable = sum(1 for r in records if not r.gated and r.score is not None)
    return usable / len(records)


def usable_scores(records: Iterable[EvaluationRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Scores and 0/1 labels of non-gated records."""
    pairs = [(r.score, 1 if r.label is Label.COLOCATED else 0)
             for r in records if not r.gated and r.score is not None]
    if not pairs:
        return np.array([]), np.array([], dtype=int)
    scores, labels = zip(*pairs)
    return np.asarray(scores, dtype=np.float64), np.asarray(labels, dtype=int)
