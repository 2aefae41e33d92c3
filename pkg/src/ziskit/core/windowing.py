"""Interval windowing of device pairs and subscenario filtering."""

from __future__ import annotations

from itertools import combinations
from typing import Iterable, Sequence

from ziskit.core.types import Dataset, EvaluationRecord, GroundTruth, IntervalPair


def dataset_epoch(dataset: Dataset) -> tuple[int, int] | None:
    """Earliest common timestamp and latest common end across devices with data."""
    spans = [dataset.device_span(d) for d in dataset.device_ids()]
    spans = [s for s in spans if s is not None]
    if not spans:
        return None
    start = max(s for s, _ in spans)
    end = min(e for _, e in spans)
    if start >= end:
        return None
    return start, end


def window_pairs(dataset: Dataset, t: int) -> list[IntervalPair]:
    """One pair per unordered device pair per aligned interval of length t.

    The interval grid is anchored at the dataset's earliest common timestamp.
    Pairs whose colocation state changes mid-interval are dropped; pairs where
    a device has no data in the interval carry empty_data=True.
    """
    if t <= 0:
        raise ValueError("interval length must be a positive integer")
    span = dataset_epoch(dataset)
    if span is None:
        return []
    epoch, end = span
    devices = [d for d in dataset.device_ids() if dataset.device_span(d) is not None]
    gt = dataset.ground_truth
    step = t * 1000
    pairs: list[IntervalPair] = []
    start = epoch
    while start + step <= end:
        stop = start + step
        for a, b in combinations(devices, 2):
            label = gt.label_for(a, b, start, stop)
            if label is None:
                continue
            empty = not (dataset.has_data_in(a, start, stop)
                         and dataset.has_data_in(b, start, stop))
            pairs.append(IntervalPair(a, b, start, t, label, empty_data=empty))
        start = stop
    return pairs


def filter_subscenario(records: Sequence[EvaluationRecord] | Iterable[IntervalPair],
                       ground_truth: GroundTruth, name: str) -> list:
    """Records whose interval lies fully inside any range of the subscenario."""
    sub = ground_truth.subscenario(name)
    kept = []
    for rec in records:
        start = rec.interval_start
        stop = start + rec.interval_len_s * 1000
        if any(s <= start and stop <= e for s, e in sub.ranges):
            kept.append(rec)
    return kept
