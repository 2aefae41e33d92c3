from ziskit.core.io import load_dataset
from ziskit.core.types import (
    AudioSnippet,
    BeaconScan,
    Dataset,
    EvaluationRecord,
    Fingerprint,
    GroundTruth,
    Group,
    IntervalPair,
    Label,
    SensorKind,
    SensorSeries,
    Subscenario,
)
from ziskit.core.windowing import filter_subscenario, window_pairs

__all__ = [
    "AudioSnippet", "BeaconScan", "Dataset", "EvaluationRecord", "Fingerprint",
    "GroundTruth", "Group", "IntervalPair", "Label", "SensorKind", "SensorSeries",
    "Subscenario", "filter_subscenario", "load_dataset", "window_pairs",
]
