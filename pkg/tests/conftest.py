import numpy as np
import pytest

from ziskit.core.types import AudioSnippet, GroundTruth, Group, SensorKind, SensorSeries


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def noise_snippet(rng, seconds=1.0, rate=16000, amplitude=3000, device="dev",
                  start=0) -> AudioSnippet:
    samples = rng.integers(-amplitude, amplitude + 1, size=int(seconds * rate),
                           dtype=np.int64).astype(np.int16)
    return AudioSnippet(samples, rate, start, device)


def series_of(values, kind=SensorKind.NOISE, step_ms=1000, device="dev",
              start=0) -> SensorSeries:
    values = np.asarray(values, dtype=np.float64)
    times = start + np.arange(values.size, dtype=np.int64) * step_ms
    return SensorSeries(kind, times, values, device)


def two_group_truth(until_ms=1_000_000) -> GroundTruth:
    return GroundTruth(groups=(
        Group("g0", ("a", "b"), ((0, until_ms),)),
        Group("g1", ("c", "d"), ((0, until_ms),)),
    ))
