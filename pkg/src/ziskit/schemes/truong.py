"""Multi-modal pair features: beacon set distances plus two audio distances.

WiFi and BLE scans are aggregated per interval into mean RSSI per beacon;
five set distances compare two aggregates. Audio contributes the full-lag
normalized maximum cross-correlation and a time-frequency distance. Feature
slots without usable data carry None rather than a substitute number; only
the both-sides-saw-nothing case maps every distance to the rejection value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ziskit import dsp
from ziskit.core.types import AudioSnippet, BeaconScan, Dataset, IntervalPair, Label
from ziskit.errors import IncompatibleScans, UndefinedCorrelation

SCHEME_NAME = "truong"

THETA_DEFAULT = -100.0
# Distance substituted when neither side observed any beacon (reject bias).
EMPTY_SCAN_DISTANCE = 10_000.0
# exp(|delta|) overflows fast; |delta| is capped here before exponentiation.
_EXP_CLAMP = 100.0

WIFI_FEATURES = ("wifi_jaccard", "wifi_mean_hamming", "wifi_euclidean",
                 "wifi_mean_exp", "wifi_sum_sq_ranks")
BLE_FEATURES = ("ble_jaccard", "ble_euclidean")
AUDIO_FEATURES = ("audio_max_xcorr", "audio_tf_distance")
ALL_FEATURES = WIFI_FEATURES + BLE_FEATURES + AUDIO_FEATURES


@dataclass(frozen=True)
class BeaconAggregate:
    """Mean RSSI per identifier over all scans of one interval."""

    kind: str
    means: dict[str, float]

    @classmethod
    def from_scans(cls, scans: list[BeaconScan], kind: str) -> "BeaconAggregate":
        sums: dict[str, float] = {}
        counts: dict[str, int] = {}
        for scan in scans:
            if scan.kind != kind:
                raise IncompatibleScans(f"expected {kind} scans, got {scan.kind}")
            for ident, rssi in scan.observations.items():
                sums[ident] = sums.get(ident, 0.0) + rssi
                counts[ident] = counts.get(ident, 0) + 1
        return cls(kind=kind, means={i: sums[i] / counts[i] for i in sums})


@dataclass(frozen=True)
class BeaconDistances:
    jaccard: float
    mean_hamming: float
    euclidean: float
    mean_exp: float
    sum_sq_ranks: float


def _ranks(means: dict[str, float], idents: list[str]) -> dict[str, int]:
    # Ascending RSSI rank; ties broken by identifier to stay deterministic.
    ordered = sorted(idents, key=lambda i: (means[i], i))
    return {ident: pos + 1 for pos, ident in enumerate(ordered)}


def beacon_features(a: BeaconAggregate, b: BeaconAggregate,
                    theta: float = THETA_DEFAULT) -> BeaconDistances:
    """Five set distances between two aggregates of the same kind."""
    if a.kind != b.kind:
        raise IncompatibleScans(f"cannot compare {a.kind} with {b.kind}")
    ids_a, ids_b = set(a.means), set(b.means)
    union = sorted(ids_a | ids_b)
    if not union:
        return BeaconDistances(*(EMPTY_SCAN_DISTANCE,) * 5)
    common = sorted(ids_a & ids_b)
    jaccard = 1.0 - len(common) / len(union)
    deltas = np.array([abs(a.means.get(i, theta) - b.means.get(i, theta)) for i in union])
    mean_hamming = float(deltas.mean())
    euclidean = float(math.sqrt(float(np.sum(deltas * deltas))))
    mean_exp = float(np.exp(np.minimum(deltas, _EXP_CLAMP)).mean())
    rank_a = _ranks(a.means, common)
    rank_b = _ranks(b.means, common)
    sum_sq_ranks = float(sum((rank_a[i] - rank_b[i]) ** 2 for i in common))
    return BeaconDistances(jaccard, mean_hamming, euclidean, mean_exp, sum_sq_ranks)


@dataclass(frozen=True)
class AudioDistances:
    max_xcorr: float
    time_distance: float
    freq_distance: float
    tf_distance: float


def audio_features(x: AudioSnippet | np.ndarray, y: AudioSnippet | np.ndarray) -> AudioDistances:
    """Full-lag normalized max cross-correlation and time-frequency distance."""
    xd = x.as_float() if isinstance(x, AudioSnippet) else np.asarray(x, dtype=np.float64)
    yd = y.as_float() if isinstance(y, AudioSnippet) else np.asarray(y, dtype=np.float64)
    if xd.size != yd.size or xd.size < 2:
        raise ValueError("snippets must be aligned, equal length, and non-trivial")
    # Energy normalization makes the full-lag peak equal the normalized form.
    max_xcorr = dsp.max_xcorr_norm_two_sided(xd, yd, xd.size - 1)
    spec_x = dsp.fft_mag_hamming(xd)
    spec_y = dsp.fft_mag_hamming(yd)
    nx = float(np.linalg.norm(spec_x))
    ny = float(np.linalg.norm(spec_y))
    if nx == 0.0 or ny == 0.0:
        raise UndefinedCorrelation("zero spectrum")
    freq_distance = float(np.linalg.norm(spec_x / nx - spec_y / ny))
    time_distance = 1.0 - max_xcorr
    tf_distance = math.hypot(time_distance, freq_distance)
    return AudioDistances(max_xcorr, time_distance, freq_distance, tf_distance)


@dataclass(frozen=True)
class TruongFeatureVector:
    """Per pair-interval feature slots (None marks a missing modality)."""

    device_a: str
    device_b: str
    interval_start: int
    interval_len_s: int
    wifi_jaccard: float | None
    wifi_mean_hamming: float | None
    wifi_euclidean: float | None
    wifi_mean_exp: float | None
    wifi_sum_sq_ranks: float | None
    ble_jaccard: float | None
    ble_euclidean: float | None
    audio_max_xcorr: float | None
    audio_tf_distance: float | None
    label: Label

    @property
    def pair_id(self) -> str:
        return f"{self.device_a}|{self.device_b}"

    def values(self) -> list[float | None]:
        return [getattr(self, name) for name in ALL_FEATURES]


def _beacon_slots(dataset: Dataset, pair: IntervalPair, kind: str, theta: float,
                  start: int, stop: int) -> BeaconDistances | None:
    scans_a = dataset.beacons_in(pair.device_a, kind, start, stop)
    scans_b = dataset.beacons_in(pair.device_b, kind, start, stop)
    # No scan records at all means a scan error, not an empty environment.
    if not scans_a or not scans_b:
        return None
    return beacon_features(BeaconAggregate.from_scans(scans_a, kind),
                           BeaconAggregate.from_scans(scans_b, kind), theta)


def _audio_slots(dataset: Dataset, pair: IntervalPair, start: int,
                 stop: int) -> AudioDistances | None:
    snip_a = dataset.audio.get(pair.device_a)
    snip_b = dataset.audio.get(pair.device_b)
    if snip_a is None or snip_b is None:
        return None
    xa = snip_a.slice_ms(start, stop)
    xb = snip_b.slice_ms(start, stop)
    expected = (stop - start) * snip_a.rate_hz // 1000
    n = min(xa.samples.size, xb.samples.size)
    if n < expected:
        return None
    try:
        return audio_features(xa.as_float()[:n], xb.as_float()[:n])
    except UndefinedCorrelation:
        return None


def ml_arrays(rows: list[TruongFeatureVector]) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    """Feature matrix (NaN for missing), 0/1 labels, and column names."""
    X = np.array([[np.nan if v is None else v for v in row.values()] for row in rows])
    y = np.array([1 if row.label is Label.COLOCATED else 0 for row in rows], dtype=np.uint8)
    return X, y, ALL_FEATURES


def build_dataset(pairs: list[IntervalPair], dataset: Dataset, t: int,
                  theta: float = THETA_DEFAULT) -> list[TruongFeatureVector]:
    """One labeled feature vector per pair-interval."""
    rows = []
    for pair in pairs:
        start = pair.interval_start
        stop = start + t * 1000
        wifi = _beacon_slots(dataset, pair, "wifi", theta, start, stop)
        ble = _beacon_slots(dataset, pair, "ble", theta, start, stop)
        audio = _audio_slots(dataset, pair, start, stop)
        rows.append(TruongFeatureVector(
            device_a=pair.device_a,
            device_b=pair.device_b,
            interval_start=start,
            interval_len_s=t,
            wifi_jaccard=wifi.jaccard if wifi else None,
            wifi_mean_hamming=wifi.mean_hamming if wifi else None,
            wifi_euclidean=wifi.euclidean if wifi else None,
            wifi_mean_exp=wifi.mean_exp if wifi else None,
            wifi_sum_sq_ranks=wifi.sum_sq_ranks if wifi else None,
            ble_jaccard=ble.jaccard if ble else None,
            ble_euclidean=ble.euclidean if ble else None,
            audio_max_xcorr=audio.max_xcorr if audio else None,
            audio_tf_distance=audio.tf_distance if audio else None,
            label=pair.label,
        ))
    return rows
