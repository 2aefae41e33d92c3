"""Feature pipelines and their on-disk CSV formats.

Connects the scheme modules to datasets: windows pairs, computes per-scheme
records, and reads/writes the CSV formats consumed by `evaluate`, `ml` and
`fingerprint-randomness`. Interval-level work runs through a thread map
capped by the ZIS_THREADS environment variable.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

from ziskit.core.types import (
    Dataset,
    EvaluationRecord,
    Fingerprint,
    GroundTruth,
    IntervalPair,
    Label,
)
from ziskit.core.windowing import window_pairs
from ziskit.errors import InsufficientSamples, ParseError
from ziskit.schemes import karapanos, miettinen, schurmann, shrestha, truong


def thread_count() -> int:
    raw = os.environ.get("ZIS_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return max(1, os.cpu_count() or 1)


def pmap(fn: Callable, items: Sequence) -> list:
    """Order-preserving parallel map honoring ZIS_THREADS."""
    workers = thread_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _group_by_interval(pairs: list[IntervalPair]) -> dict[int, list[IntervalPair]]:
    grouped: dict[int, list[IntervalPair]] = {}
    for pair in pairs:
        grouped.setdefault(pair.interval_start, []).append(pair)
    return grouped


# ---------------------------------------------------------------------------
# Karapanos: per-pair similarity scores
# ---------------------------------------------------------------------------

def karapanos_records(dataset: Dataset, t: int,
                      cfg: karapanos.KarapanosConfig) -> list[EvaluationRecord]:
    """Similarity score per pair-interval; band filtering is shared per device."""
    pairs = window_pairs(dataset, t)
    grouped = sorted(_group_by_interval(pairs).items())

    def one_interval(item: tuple[int, list[IntervalPair]]) -> list[EvaluationRecord]:
        start, interval_pairs = item
        stop = start + t * 1000
        expected = t * 1000 * next(iter(dataset.audio.values())).rate_hz // 1000 \
            if dataset.audio else 0
        decomposed: dict[str, karapanos.BandedSnippet | None] = {}
        for device in sorted({d for p in interval_pairs for d in (p.device_a, p.device_b)}):
            snip = dataset.audio.get(device)
            chunk = snip.slice_ms(start, stop) if snip is not None else None
            if chunk is None or chunk.samples.size < expected or chunk.samples.size == 0:
                decomposed[device] = None
            else:
                decomposed[device] = karapanos.band_decompose(chunk, cfg)
        records = []
        for pair in interval_pairs:
            a = decomposed[pair.device_a]
            b = decomposed[pair.device_b]
            if a is None or b is None:
                records.append(EvaluationRecord(pair.device_a, pair.device_b, start, t,
                                                pair.label, score=None, gated=True))
                continue
            score = karapanos.similarity_banded(a, b, cfg, two_sided=True)
            records.append(EvaluationRecord(pair.device_a, pair.device_b, start, t,
                                            pair.label, score=score.value,
                                            gated=score.gated))
        return records

    out: list[EvaluationRecord] = []
    for chunk in pmap(one_interval, grouped):
        out.extend(chunk)
    return out


SCORE_HEADER = ["pair_id", "interval_start_ms", "t", "score", "gated"]


def write_score_csv(path: Path, records: list[EvaluationRecord]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCORE_HEADER)
        for r in records:
            writer.writerow([r.pair_id, r.interval_start, r.interval_len_s,
                             _fmt(r.score), int(r.gated)])


def read_score_csv(path: Path, ground_truth: GroundTruth) -> list[EvaluationRecord]:
    records = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            try:
                dev_a, dev_b = row["pair_id"].split("|")
                start = int(row["interval_start_ms"])
                t = int(row["t"])
                gated = bool(int(row["gated"]))
                score = None if row["score"] == "" else float(row["score"])
            except (KeyError, ValueError) as exc:
                raise ParseError(f"bad score row: {exc}", path=str(path), line=lineno) from exc
            label = ground_truth.label_for(dev_a, dev_b, start, start + t * 1000)
            if label is None:
                continue
            records.append(EvaluationRecord(dev_a, dev_b, start, t, label, score, gated))
    return records


# ---------------------------------------------------------------------------
# Fingerprint schemes: per-device fingerprints, compared pairwise
# ---------------------------------------------------------------------------

def schurmann_fingerprints(dataset: Dataset, t: int,
                           cfg: schurmann.SchurmannConfig | None = None
                           ) -> list[Fingerprint]:
    cfg = cfg or schurmann.SchurmannConfig(interval_s=t)
    span = _common_span(dataset)
    if span is None:
        return []
    epoch, end = span
    step = t * 1000
    jobs = []
    for device in sorted(dataset.audio):
        start = epoch
        while start + step <= end:
            jobs.append((device, start))
            start += step

    def one(job: tuple[str, int]) -> Fingerprint | None:
        device, start = job
        chunk = dataset.audio[device].slice_ms(start, start + step)
        try:
            return schurmann.audio_fingerprint(chunk, cfg)
        except InsufficientSamples:
            return None

    return [fp for fp in pmap(one, jobs) if fp is not None]


def miettinen_fingerprints(dataset: Dataset, cfg: miettinen.MiettinenConfig,
                           source: str = "noise") -> list[Fingerprint]:
    """Noise-level pipeline windows audio; luminosity uses raw readings."""
    from ziskit.core.types import SensorKind

    out: list[Fingerprint] = []
    if source == "noise":
        for device in sorted(dataset.audio):
            series = miettinen.noise_levels(dataset.audio[device],
                                            cfg.measurement_window_s)
            out.extend(miettinen.iter_fingerprints(series, cfg))
    elif source == "luminosity":
        for device in sorted(dataset.sensors):
            series = dataset.sensors[device].get(SensorKind.LUMINOSITY)
            if series is not None and len(series):
                out.extend(miettinen.iter_fingerprints(series, cfg))
    else:
        raise ValueError(f"unknown fingerprint source {source!r}")
    return out


FINGERPRINT_HEADER = ["device_id", "interval_start_ms", "t", "hex_bits"]


def write_fingerprint_csv(path: Path, fingerprints: list[Fingerprint], t: int,
                          surprisals: list[float] | None = None) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    header = FINGERPRINT_HEADER + (["surprisal_bits"] if surprisals is not None else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, fp in enumerate(fingerprints):
            row = [fp.device_id, fp.interval_start, t, fp.to_hex()]
            if surprisals is not None:
                row.append(_fmt(surprisals[i]))
            writer.writerow(row)


def read_fingerprint_csv(path: Path, scheme: str, n_bits: int | None = None
                         ) -> tuple[list[Fingerprint], list[float | None], list[int]]:
    """Fingerprints plus optional surprisal column and per-row interval lengths."""
    fingerprints, surprisals, spans = [], [], []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            try:
                bits = n_bits if n_bits is not None else len(row["hex_bits"]) * 4
                fingerprints.append(Fingerprint.from_hex(
                    row["hex_bits"], bits, scheme, row["device_id"],
                    int(row["interval_start_ms"])))
                spans.append(int(row["t"]))
                raw = row.get("surprisal_bits", "")
                surprisals.append(float(raw) if raw else None)
            except (KeyError, ValueError) as exc:
                raise ParseError(f"bad fingerprint row: {exc}",
                                 path=str(path), line=lineno) from exc
    return fingerprints, surprisals, spans


def fingerprint_records(fingerprints: list[Fingerprint], spans: list[int],
                        ground_truth: GroundTruth,
                        surprisals: list[float | None] | None = None,
                        surprisal_threshold: float | None = None
                        ) -> list[EvaluationRecord]:
    """Pairwise Hamming similarity of co-timed fingerprints, labeled."""
    by_start: dict[tuple[int, int], list[int]] = {}
    for i, fp in enumerate(fingerprints):
        by_start.setdefault((fp.interval_start, spans[i]), []).append(i)
    records = []
    for (start, span), idxs in sorted(by_start.items()):
        for pos, i in enumerate(idxs):
            for j in idxs[pos + 1:]:
                a, b = fingerprints[i], fingerprints[j]
                if a.device_id == b.device_id:
                    continue
                dev_a, dev_b = sorted((a.device_id, b.device_id))
                label = ground_truth.label_for(dev_a, dev_b, start, start + span * 1000)
                if label is None:
                    continue
                gated = False
                if surprisal_threshold is not None and surprisals is not None:
                    s_i, s_j = surprisals[i], surprisals[j]
                    gated = (s_i is not None and s_i <= surprisal_threshold) or \
                            (s_j is not None and s_j <= surprisal_threshold)
                score = None if gated else schurmann.fingerprint_similarity(a, b)
                records.append(EvaluationRecord(dev_a, dev_b, start, span, label,
                                                score, gated=gated))
    return records


# ---------------------------------------------------------------------------
# Truong / Shrestha feature tables
# ---------------------------------------------------------------------------

TRUONG_HEADER = (["pair_id", "interval_start_ms", "t"]
                 + list(truong.ALL_FEATURES) + ["label"])


def truong_rows(dataset: Dataset, t: int, theta: float = truong.THETA_DEFAULT
                ) -> list[truong.TruongFeatureVector]:
    pairs = [p for p in window_pairs(dataset, t)]
    return truong.build_dataset(pairs, dataset, t, theta=theta)


def write_truong_csv(path: Path, rows: list[truong.TruongFeatureVector]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRUONG_HEADER)
        for row in rows:
            writer.writerow([row.pair_id, row.interval_start, row.interval_len_s]
                            + [_fmt(v) for v in row.values()] + [row.label.value])


def read_truong_csv(path: Path) -> list[truong.TruongFeatureVector]:
    rows = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for lineno, raw in enumerate(reader, start=2):
            try:
                dev_a, dev_b = raw["pair_id"].split("|")
                slots = {name: (None if raw[name] == "" else float(raw[name]))
                         for name in truong.ALL_FEATURES}
                rows.append(truong.TruongFeatureVector(
                    device_a=dev_a, device_b=dev_b,
                    interval_start=int(raw["interval_start_ms"]),
                    interval_len_s=int(raw["t"]),
                    label=Label(raw["label"]), **slots))
            except (KeyError, ValueError) as exc:
                raise ParseError(f"bad feature row: {exc}", path=str(path),
                                 line=lineno) from exc
    return rows


SHRESTHA_HEADER = ["pair_id", "timestamp_ms", "d_temp", "d_hum", "d_alt",
                   "label", "weight"]


def write_shrestha_csv(path: Path, rows: list[shrestha.ShresthaFeatureVector]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SHRESTHA_HEADER)
        for row in rows:
            writer.writerow([row.pair_id, row.timestamp_ms,
                             _fmt(row.d_temperature), _fmt(row.d_humidity),
                             _fmt(row.d_altitude), row.label.value, row.weight])


def read_shrestha_csv(path: Path) -> list[shrestha.ShresthaFeatureVector]:
    rows = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for lineno, raw in enumerate(reader, start=2):
            try:
                dev_a, dev_b = raw["pair_id"].split("|")
                rows.append(shrestha.ShresthaFeatureVector(
                    device_a=dev_a, device_b=dev_b,
                    timestamp_ms=int(raw["timestamp_ms"]),
                    d_temperature=None if raw["d_temp"] == "" else float(raw["d_temp"]),
                    d_humidity=None if raw["d_hum"] == "" else float(raw["d_hum"]),
                    d_altitude=None if raw["d_alt"] == "" else float(raw["d_alt"]),
                    label=Label(raw["label"]),
                    weight=int(raw["weight"])))
            except (KeyError, ValueError) as exc:
                raise ParseError(f"bad feature row: {exc}", path=str(path),
                                 line=lineno) from exc
    return rows


# ---------------------------------------------------------------------------
# Generic score files (ML predictions)
# ---------------------------------------------------------------------------

PREDICTION_HEADER = ["pair_id", "interval_start_ms", "t", "score", "label"]


def write_prediction_csv(path: Path, records: list[EvaluationRecord]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PREDICTION_HEADER)
        for r in records:
            writer.writerow([r.pair_id, r.interval_start, r.interval_len_s,
                             _fmt(r.score), r.label.value])


def read_prediction_csv(path: Path) -> list[EvaluationRecord]:
    records = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            try:
                dev_a, dev_b = row["pair_id"].split("|")
                records.append(EvaluationRecord(
                    dev_a, dev_b, int(row["interval_start_ms"]), int(row["t"]),
                    Label(row["label"]),
                    None if row["score"] == "" else float(row["score"])))
            except (KeyError, ValueError) as exc:
                raise ParseError(f"bad prediction row: {exc}", path=str(path),
                                 line=lineno) from exc
    return records


def _common_span(dataset: Dataset) -> tuple[int, int] | None:
    from ziskit.core.windowing import dataset_epoch

    return dataset_epoch(dataset)
