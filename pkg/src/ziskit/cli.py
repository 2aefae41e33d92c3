"""Command-line entry point: datagen, align, features, evaluate, ml, robustness.

Exit codes: 0 success, 1 usage error, 2 data error. An optional JSON config
file supplies flag defaults; explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from ziskit import datagen, dsp, evaluation, pipeline, randomness
from ziskit.core.io import load_dataset
from ziskit.core.types import EvaluationRecord
from ziskit.core.windowing import filter_subscenario
from ziskit.errors import DegenerateLabels, ZisError
from ziskit.ml import ensemble
from ziskit.schemes import karapanos, miettinen, shrestha, truong

SCHEMES = ("karapanos", "schurmann", "miettinen", "truong", "shrestha")

RESULTS_HEADER = ["scheme", "scenario", "subscenario", "t", "eer", "starred",
                  "threshold", "availability"]
CURVE_HEADER = ["far_target", "frr"]
ROBUSTNESS_HEADER = ["scheme", "subscenario", "t", "threshold", "far", "frr",
                     "delta_far", "delta_frr"]
METRICS_HEADER = ["model_id", "auc", "eer", "accuracy"]

DEFAULT_FAR_TARGETS = "0.001,0.005,0.01,0.05"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> tuple[_Parser, dict[str, _Parser]]:
    parser = _Parser(prog="ziskit", description=__doc__)
    subs = parser.add_subparsers(dest="command")
    registry: dict[str, _Parser] = {}

    def sub(name: str, **kwargs) -> _Parser:
        sp = subs.add_parser(name, **kwargs)
        sp.add_argument("--config", type=Path, help="JSON file with flag defaults")
        registry[name] = sp
        return sp

    p = sub("datagen", help="generate a synthetic scenario")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration-s", type=int, default=600)
    p.add_argument("--groups", default="3,3", help="comma-separated group sizes")
    p.add_argument("--leakage", type=float, default=0.1)
    p.add_argument("--event-rate", type=float, default=30.0)
    p.add_argument("--event-band", default="300,3500")
    p.add_argument("--noise-floor-db", type=float, default=45.0)
    p.add_argument("--beacon-population", type=int, default=12)
    p.add_argument("--beacon-dropout", type=float, default=0.1)

    p = sub("align", help="report pairwise audio lags")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--probe-s", type=float, default=60.0)
    p.add_argument("--maxlag-s", type=float, default=3.0)

    p = sub("features", help="compute per-scheme context features")
    p.add_argument("--scheme", choices=SCHEMES, required=True)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--t", type=int, default=10)
    p.add_argument("--maxlag-s", type=float, default=1.0)
    p.add_argument("--power-db", type=float, default=karapanos.DEFAULT_POWER_DB)
    p.add_argument("--theta", type=float, default=truong.THETA_DEFAULT)
    p.add_argument("--bits", type=int, default=16)
    p.add_argument("--source", choices=("noise", "luminosity"), default="noise")
    p.add_argument("--delta-rel", type=float, default=0.1)
    p.add_argument("--delta-abs", type=float, default=10.0)
    p.add_argument("--measurement-window-s", type=float, default=1.0)
    p.add_argument("--with-surprisal", action="store_true",
                   help="fit a surprisal model on the corpus and emit the column")

    p = sub("fingerprint-randomness", help="random-walk and bit statistics")
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--sub-len", type=int, default=0,
                   help="also analyze contiguous sub-fingerprints of this length")

    p = sub("evaluate", help="EER / FAR-FRR evaluation of features or scores")
    p.add_argument("--scheme", choices=SCHEMES + ("scores",), required=True)
    p.add_argument("--features", type=Path)
    p.add_argument("--scores", type=Path, help="prediction CSV for ML schemes")
    p.add_argument("--dataset", type=Path, help="dataset dir for ground-truth labels")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--scenario", default="scenario")
    p.add_argument("--far-targets", default=DEFAULT_FAR_TARGETS)
    p.add_argument("--surprisal-threshold", type=float, default=None)

    p = sub("robustness", help="apply scenario A thresholds to scenario B scores")
    p.add_argument("--results", type=Path, required=True, help="results.csv of scenario A")
    p.add_argument("--scheme", choices=SCHEMES + ("scores",), required=True)
    p.add_argument("--features", type=Path)
    p.add_argument("--scores", type=Path)
    p.add_argument("--dataset", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--surprisal-threshold", type=float, default=None)

    p = sub("ml", help="train or apply a colocation classifier")
    ml_subs = p.add_subparsers(dest="ml_command")
    pt = ml_subs.add_parser("train")
    registry["ml train"] = pt
    pt.add_argument("--config", type=Path)
    pt.add_argument("--features", type=Path, required=True)
    pt.add_argument("--scheme", choices=("truong", "shrestha"), required=True)
    pt.add_argument("--kind", choices=("auto", "forest", "boosting"), default="auto")
    pt.add_argument("--grid", choices=("full", "small"), default="full")
    pt.add_argument("--seed", type=int, default=ensemble.DEFAULT_SEED)
    pt.add_argument("--early-stop", type=int, default=ensemble.DEFAULT_EARLY_STOP_ROUNDS)
    pt.add_argument("--folds", type=int, default=10)
    pt.add_argument("--out", type=Path, required=True)
    pt.add_argument("--predictions", type=Path)
    pt.add_argument("--metrics", type=Path)
    pp = ml_subs.add_parser("predict")
    registry["ml predict"] = pp
    pp.add_argument("--config", type=Path)
    pp.add_argument("--model", type=Path, required=True)
    pp.add_argument("--features", type=Path, required=True)
    pp.add_argument("--scheme", choices=("truong", "shrestha"), required=True)
    pp.add_argument("--out", type=Path, required=True)

    return parser, registry


def _apply_config(argv: list[str], registry: dict[str, _Parser]) -> None:
    """Config file values become flag defaults; explicit flags still win."""
    if "--config" not in argv:
        return
    path = Path(argv[argv.index("--config") + 1])
    defaults = json.loads(path.read_text(encoding="utf-8"))
    key = argv[0] if argv else ""
    if len(argv) > 1 and f"{argv[0]} {argv[1]}" in registry:
        key = f"{argv[0]} {argv[1]}"
    if key not in registry:
        return
    parser = registry[key]
    mapped = {k.replace("-", "_"): v for k, v in defaults.items()}
    parser.set_defaults(**mapped)
    for action in parser._actions:
        if action.dest in mapped:
            # a config-supplied value satisfies required flags
            action.required = False
            if action.type is Path:
                action.default = Path(mapped[action.dest])


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_datagen(args) -> int:
    sizes = [int(s) for s in args.groups.split(",") if s]
    lo, hi = (float(v) for v in args.event_band.split(","))
    profile = datagen.AmbientProfile(
        event_rate_per_min=args.event_rate,
        event_band_hz=(lo, hi),
        noise_floor_db=args.noise_floor_db,
        beacon_population=args.beacon_population,
        beacon_dropout=args.beacon_dropout,
        leakage=args.leakage,
    )
    cfg = datagen.ScenarioConfig(
        seed=args.seed, duration_s=args.duration_s,
        groups=tuple(datagen.GroupSpec(size, profile) for size in sizes))
    datagen.generate(cfg, args.out)
    print(f"wrote scenario to {args.out}")
    return 0


def _cmd_align(args) -> int:
    dataset = load_dataset(args.dataset)
    devices = sorted(dataset.audio)
    report = []
    for i, dev_a in enumerate(devices):
        for dev_b in devices[i + 1:]:
            result = dsp.align(dataset.audio[dev_a], dataset.audio[dev_b],
                               probe_len_s=args.probe_s, maxlag_s=args.maxlag_s)
            rate = dataset.audio[dev_a].rate_hz
            report.append({
                "device_a": dev_a, "device_b": dev_b,
                "lag_samples": result.lag_samples,
                "lag_s": result.lag_samples / rate,
                "trimmed_len": result.trimmed_len,
            })
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps({"pairs": report}, indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
    print(f"wrote {len(report)} pair lags to {args.out}")
    return 0


def _cmd_features(args) -> int:
    dataset = load_dataset(args.dataset)
    if args.scheme == "karapanos":
        cfg = karapanos.KarapanosConfig(interval_s=args.t, maxlag_s=args.maxlag_s,
                                        power_threshold_db=args.power_db)
        records = pipeline.karapanos_records(dataset, args.t, cfg)
        pipeline.write_score_csv(args.out, records)
    elif args.scheme == "schurmann":
        fingerprints = pipeline.schurmann_fingerprints(dataset, args.t)
        pipeline.write_fingerprint_csv(args.out, fingerprints, args.t)
    elif args.scheme == "miettinen":
        cfg = miettinen.MiettinenConfig(
            snapshot_s=args.t, bits=args.bits, delta_rel=args.delta_rel,
            delta_abs=args.delta_abs, measurement_window_s=args.measurement_window_s)
        fingerprints = pipeline.miettinen_fingerprints(dataset, cfg, source=args.source)
        surprisals = None
        if args.with_surprisal and fingerprints:
            model = miettinen.SurprisalModel.fit(fingerprints)
            surprisals = [miettinen.surprisal(fp, model) for fp in fingerprints]
        pipeline.write_fingerprint_csv(args.out, fingerprints,
                                       args.bits * args.t, surprisals=surprisals)
    elif args.scheme == "truong":
        rows = pipeline.truong_rows(dataset, args.t, theta=args.theta)
        pipeline.write_truong_csv(args.out, rows)
    else:
        rows = shrestha.compress_instances(shrestha.build_dataset(dataset))
        pipeline.write_shrestha_csv(args.out, rows)
    print(f"wrote {args.scheme} features to {args.out}")
    return 0


def _cmd_fingerprint_randomness(args) -> int:
    fingerprints, _, _ = pipeline.read_fingerprint_csv(args.features, scheme="any")
    if not fingerprints:
        raise ZisError("no records in fingerprint file")
    walk = randomness.random_walk(fingerprints)
    markov = randomness.markov_stats(fingerprints)
    report = {"random_walk": walk.to_dict(), "markov": markov.to_dict()}
    if args.sub_len:
        chunks_by_pos: dict[int, list] = {}
        for fp in fingerprints:
            for pos, chunk in enumerate(randomness.split_subfingerprints(fp, args.sub_len)):
                chunks_by_pos.setdefault(pos, []).append(chunk)
        report["subfingerprints"] = [
            {"position": pos, **randomness.random_walk(chunks).to_dict()}
            for pos, chunks in sorted(chunks_by_pos.items())
        ]
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
    print(f"wrote randomness report to {args.out}")
    return 0


def _load_records(args) -> list[EvaluationRecord]:
    if args.scheme in ("truong", "shrestha", "scores"):
        if not args.scores:
            raise _UsageError(f"--scores is required for scheme {args.scheme}")
        return pipeline.read_prediction_csv(args.scores)
    if not args.features or not args.dataset:
        raise _UsageError("--features and --dataset are required for this scheme")
    dataset = load_dataset(args.dataset)
    if args.scheme == "karapanos":
        return pipeline.read_score_csv(args.features, dataset.ground_truth)
    fingerprints, surprisals, spans = pipeline.read_fingerprint_csv(
        args.features, scheme=args.scheme)
    return pipeline.fingerprint_records(
        fingerprints, spans, dataset.ground_truth, surprisals=surprisals,
        surprisal_threshold=args.surprisal_threshold)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _cmd_evaluate(args) -> int:
    records = _load_records(args)
    if not records:
        raise ZisError("no records to evaluate")
    far_targets = [float(v) for v in args.far_targets.split(",") if v]
    ground_truth = load_dataset(args.dataset).ground_truth if args.dataset else None
    sub_names = [s.name for s in ground_truth.subscenarios] if ground_truth else []
    out_rows = []
    t_values = sorted({r.interval_len_s for r in records})
    for t in t_values:
        at_t = [r for r in records if r.interval_len_s == t]
        for sub in [None] + sub_names:
            subset = at_t if sub is None else filter_subscenario(at_t, ground_truth, sub)
            scores, labels = evaluation.usable_scores(subset)
            avail = evaluation.availability(subset)
            try:
                rates = evaluation.equal_error_rate(scores, labels)
            except (DegenerateLabels, ValueError):
                continue
            sub_name = sub or "full"
            out_rows.append([args.scheme, args.scenario, sub_name, t,
                             repr(rates.eer), int(rates.starred),
                             repr(rates.threshold), repr(avail)])
            curve = evaluation.frr_at_far(scores, labels, far_targets=far_targets)
            _write_csv(args.out / "curves" / f"{args.scheme}_{sub_name}_t{t}.csv",
                       CURVE_HEADER, [[repr(ft), repr(frr)] for ft, frr in curve])
    if not out_rows:
        raise ZisError("no records with both classes present")
    _write_csv(args.out / "results.csv", RESULTS_HEADER, out_rows)
    print(f"wrote {len(out_rows)} result rows to {args.out / 'results.csv'}")
    return 0


def _cmd_robustness(args) -> int:
    records = _load_records(args)
    if not records:
        raise ZisError("no records to evaluate")
    out_rows = []
    with open(args.results, "r", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            t = int(row["t"])
            at_t = [r for r in records if r.interval_len_s == t]
            scores, labels = evaluation.usable_scores(at_t)
            if scores.size == 0:
                continue
            threshold = float(row["threshold"])
            try:
                result = evaluation.cross_apply(threshold, evaluation.ACCEPT_IF_GEQ,
                                                scores, labels)
            except DegenerateLabels:
                continue
            out_rows.append([row["scheme"], row["subscenario"], t, repr(threshold),
                             repr(result.far), repr(result.frr),
                             repr(result.delta_far), repr(result.delta_frr)])
    if not out_rows:
        raise ZisError("no overlapping configurations between results and scores")
    _write_csv(args.out, ROBUSTNESS_HEADER, out_rows)
    print(f"wrote {len(out_rows)} robustness rows to {args.out}")
    return 0


def _ml_dataset(args) -> tuple[ensemble.MLDataset, list[EvaluationRecord]]:
    if args.scheme == "truong":
        rows = pipeline.read_truong_csv(args.features)
        X, y, names = truong.ml_arrays(rows)
        data = ensemble.MLDataset(X, y, feature_names=names)
        meta = [EvaluationRecord(r.device_a, r.device_b, r.interval_start,
                                 r.interval_len_s, r.label, None) for r in rows]
    else:
        rows = pipeline.read_shrestha_csv(args.features)
        X, y, w, names = shrestha.ml_arrays(rows)
        data = ensemble.MLDataset(X, y, w, feature_names=names)
        meta = [EvaluationRecord(r.device_a, r.device_b, r.timestamp_ms, 0,
                                 r.label, None) for r in rows]
    if not len(meta):
        raise ZisError("no records in feature file")
    return data, meta


def _cmd_ml_train(args) -> int:
    data, meta = _ml_dataset(args)
    grid = ensemble.GRID_FULL if args.grid == "full" else ensemble.GRID_SMALL
    model = ensemble.train(data, kind=args.kind, grid=grid, seed=args.seed,
                           early_stop_rounds=args.early_stop, cv_folds=args.folds)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(model.to_json() + "\n", encoding="utf-8")
    scores = ensemble.oof_predictions(data, model.params, seed=args.seed, k=args.folds)
    if args.predictions:
        records = [EvaluationRecord(m.device_a, m.device_b, m.interval_start,
                                    m.interval_len_s, m.label, float(s))
                   for m, s in zip(meta, scores)]
        pipeline.write_prediction_csv(args.predictions, records)
    if args.metrics:
        labels = data.y.astype(int)
        cv_auc = ensemble.auc(scores, labels, data.weights)
        rates = evaluation.equal_error_rate(scores, labels)
        accepted = scores >= rates.threshold
        correct = np.where(labels == 1, accepted, ~accepted)
        accuracy = float(np.sum(correct * data.weights) / np.sum(data.weights))
        model_id = (f"{model.kind}-n{model.params.n_trees}-d{model.params.max_depth}"
                    f"-lr{model.params.learning_rate}-s{args.seed}")
        _write_csv(args.metrics, METRICS_HEADER,
                   [[model_id, repr(cv_auc), repr(rates.eer), repr(accuracy)]])
    print(f"trained {model.kind} model (cv_auc={model.cv_auc:.4f}) -> {args.out}")
    return 0


def _cmd_ml_predict(args) -> int:
    data, meta = _ml_dataset(args)
    model = ensemble.TrainedModel.from_json(args.model.read_text(encoding="utf-8"))
    scores = model.predict(data.X)
    records = [EvaluationRecord(m.device_a, m.device_b, m.interval_start,
                                m.interval_len_s, m.label, float(s))
               for m, s in zip(meta, scores)]
    pipeline.write_prediction_csv(args.out, records)
    print(f"wrote {len(records)} predictions to {args.out}")
    return 0


_HANDLERS = {
    "datagen": _cmd_datagen,
    "align": _cmd_align,
    "features": _cmd_features,
    "fingerprint-randomness": _cmd_fingerprint_randomness,
    "evaluate": _cmd_evaluate,
    "robustness": _cmd_robustness,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, registry = build_parser()
    try:
        _apply_config(argv, registry)
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            return 1
        if args.command == "ml":
            if not args.ml_command:
                raise _UsageError("ml requires a subcommand: train or predict")
            handler = _cmd_ml_train if args.ml_command == "train" else _cmd_ml_predict
        else:
            handler = _HANDLERS[args.command]
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return handler(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ZisError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
