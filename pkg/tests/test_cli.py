import csv
import hashlib
import json
from pathlib import Path

import pytest

from ziskit.cli import main

pytestmark = pytest.mark.usefixtures("scenario_dir")


@pytest.fixture(scope="module")
def scenario_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "scen"
    code = main(["datagen", "--out", str(out), "--seed", "21", "--duration-s", "60",
                 "--groups", "2,2", "--leakage", "0.1"])
    assert code == 0
    return out


def run_ok(argv):
    assert main(argv) == 0


def digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_no_args_prints_usage(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_flag_is_usage_error(capsys):
    assert main(["datagen", "--nope"]) == 1


def test_missing_dataset_is_data_error(tmp_path, capsys):
    code = main(["features", "--scheme", "karapanos",
                 "--dataset", str(tmp_path / "absent"),
                 "--out", str(tmp_path / "x.csv")])
    assert code == 2
    assert "error" in capsys.readouterr().err.lower()


def test_full_pipeline_golden_headers(scenario_dir, tmp_path):
    kara = tmp_path / "kara.csv"
    run_ok(["features", "--scheme", "karapanos", "--dataset", str(scenario_dir),
            "--out", str(kara), "--t", "10"])
    with open(kara) as fh:
        assert fh.readline().strip() == "pair_id,interval_start_ms,t,score,gated"

    out = tmp_path / "eval"
    run_ok(["evaluate", "--scheme", "karapanos", "--features", str(kara),
            "--dataset", str(scenario_dir), "--out", str(out),
            "--scenario", "synthetic"])
    results = out / "results.csv"
    assert results.exists()
    with open(results) as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["scheme"] == "karapanos"
    assert set(rows[0]) == {"scheme", "scenario", "subscenario", "t", "eer",
                            "starred", "threshold", "availability"}
    subnames = {r["subscenario"] for r in rows}
    assert subnames == {"full", "first_half", "second_half"}
    curve = out / "curves" / "karapanos_full_t10.csv"
    with open(curve) as fh:
        assert fh.readline().strip() == "far_target,frr"


def test_evaluate_empty_features_exits_2(tmp_path, capsys, scenario_dir):
    empty = tmp_path / "empty.csv"
    empty.write_text("pair_id,interval_start_ms,t,score,gated\n")
    code = main(["evaluate", "--scheme", "karapanos", "--features", str(empty),
                 "--dataset", str(scenario_dir), "--out", str(tmp_path / "out")])
    assert code == 2
    assert "no records" in capsys.readouterr().err


def test_features_idempotent(scenario_dir, tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    for out in (a, b):
        run_ok(["features", "--scheme", "schurmann", "--dataset", str(scenario_dir),
                "--out", str(out), "--t", "10"])
    assert digest(a) == digest(b)


def test_fingerprint_randomness_report(scenario_dir, tmp_path):
    fps = tmp_path / "fp.csv"
    run_ok(["features", "--scheme", "schurmann", "--dataset", str(scenario_dir),
            "--out", str(fps), "--t", "10"])
    report = tmp_path / "rand.json"
    run_ok(["fingerprint-randomness", "--features", str(fps), "--out", str(report),
            "--sub-len", "31"])
    doc = json.loads(report.read_text())
    assert 0.0 <= doc["random_walk"]["tv_distance"] <= 1.0
    assert len(doc["subfingerprints"]) == 16
    assert len(doc["markov"]["p_one"]) == 496


def test_miettinen_features_with_surprisal(scenario_dir, tmp_path):
    fps = tmp_path / "miet.csv"
    run_ok(["features", "--scheme", "miettinen", "--dataset", str(scenario_dir),
            "--out", str(fps), "--t", "5", "--bits", "8",
            "--delta-rel", "0.05", "--delta-abs", "5", "--with-surprisal"])
    with open(fps) as fh:
        header = fh.readline().strip()
        assert header == "device_id,interval_start_ms,t,hex_bits,surprisal_bits"
    run_ok(["evaluate", "--scheme", "miettinen", "--features", str(fps),
            "--dataset", str(scenario_dir), "--out", str(tmp_path / "eval_miet")])


def test_ml_train_predict_cycle(scenario_dir, tmp_path):
    feats = tmp_path / "truong.csv"
    run_ok(["features", "--scheme", "truong", "--dataset", str(scenario_dir),
            "--out", str(feats), "--t", "10"])
    model = tmp_path / "model.json"
    preds = tmp_path / "preds.csv"
    metrics = tmp_path / "metrics.csv"
    run_ok(["ml", "train", "--features", str(feats), "--scheme", "truong",
            "--grid", "small", "--folds", "3", "--out", str(model),
            "--predictions", str(preds), "--metrics", str(metrics)])
    assert json.loads(model.read_text())["params"]["kind"] in ("forest", "boosting")
    with open(metrics) as fh:
        assert fh.readline().strip() == "model_id,auc,eer,accuracy"
    run_ok(["evaluate", "--scheme", "truong", "--scores", str(preds),
            "--dataset", str(scenario_dir), "--out", str(tmp_path / "eval_truong")])
    preds2 = tmp_path / "preds2.csv"
    run_ok(["ml", "predict", "--model", str(model), "--features", str(feats),
            "--scheme", "truong", "--out", str(preds2)])
    assert preds2.exists()


def test_ml_determinism_same_seed(scenario_dir, tmp_path):
    feats = tmp_path / "shr.csv"
    run_ok(["features", "--scheme", "shrestha", "--dataset", str(scenario_dir),
            "--out", str(feats)])
    models = []
    for name in ("m1.json", "m2.json"):
        out = tmp_path / name
        run_ok(["ml", "train", "--features", str(feats), "--scheme", "shrestha",
                "--grid", "small", "--folds", "3", "--seed", "1619",
                "--out", str(out)])
        models.append(digest(out))
    assert models[0] == models[1]


def test_robustness_self_application(scenario_dir, tmp_path):
    kara = tmp_path / "kara.csv"
    run_ok(["features", "--scheme", "karapanos", "--dataset", str(scenario_dir),
            "--out", str(kara), "--t", "10"])
    out = tmp_path / "eval"
    run_ok(["evaluate", "--scheme", "karapanos", "--features", str(kara),
            "--dataset", str(scenario_dir), "--out", str(out)])
    robust = tmp_path / "robust.csv"
    run_ok(["robustness", "--results", str(out / "results.csv"),
            "--scheme", "karapanos", "--features", str(kara),
            "--dataset", str(scenario_dir), "--out", str(robust)])
    with open(robust) as fh:
        rows = list(csv.DictReader(fh))
    full = [r for r in rows if r["subscenario"] == "full"]
    assert full
    # A = B: deltas vanish
    assert float(full[0]["delta_far"]) == 0.0
    assert float(full[0]["delta_frr"]) == 0.0


def test_align_report(scenario_dir, tmp_path):
    out = tmp_path / "lags.json"
    run_ok(["align", "--dataset", str(scenario_dir), "--out", str(out),
            "--probe-s", "30", "--maxlag-s", "1"])
    doc = json.loads(out.read_text())
    assert len(doc["pairs"]) == 6
    for pair in doc["pairs"]:
        assert pair["lag_samples"] == 0  # generator emits aligned audio


def test_config_file_defaults_and_flag_override(scenario_dir, tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"t": 10, "out": str(tmp_path / "from_config.csv")}))
    run_ok(["features", "--config", str(config), "--scheme", "schurmann",
            "--dataset", str(scenario_dir)])
    assert (tmp_path / "from_config.csv").exists()
    # explicit flag wins over the config value
    run_ok(["features", "--config", str(config), "--scheme", "schurmann",
            "--dataset", str(scenario_dir), "--out", str(tmp_path / "explicit.csv")])
    assert (tmp_path / "explicit.csv").exists()
