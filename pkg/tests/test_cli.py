import json

import pytest

from conftest import sine_noise_prices
from selfsup_labels.cli import main
from selfsup_labels.market_data import PriceSeries, write_csv


@pytest.fixture
def prices_csv(tmp_path):
    path = tmp_path / "prices.csv"
    write_csv(PriceSeries.from_values(sine_noise_prices(n=300), start="2017-01-03"), path)
    return path


@pytest.fixture
def quick_config(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("autoencoder:\n  epochs: 20\n  patience: null\ntau_points: 3\n")
    return path


def test_ingest_and_label(prices_csv, tmp_path, capsys):
    assert main(["ingest", str(prices_csv), "--out", str(tmp_path / "again.csv")]) == 0
    assert "rows=300" in capsys.readouterr().out
    assert (tmp_path / "again.csv").read_bytes() == prices_csv.read_bytes()
    assert main(["label", str(prices_csv), "--tau", "0.01"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "timestamp,return,label,tau,source" and len(out) == 300
    assert main(["label", str(prices_csv), "--tau-grid", "0,0.01,0.05"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "tau,count_up,count_down,count_none"


def test_train_svm_and_indicators(prices_csv, tmp_path, capsys):
    assert main(["train-svm", str(prices_csv), "--tau", "0.02", "--out", str(tmp_path / "svm")]) == 0
    assert "macro_f1=" in capsys.readouterr().out
    assert (tmp_path / "svm" / "model.bin").exists()
    assert (tmp_path / "svm" / "predictions.csv").read_text().startswith("timestamp,actual,predicted")
    sig = tmp_path / "sig.csv"
    assert main(["indicators", str(prices_csv), "--out", str(sig)]) == 0
    assert sig.read_text().startswith("indicator,timestamp,index,price")
    assert main(["diff-signals", str(sig), str(sig), "--markdown", "--out", str(tmp_path / "d")]) == 0
    assert "unmatched_original=0" in capsys.readouterr().out


def test_denoise(prices_csv, quick_config, tmp_path, capsys):
    out = tmp_path / "den"
    assert main(["denoise", str(prices_csv), "--config", str(quick_config), "--out", str(out)]) == 0
    assert "tv_ratio=" in capsys.readouterr().out
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["epochs_run"] == 20


def test_run_and_report_are_reproducible(prices_csv, quick_config, tmp_path):
    args = ["run", "--data", str(prices_csv), "--config", str(quick_config), "--seed", "3",
            "--structure", "ema"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "report.json").read_bytes()
    assert a == (tmp_path / "b" / "report.json").read_bytes()
    report = json.loads(a)
    assert report["seed"] == 3 and report["config"]["features"]["structure"] == "ema_only"
    assert main(["report", str(tmp_path / "a" / "report.json"), "--series",
                 str(tmp_path / "a" / "series.csv"), "--out", str(tmp_path / "c")]) == 0
    for name in ("price_overlay.svg", "f1_vs_tau.svg", "summary.md"):
        assert (tmp_path / "c" / name).read_bytes() == (tmp_path / "a" / name).read_bytes()


def test_usage_errors_exit_1(prices_csv, tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["run", "--tau-grid", "a,b"])
    assert exc.value.code == 1
    assert main(["run", "--data", str(prices_csv), "--tau-grid", "0.02,0.01"]) == 1
    assert main(["run", "--data", str(prices_csv), "--split", "1.5"]) == 1
    assert main(["run"]) == 1  # no data path
    bad = tmp_path / "bad.yaml"
    bad.write_text("svm: {kernel: poly}\n")
    assert main(["run", "--data", str(prices_csv), "--config", str(bad)]) == 1
    assert main(["indicators", str(prices_csv), "--ma-short", "60", "--ma-long", "50"]) == 1
    assert "error:" in capsys.readouterr().err


def test_data_errors_exit_2(tmp_path):
    assert main(["ingest", str(tmp_path / "missing.csv")]) == 2
    zero = tmp_path / "zero.csv"
    zero.write_text("date,close\n2017-01-03,1\n2017-01-04,0\n")
    assert main(["ingest", str(zero)]) == 2
    assert main(["ingest", str(zero), "--close-column", "price"]) == 2


def test_divergence_exits_3(prices_csv, tmp_path):
    cfg = tmp_path / "boom.yaml"
    cfg.write_text("autoencoder:\n  optimizer: sgd\n  learning_rate: 1.0e+308\n  epochs: 5\n")
    with pytest.warns(RuntimeWarning):
        code = main(["denoise", str(prices_csv), "--config", str(cfg), "--out", str(tmp_path / "x")])
    assert code == 3
