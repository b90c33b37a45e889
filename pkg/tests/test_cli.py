import csv
import io

import numpy as np
import pytest

from terelu import activations
from terelu.cli import main
from terelu.data import DATA_DIR_ENV, MNIST_FILES, write_idx
from terelu.metrics import LONG_HEADER, LONG_METRICS, read_metrics

SMALL = ["--dataset", "blobs", "--depth", "2", "--width", "8", "--train-size", "120",
         "--val-size", "40", "--batch-size", "16"]


def train(tmp_path, name, *extra):
    out = tmp_path / f"{name}.csv"
    code = main(["train", *SMALL, "--out-csv", str(out), *extra])
    return code, out


def test_train_writes_schema_and_config_echo(tmp_path, capsys):
    code, out = train(tmp_path, "a", "--epochs", "3", "--seed", "4")
    assert code == 0
    lines = out.read_text().splitlines()
    echo = [ln for ln in lines if ln.startswith("#")]
    assert "# activation = terelu" in echo and "# seed = 4" in echo and "# depth = 2" in echo
    assert not any("out-csv" in ln for ln in echo)
    data = [ln for ln in lines if not ln.startswith("#")]
    assert data[0] == "epoch,train_loss,train_acc,val_loss,val_acc,beta_0,beta_1"
    assert [row.split(",")[0] for row in data[1:]] == ["1", "2", "3"]
    assert "val_acc=" in capsys.readouterr().out


def test_train_is_byte_reproducible(tmp_path):
    _, a = train(tmp_path, "a", "--epochs", "2", "--seed", "7")
    _, b = train(tmp_path, "b", "--epochs", "2", "--seed", "7")
    assert a.read_bytes() == b.read_bytes()


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nepochs = 4\nseed = 3\nactivation = elu\n")
    code, out = train(tmp_path, "o", "--config", str(cfg), "--epochs", "2")
    assert code == 0
    text = out.read_text()
    assert "# epochs = 2" in text and "# seed = 3" in text and "# activation = elu" in text
    assert len(read_metrics(out)["epoch"]) == 2


@pytest.mark.parametrize("bad", [["--activation", "swish"], ["--batch-size", "1"],
                                 ["--activation", "srelu", "--srelu", "1,2"]])
def test_bad_config_exits_2(tmp_path, capsys, bad):
    code, _ = train(tmp_path, "bad", *bad)
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("epoch = 4\n")
    assert main(["train", "--config", str(cfg)]) == 2
    assert "unknown key 'epoch'" in capsys.readouterr().err


def test_missing_mnist_exits_2_and_names_files(tmp_path, capsys):
    code = main(["train", "--data-dir", str(tmp_path / "nowhere"), "--epochs", "1",
                 "--out-csv", str(tmp_path / "m.csv")])
    assert code == 2
    err = capsys.readouterr().err
    for fname in MNIST_FILES.values():
        assert fname in err
    assert DATA_DIR_ENV in err


def test_mnist_from_idx_files(tmp_path):
    rng = np.random.default_rng(0)
    labels = np.repeat(np.arange(10), 30).astype(np.uint8)
    images = rng.integers(0, 256, (300, 28, 28)).astype(np.uint8)
    write_idx(tmp_path / MNIST_FILES["train_images"], images)
    write_idx(tmp_path / MNIST_FILES["train_labels"], labels)
    out = tmp_path / "mn.csv"
    code = main(["train", "--data-dir", str(tmp_path), "--depth", "2", "--width", "8",
                 "--train-size", "100", "--val-size", "50", "--holdout", "100", "--epochs", "1",
                 "--out-csv", str(out)])
    assert code == 0
    assert read_metrics(out)["epoch"] == [1]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_exits_1_and_keeps_partial_csv(tmp_path, capsys):
    code, out = train(tmp_path, "div", "--no-bn", "--activation", "relu",
                      "--learning-rate", "1e300", "--epochs", "5")
    assert code == 1
    assert "diverged" in capsys.readouterr().err
    assert out.read_text().splitlines()[-1].startswith("epoch")


def test_gradcheck_passes(capsys):
    assert main(["gradcheck"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "checks passed" in out


def test_gradcheck_detects_sign_flip(monkeypatch, capsys):
    real = activations.terelu_dx
    monkeypatch.setattr(activations, "terelu_dx", lambda p, x: -real(p, x))
    assert main(["gradcheck", "--kind", "terelu"]) != 0
    assert "FAIL" in capsys.readouterr().out


def test_gradcheck_per_branch_breakdown(capsys):
    assert main(["gradcheck", "--kind", "terelu", "--points", "1000"]) == 0
    out = capsys.readouterr().out
    assert "per-branch" in out
    assert out.count("e-") >= 3


def _long(text):
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == LONG_HEADER
    return rows[1:]


def test_plot_data_merges_runs(tmp_path, capsys):
    _, a = train(tmp_path, "a", "--epochs", "3")
    _, b = train(tmp_path, "b", "--epochs", "3", "--activation", "elu")
    capsys.readouterr()
    assert main(["plot-data", str(a), str(b), "--no-figure"]) == 0
    rows = _long(capsys.readouterr().out)
    assert len(rows) == 2 * 3 * len(LONG_METRICS)
    assert {r[0] for r in rows} == {"a", "b"}
    assert {r[2] for r in rows} == set(LONG_METRICS)


def test_plot_data_single_passthrough_and_figure(tmp_path):
    _, a = train(tmp_path, "a", "--epochs", "2")
    out = tmp_path / "merged" / "long.csv"
    assert main(["plot-data", str(a), "--out", str(out), "--with-beta"]) == 0
    rows = _long(out.read_text())
    src = read_metrics(a)
    got = {(int(r[1]), r[2]): float(r[3]) for r in rows}
    for i, ep in enumerate(src["epoch"]):
        for m in ("val_acc", "train_loss", "beta_1"):
            assert got[(ep, m)] == src[m][i]
    png = out.with_suffix(".png")
    assert png.exists() and png.read_bytes()[:4] == b"\x89PNG"


def test_plot_data_rejects_empty_and_bad_columns(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["plot-data", str(empty), "--no-figure"]) != 0
    assert "empty" in capsys.readouterr().err
    bad = tmp_path / "bad.csv"
    bad.write_text("epoch,train_loss,train_accuracy,val_loss,val_acc\n1,0.5,0.5,0.5,0.5\n")
    assert main(["plot-data", str(bad), "--no-figure"]) != 0
    assert "train_accuracy" in capsys.readouterr().err


def test_data_info(tmp_path, capsys):
    assert main(["data-info", "--data-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert DATA_DIR_ENV in out and "missing" in out
