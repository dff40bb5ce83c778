import subprocess
import sys

import numpy as np
import pytest

from rmtcov.cli import main
from rmtcov.datagen import sample
from rmtcov.matrix_io import read_matrix, read_table, write_matrix
from rmtcov.metrics import fisher, true_delta


@pytest.fixture
def white(tmp_path):
    path = tmp_path / "x.csv"
    write_matrix(path, sample(np.eye(50), 200, 0))
    return path


class TestEstimate:
    def test_covariance_near_identity(self, white, tmp_path, capsys):
        out = tmp_path / "m.csv"
        assert main(["estimate", str(white), "--metric", "fisher", "--out", str(out)]) == 0
        M = read_matrix(out)
        assert true_delta(M, np.eye(50), fisher()) <= 0.3
        assert "stop=" in capsys.readouterr().err

    def test_precision_near_identity(self, white, tmp_path):
        out = tmp_path / "p.csv"
        assert main(["estimate", str(white), "--mode", "prec", "--out", str(out)]) == 0
        assert true_delta(read_matrix(out), np.eye(50), fisher()) <= 0.3

    def test_trace_file(self, white, tmp_path):
        tr = tmp_path / "trace.csv"
        assert main(["estimate", str(white), "--trace", str(tr), "--out",
                     str(tmp_path / "m.csv")]) == 0
        _, rows = read_table(tr)
        assert list(rows[0]) == ["k", "h", "delta_hat", "step", "grad_norm"]

    def test_init_from_file(self, white, tmp_path):
        init = tmp_path / "init.csv"
        write_matrix(init, 2 * np.eye(50))
        assert main(["estimate", str(white), "--init", f"file:{init}", "--max-iters", "2",
                     "--out", str(tmp_path / "m.csv")]) == 0

    def test_stdout(self, tmp_path, capsys):
        path = tmp_path / "x.csv"
        write_matrix(path, sample(np.eye(3), 20, 0))
        assert main(["estimate", str(path)]) == 0
        assert len(capsys.readouterr().out.splitlines()) == 3


class TestExitCodes:
    def test_missing_input(self, tmp_path):
        assert main(["estimate", str(tmp_path / "none.csv")]) == 4

    def test_malformed_csv(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("1,2\n3\n")
        assert main(["estimate", str(path)]) == 4
        assert "bad.csv:2" in capsys.readouterr().err

    def test_regime(self, tmp_path):
        path = tmp_path / "wide.csv"
        write_matrix(path, np.random.default_rng(0).standard_normal((10, 5)))
        assert main(["estimate", str(path)]) == 2

    def test_bad_metric(self):
        assert main(["bench-distance", "--metric", "frobenius"]) == 2

    def test_bad_config_value(self, tmp_path):
        cfg = tmp_path / "c.ini"
        cfg.write_text("[common]\np = many\n")
        assert main(["bench-distance", "--config", str(cfg)]) == 2

    def test_numerical(self, tmp_path):
        path = tmp_path / "x.csv"
        write_matrix(path, sample(np.eye(5), 20, 0))
        init = tmp_path / "init.csv"
        write_matrix(init, np.diag([1.0, 1, 1, 1, 1e-14]))
        assert main(["estimate", str(path), "--init", f"file:{init}"]) in (2, 3)

    def test_argparse_usage(self):
        with pytest.raises(SystemExit) as info:
            main(["bench-distance", "--mode", "other"])
        assert info.value.code == 2


class TestBenchCommands:
    def test_config_file_and_override(self, tmp_path):
        cfg = tmp_path / "c.ini"
        cfg.write_text("[common]\np = 20\ntrials = 1\nseed = 9\n"
                       "[bench-distance]\nratios = 1.5, 2.0\nmetric = kl\n")
        out = tmp_path / "d.csv"
        assert main(["bench-distance", "--config", str(cfg), "--ratios", "3.0",
                     "--out", str(out)]) == 0
        meta, rows = read_table(out)
        assert meta["metric"] == "kl" and meta["seed"] == 9 and meta["ratios"] == [3.0]
        assert {r["n"] for r in rows} == {"60"}

    def test_precision_and_classify(self, tmp_path):
        out = tmp_path / "p.csv"
        assert main(["bench-precision", "--p", "12", "--trials", "1", "--ratios", "2",
                     "--out", str(out)]) == 0
        out2 = tmp_path / "c.csv"
        assert main(["bench-classify", "--kind", "lda", "--p", "10", "--trials", "1",
                     "--ratios", "3", "--test-size", "100", "--model", "wishart",
                     "--model2", "wishart", "--out", str(out2)]) == 0
        meta, rows = read_table(out2)
        assert meta["kind"] == "lda-sweep" and len(rows) == 3

    def test_trace(self, tmp_path):
        out = tmp_path / "t.csv"
        assert main(["trace", "--p", "20", "--ratios", "2", "--out", str(out)]) == 0
        _, rows = read_table(out)
        assert list(rows[0]) == ["k", "h", "delta_hat", "step", "grad_norm",
                                 "true_delta", "gap"]

    def test_datagen(self, tmp_path):
        x, c = tmp_path / "x.csv", tmp_path / "c.csv"
        assert main(["datagen", "--model", "toeplitz:0.5", "--p", "6", "--n", "15",
                     "--out", str(x), "--cov-out", str(c)]) == 0
        assert read_matrix(x).shape == (6, 15)
        np.testing.assert_allclose(read_matrix(c)[0, :3], [1, 0.5, 0.25])

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "rmtcov", "--version"],
                             capture_output=True, text=True)
        assert res.returncode == 0 and "rmtcov" in res.stdout
