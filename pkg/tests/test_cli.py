import pytest

from fedpred.cli import main

TINY = """
task = classification
dataset = blobs
data.n = 120
data.classes = 3
data.features = 4
data.separation = 6.0
n_clients = 2
heterogeneity = 0.0,1.0
methods = fedavg_1round
seeds = 0
arch.hidden = 8
sgd.epochs = 2
sgd.batch_size = 16
save_ensembles = true
output_dir = {out}
"""


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(TINY.format(out=tmp_path / "runs"))
    return path


class TestRunCommand:
    def test_run_prints_results_and_summary(self, config_path, tmp_path, capsys):
        assert main(["run", str(config_path)]) == 0
        out = capsys.readouterr().out
        assert "fedavg_1round seed=0" in out
        assert "summary (mean +/- std over seeds):" in out
        assert (tmp_path / "runs" / "results.csv").is_file()

    def test_output_dir_override(self, config_path, tmp_path, capsys):
        assert main(["run", str(config_path), "--output-dir", str(tmp_path / "other")]) == 0
        assert (tmp_path / "other" / "results.csv").is_file()

    def test_missing_config_is_error(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "absent.cfg")]) == 2
        assert "error:" in capsys.readouterr().err

    def test_bad_config_reports_line(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("task = classification\ndataset = blobs\nwat = 1\n")
        assert main(["run", str(path)]) == 2
        assert "unknown key 'wat'" in capsys.readouterr().err


class TestInspectPartition:
    def test_histograms_printed(self, config_path, capsys):
        assert main(["inspect-partition", str(config_path)]) == 0
        out = capsys.readouterr().out
        assert "heterogeneity=0" in out
        assert "heterogeneity=1" in out
        assert "client 0: size=" in out
        assert "classes=[" in out

    def test_fully_sorted_has_limited_classes(self, config_path, capsys):
        main(["inspect-partition", str(config_path)])
        out = capsys.readouterr().out
        h1_block = out.split("heterogeneity=1")[1]
        for line in h1_block.strip().splitlines():
            counts = [int(c) for c in line.split("classes=[")[1].rstrip("]").split()]
            assert sum(1 for c in counts if c > 0) <= 2


class TestCompareAndEval:
    def test_compare_writes_csvs(self, config_path, tmp_path, capsys):
        main(["run", str(config_path)])
        capsys.readouterr()
        assert main(["compare", str(tmp_path / "runs")]) == 0
        out = capsys.readouterr().out
        assert "wrote" in out
        assert (tmp_path / "runs" / "summary.csv").is_file()
        curves = (tmp_path / "runs" / "curves.csv").read_text()
        assert curves.splitlines()[0] == "heterogeneity,fedavg_1round"

    def test_compare_deterministic(self, config_path, tmp_path, capsys):
        main(["run", str(config_path)])
        main(["compare", str(tmp_path / "runs")])
        first = (tmp_path / "runs" / "curves.csv").read_text()
        main(["compare", str(tmp_path / "runs")])
        assert (tmp_path / "runs" / "curves.csv").read_text() == first

    def test_eval_saved_ensemble(self, config_path, tmp_path, capsys):
        main(["run", str(config_path)])
        capsys.readouterr()
        ens = tmp_path / "runs" / "ensembles" / "fedavg_1round_seed0_h0"
        assert main(["eval", str(ens), str(config_path)]) == 0
        out = capsys.readouterr().out
        assert "fedavg_1round:" in out
        assert "accuracy=" in out


class TestParserShape:
    def test_help_lists_subcommands(self, capsys):
        with pytest.raises(SystemExit):
            main(["--help"])
        out = capsys.readouterr().out
        for sub in ("run", "inspect-partition", "eval", "compare", "serve"):
            assert sub in out

    def test_serve_wires_uvicorn(self, monkeypatch):
        calls = {}

        def fake_run(app, host, port, log_level):
            calls.update(host=host, port=port)

        import uvicorn

        monkeypatch.setattr(uvicorn, "run", fake_run)
        assert main(["serve", "--host", "0.0.0.0", "--port", "9100"]) == 0
        assert calls == {"host": "0.0.0.0", "port": 9100}
