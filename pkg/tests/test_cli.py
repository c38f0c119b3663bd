"""Command-line subcommands, exit codes and configuration handling."""
import csv
import json
import math

import pytest

from normsol.cli import ConfigError, RunConfig, main


def _rows(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


class TestConfig:
    def test_round_trip(self):
        cfg = RunConfig(command="branch", domain="interval:0,pi", N=1, p=7.0, alpha="2:100",
                        steps=12, admissible_check=False)
        back = RunConfig.from_text(cfg.to_text())
        assert back == cfg
        assert back.hash == cfg.hash

    def test_comments_and_blank_lines(self):
        cfg = RunConfig.from_text("# run\n\np = 3  # cubic\nn = 64\n")
        assert cfg.p == 3.0 and cfg.n == 64

    @pytest.mark.parametrize("text", ["nonsense", "bogus = 1", "n = many", "snapshots = maybe"])
    def test_bad_text(self, text):
        with pytest.raises(ConfigError):
            RunConfig.from_text(text)

    def test_hash_changes(self):
        assert RunConfig(p=3.0).hash != RunConfig(p=5.0).hash


class TestEig:
    def test_interval(self, tmp_path, capsys):
        assert main(["eig", "--domain", "interval:0,pi", "--n", "512", "--count", "3",
                     "--out", str(tmp_path)]) == 0
        rows = _rows(tmp_path / "eigs.csv")
        assert [float(r["lambda"]) for r in rows] == pytest.approx([1, 4, 9], rel=1e-3)
        assert capsys.readouterr().out.startswith("eig ")

    def test_deterministic(self, tmp_path):
        for d in ("a", "b"):
            assert main(["eig", "--domain", "square:1", "--n", "24", "--out",
                         str(tmp_path / d)]) == 0
        assert (tmp_path / "a/eigs.csv").read_bytes() == (tmp_path / "b/eigs.csv").read_bytes()

    def test_config_file_and_override(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("domain = interval:0,pi\nn = 256\ncount = 5\n")
        assert main(["eig", "--config", str(conf), "--count", "2", "--out",
                     str(tmp_path)]) == 0
        assert len(_rows(tmp_path / "eigs.csv")) == 2

    def test_snapshots(self, tmp_path):
        assert main(["eig", "--domain", "disk:1", "--n", "16", "--count", "2", "--snapshots",
                     "--out", str(tmp_path)]) == 0
        assert (tmp_path / "eig_001.mbf").exists() and (tmp_path / "eig_002.mbf").exists()


class TestExitCodes:
    @pytest.mark.parametrize("argv", [
        ["eig", "--domain", "blob:1"],
        ["eig", "--domain", "interval:0,1", "--n", "3"],
        ["eig", "--n", "many"],
        ["frobnicate"],
        ["branch", "--p", "3"],
        ["branch", "--p", "3", "--alpha", "0.5:10", "--n", "64"],
        ["minimize", "--p", "7"],
        ["tile", "--p", "3"],
        ["ladder", "--N", "2", "--p", "2"],
        ["soliton"],
    ])
    def test_config_errors(self, tmp_path, argv):
        assert _run(argv + ["--out", str(tmp_path)] if argv[0] != "frobnicate" else argv) == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["eig", "--config", str(tmp_path / "none.conf")]) == 2

    def test_cap_exceeded_is_numerical(self, tmp_path):
        code = main(["minimize", "--p", "7", "--n", "512", "--mu", "200", "--alpha-cap", "10",
                     "--no-admissible-check", "--out", str(tmp_path)])
        assert code == 3
        rec = json.loads((tmp_path / "minimizer.json").read_text())
        assert rec["hit_cap"] is True and rec["converged"] is False


def _run(argv):
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


class TestPipelines:
    def test_soliton(self, tmp_path):
        assert main(["soliton", "--N", "1", "--p", "7", "--n", "512", "--out",
                     str(tmp_path)]) == 0
        rep = json.loads((tmp_path / "constants.json").read_text())
        assert rep["D_Np"] > 0 and rep["mu_hat_1"] > 0
        assert rep["beta"] == 1.5

    def test_branch_tile_diag(self, tmp_path):
        out = str(tmp_path)
        assert main(["branch", "--p", "3", "--n", "1024", "--alpha", "2:400", "--steps", "12",
                     "--out", out]) == 0
        rows = _rows(tmp_path / "branch.csv")
        assert len(rows) == 12
        assert all(float(r["residual"]) < 1e-8 for r in rows)
        snap = tmp_path / "branch_points" / "pt_0003.mbf"
        assert main(["tile", "--input", str(snap), "--k", "2", "--out", out]) == 0
        tile = json.loads((tmp_path / "tile.json").read_text())
        assert tile["mass_ratio"] == pytest.approx(4.0, rel=1e-6)
        assert tile["morse"] >= 2
        assert main(["diag", "--out", out]) == 0
        rep = json.loads((tmp_path / "report.json").read_text())
        assert rep["verdicts"]["mu_trichotomy"] == "+inf"

    def test_minimize(self, tmp_path):
        assert main(["minimize", "--p", "7", "--n", "512", "--mu-fraction", "0.5", "--out",
                     str(tmp_path)]) == 0
        rec = json.loads((tmp_path / "minimizer.json").read_text())
        assert rec["morse"] == 1 and rec["converged"] is True

    def test_ladder(self, tmp_path):
        assert main(["ladder", "--N", "2", "--p", "3", "--k-max", "8", "--out",
                     str(tmp_path)]) == 0
        text = (tmp_path / "ladder.csv").read_text()
        assert "verdict=diverges" in text
        assert len(_rows(tmp_path / "ladder.csv")) == 7

    def test_diag_without_branch(self, tmp_path):
        assert main(["diag", "--input", str(tmp_path / "nothing")]) == 2
