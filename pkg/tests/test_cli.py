import json
import os

import numpy as np
import pytest

from lowspace.cli import main


def run(argv):
    return main(argv)


class TestSolve:
    def test_pinned_ff_report(self, tmp_path):
        out = tmp_path / "report.json"
        code = run(
            [
                "solve", "--model", "pinned", "--n", "8", "--case", "ff",
                "--delta", "1e-3", "--seed", "1", "--out", str(out),
            ]
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert report["schema"] == 1
        assert report["final_overlap"] >= 0.999
        assert report["config"]["seed"] == 1
        assert report["config"]["model"] == "pinned"
        assert report["config"]["delta"] == 1e-3
        assert len(report["energies"]) == 1
        assert set(report["wall_clock"]) == {"merge", "refine", "extract"}
        assert [len(lv["blocks"]) for lv in report["levels"]] == [4, 2, 1]
        assert not list(tmp_path.glob("*.tmp")), "temporary file left behind"

    def test_stdout_when_no_out(self, capsys):
        code = run(
            ["solve", "--model", "pinned", "--n", "4", "--case", "ff", "--seed", "2"]
        )
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["schema"] == 1

    def test_non_hermitian_custom_terms(self, tmp_path, capsys):
        good = np.eye(4, dtype=complex) / 2
        bad = np.zeros((4, 4), dtype=complex)
        bad[0, 1] = 1.0  # not Hermitian

        def flat(m):
            return [[float(x.real), float(x.imag)] for x in m.reshape(-1)]

        spec = {"n": 3, "d": 2, "terms": [flat(good), flat(bad)]}
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(spec))
        code = run(["solve", "--model", "custom", "--terms", str(path), "--n", "3"])
        assert code == 1
        err = capsys.readouterr().err
        assert "term 1" in err

    def test_custom_needs_terms(self, capsys):
        assert run(["solve", "--model", "custom", "--n", "4"]) == 1

    def test_unknown_model(self, capsys):
        assert run(["solve", "--model", "bogus", "--n", "4"]) == 1

    def test_ld_needs_window(self, capsys):
        assert run(["solve", "--model", "tfi", "--n", "4", "--case", "ld"]) == 1

    def test_dg_tfi(self, tmp_path):
        out = tmp_path / "dg.json"
        code = run(
            [
                "solve", "--model", "tfi", "--g", "1.5", "--n", "8", "--case", "dg",
                "--r", "1", "--delta", "1e-2", "--gamma", "0.31",
                "--max-bond", "48", "--seed", "3", "--out", str(out),
            ]
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert abs(report["energies"][0] - report["oracle_energies"][0]) <= 1e-2 * 0.31
        assert report["mutual_closeness"] <= 1e-2


class TestVerify:
    def test_cluster_suite(self, tmp_path):
        out = tmp_path / "cluster.json"
        code = run(["verify", "--suite", "cluster", "--n", "6", "--seed", "3",
                    "--out", str(out)])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["passed"]
        assert report["failed"] == []

    def test_dl_suite(self):
        assert run(["verify", "--suite", "dl", "--n", "8"]) == 0

    def test_agsp_suite(self):
        assert run(["verify", "--suite", "agsp", "--n", "8"]) == 0

    def test_unknown_suite(self, capsys):
        assert run(["verify", "--suite", "nope"]) == 1


class TestBench:
    def test_csv_structure(self, tmp_path):
        out = tmp_path / "bench.csv"
        code = run(["bench", "--model", "pinned", "--sizes", "4,8",
                    "--seed", "1", "--out", str(out)])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "n,phase,wall_clock_s,peak_bond"
        phases = [ln.split(",")[1] for ln in lines[1:] if not ln.startswith("#")]
        assert phases.count("total") == 2
        assert lines[-1].startswith("#growth-rate,log-log-slope,")

    def test_bad_sizes(self, capsys):
        assert run(["bench", "--sizes", "abc"]) == 1
