"""End-to-end tests for the wamp command line."""

import json

import pytest

from ui.cli import EXIT_INVARIANT, EXIT_IO, EXIT_OK, EXIT_USAGE, main


class TestSimulate:
    def test_json_report(self, capsys):
        code = main(["--quiet", "simulate", "--n", "3", "--t", "0.25", "--eta", "0.6",
                     "--alpha", "0.6,0", "--beta", "0,0.8"])
        assert code == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["ok"] is True
        assert doc["simulated"]["patterns"] == 64
        assert doc["simulated"]["p_total"] == pytest.approx(0.000537109375, abs=1e-12)
        assert doc["simulated"]["eta_prime"] == pytest.approx(9 / 11, abs=1e-9)
        assert doc["config"]["beta"] == [0.0, 0.8]

    def test_csv_report(self, capsys):
        code = main(["--quiet", "simulate", "--n", "2", "--t", "0.3", "--eta", "0.5", "--format", "csv"])
        assert code == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "field,value"
        assert "ok,true" in lines

    def test_zero_eta_has_null_gain(self, capsys):
        assert main(["--quiet", "simulate", "--n", "2", "--t", "0.3", "--eta", "0"]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["simulated"]["gain"] is None
        assert doc["analytic"]["gain"] is None

    @pytest.mark.parametrize("argv", [
        ["simulate", "--n", "3", "--t", "1.0", "--eta", "0.5"],
        ["simulate", "--n", "1", "--t", "0.3", "--eta", "0.5"],
        ["simulate", "--n", "3", "--t", "0.3", "--eta", "0.5", "--alpha", "0.7071,0"],
        ["simulate", "--n", "4", "--t", "0.3", "--eta", "0.5", "--trace"],
    ])
    def test_usage_errors(self, argv):
        assert main(["--quiet", *argv]) == EXIT_USAGE

    def test_trace_logs_every_element(self, caplog):
        with caplog.at_level("INFO", logger="wamp"):
            code = main(["simulate", "--n", "2", "--t", "0.3", "--eta", "0.5", "--trace", "--out", "-"])
        assert code == EXIT_OK
        assert any("[TRACE]" in r.getMessage() for r in caplog.records)


class TestSweep:
    ARGS = ["--quiet", "sweep", "--n", "3,4", "--t-grid", "0.01:0.99:0.01", "--eta", "0.2,0.6,0.8"]

    def test_row_count_and_header(self, capsys):
        assert main(self.ARGS) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "n,t,eta,p1,p2,p_total,eta_prime,gain,source"
        assert len(lines) == 1 + 2 * 3 * 99

    def test_output_is_byte_identical(self, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main([*self.ARGS, "--out", str(first)]) == EXIT_OK
        assert main([*self.ARGS, "--out", str(second)]) == EXIT_OK
        assert first.read_bytes() == second.read_bytes()

    def test_endpoints_are_clamped(self, capsys):
        assert main(["--quiet", "sweep", "--n", "3", "--t-grid", "0,1", "--eta", "0.5"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert [float(line.split(",")[1]) for line in lines[1:]] == [0.001, 0.999]

    def test_simulated_rows(self, capsys):
        code = main(["--quiet", "sweep", "--n", "2", "--t-grid", "0.2,0.4", "--eta", "0.6", "--simulate"])
        assert code == EXIT_OK
        sources = [line.rsplit(",", 1)[1] for line in capsys.readouterr().out.splitlines()[1:]]
        assert sources == ["analytic", "simulated"] * 2

    def test_zero_eta_rejected(self):
        assert main(["--quiet", "sweep", "--n", "3", "--t-grid", "0.5", "--eta", "0"]) == EXIT_USAGE

    def test_unwritable_path(self, tmp_path):
        target = tmp_path / "missing" / "out.csv"
        assert main([*self.ARGS, "--out", str(target)]) == EXIT_IO


class TestVerify:
    def test_single_check_passes(self, capsys):
        assert main(["--quiet", "verify", "--checks", "gain-curves", "--max-n", "3"]) == EXIT_OK
        assert capsys.readouterr().out.startswith("[PASS] gain-curves")

    def test_injected_fault_fails(self, capsys):
        code = main(["--quiet", "verify", "--inject-fault", "bs-sign",
                     "--checks", "branch-probabilities", "--max-n", "2"])
        assert code == EXIT_INVARIANT
        assert "[FAIL] branch-probabilities" in capsys.readouterr().out

    def test_json_output(self, capsys):
        code = main(["--quiet", "verify", "--checks", "success-probability,alpha-beta-invariance",
                     "--max-n", "3", "--format", "json"])
        assert code == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["passed"] is True
        assert [c["name"] for c in doc["checks"]] == ["success-probability", "alpha-beta-invariance"]

    def test_max_n_too_small(self):
        assert main(["--quiet", "verify", "--max-n", "1"]) == EXIT_USAGE

    def test_unknown_checks_only(self):
        assert main(["--quiet", "verify", "--checks", "nonsense"]) == EXIT_USAGE
