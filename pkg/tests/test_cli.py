import csv
import io
import json
import subprocess
import sys

import pytest

from sswpt.cli import main
from sswpt.controller import CalibrationTable


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestSubcommands:
    def test_sweep_detuning_csv(self, capsys):
        code, out, _ = run(capsys, "sweep-detuning", "--k", "0.1,0.2", "--range=-0.2,0.2,0.01")
        assert code == 0
        rows = list(csv.reader(io.StringIO(out)))
        assert rows[0][:2] == ["k", "delta"] and len(rows) == 83

    def test_compare_methods_json(self, capsys):
        code, out, _ = run(capsys, "compare-methods", "--format", "json", "--range=-0.1,0.1,0.1")
        assert code == 0
        doc = json.loads(out)
        assert len(doc["rows"]) == 3 and doc["meta"]["scenario"] == "table1"

    def test_identify_sweep(self, capsys):
        code, out, _ = run(capsys, "identify-sweep", "--range", "82000,84000,1000", "--disturb", "none,load")
        assert code == 0
        assert len(out.strip().splitlines()) == 1 + 3 * 2

    def test_run_case_with_trace(self, capsys, tmp_path):
        trace = tmp_path / "t.csv"
        code, out, _ = run(capsys, "run-case", "--case", "3", "--trace", str(trace))
        assert code == 0
        assert "case3" in out
        assert trace.read_text().startswith("t,mode,f,phi,theta_meas,note")

    def test_run_case_with_calibration(self, capsys, tmp_path):
        code, out, _ = run(capsys, "self-check", "--disturb", "none", "--out", str(tmp_path / "cal.txt"))
        assert code == 0
        assert len(CalibrationTable.load(tmp_path / "cal.txt")) == 12
        code, _, _ = run(capsys, "run-case", "--calibration", str(tmp_path / "cal.txt"))
        assert code == 0

    def test_override(self, capsys):
        code, out, _ = run(capsys, "sweep-detuning", "--k", "0.15", "--range", "0,0,0.01", "--override", "tank.Re=5")
        assert code == 0 and len(out.strip().splitlines()) == 2


class TestExitCodes:
    def test_scenario_error(self, capsys):
        code, _, err = run(capsys, "sweep-detuning", "--scenario", "no-such")
        assert code == 2 and "neither" in err

    def test_bad_override(self, capsys):
        code, _, _ = run(capsys, "sweep-detuning", "--override", "tank.bogus=1")
        assert code == 2

    def test_self_check_without_scc(self, capsys):
        code, _, _ = run(capsys, "self-check", "--scenario", "table1")
        assert code == 2

    def test_session_fault(self, capsys):
        code, _, err = run(capsys, "run-case", "--override", "tank.Cs0=6.0e-8")
        assert code == 3 and "fault" in err

    def test_self_check_partial_fault(self, capsys, tmp_path):
        code, _, err = run(capsys, "self-check", "--out", str(tmp_path / "cal.txt"))
        assert code == 3 and "90" in err
        assert len(CalibrationTable.load(tmp_path / "cal.txt")) == 11

    def test_io_error(self, capsys, tmp_path):
        code, _, err = run(capsys, "sweep-detuning", "--out", str(tmp_path / "no" / "x.csv"))
        assert code == 4 and "I/O" in err

    def test_missing_calibration_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "run-case", "--calibration", str(tmp_path / "none.txt"))
        assert code == 4

    def test_module_entry_point(self):
        r = subprocess.run([sys.executable, "-m", "sswpt", "sweep-detuning", "--k", "0.1", "--range", "0,0,1"],
                           capture_output=True, text=True)
        assert r.returncode == 0 and r.stdout.startswith("k,delta")
