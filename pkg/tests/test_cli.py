import csv
import io
import subprocess
import sys

import pytest

from surrogate_al import cli
from surrogate_al.bench import CSV_HEADER, SWEEP_HEADER


def rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def write_cfg(tmp_path, text):
    path = tmp_path / "exp.cfg"
    path.write_text(text)
    return str(path)


TWO_POINT = """\
problem.kind = two_point
class.kind = two_point
threshold.variant = rademacher
threshold.scale = 0.02
experiment.mode = both
budget.u = 1024
budget.n = 64
"""


def test_run_writes_csv(tmp_path):
    out = tmp_path / "run.csv"
    code = cli.main(["run", "--config", write_cfg(tmp_path, TWO_POINT), "--trials", "3",
                     "--out", str(out)])
    assert code == 0
    r = rows(out)
    assert list(r[0]) == list(CSV_HEADER)
    assert len(r) == 6
    assert (tmp_path / "run.provenance.txt").exists()


def test_run_to_stdout(tmp_path, capsys):
    assert cli.main(["run", "--config", write_cfg(tmp_path, TWO_POINT), "--trials", "2",
                     "--seed", "4"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert lines[1].split(",")[8] == "4:0"


def test_sweep(tmp_path):
    out = tmp_path / "sweep.csv"
    cfg = write_cfg(tmp_path, TWO_POINT + "sweep.eps = 0.1, 0.03\n")
    assert cli.main(["sweep", "--config", cfg, "--trials", "5", "--out", str(out)]) == 0
    r = rows(out)
    assert list(r[0]) == list(SWEEP_HEADER)
    assert len(r) == 4
    assert (tmp_path / "sweep.trials.csv").exists()


def test_theta(tmp_path):
    out = tmp_path / "theta.csv"
    assert cli.main(["theta", "--config", write_cfg(tmp_path, TWO_POINT), "--out", str(out)]) == 0
    r = rows(out)
    assert float(r[-1]["theta_running_sup"]) == 1.0


def test_calibration_matches_closed_forms(tmp_path):
    out = tmp_path / "cal.csv"
    assert cli.main(["calibration", "--out", str(out)]) == 0
    r = rows(out)
    assert {row["loss"] for row in r} >= {"quadratic", "hinge", "exponential"}
    assert max(float(row["abs_diff"]) for row in r) <= 1e-4


def test_oracle_passes(tmp_path):
    out = tmp_path / "oracle.csv"
    assert cli.main(["oracle", "--out", str(out)]) == 0
    assert all(row["pass"] == "1" for row in rows(out))


@pytest.mark.parametrize("text", ["loss.kind = hinge\nloss.kind = hinge\n",
                                  "experiment.trials = -3\n", "no equals sign\n"])
def test_config_errors_exit_2(tmp_path, text, capsys):
    assert cli.main(["run", "--config", write_cfg(tmp_path, text)]) == 2
    assert "exp.cfg" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_bad_jobs_exit_2(tmp_path):
    assert cli.main(["run", "--jobs", "0"]) == 2


def test_strict_exit_3(tmp_path, monkeypatch):
    import surrogate_al.learners as learners
    from surrogate_al.classes import InfeasibleVersionSpace

    real = learners.constrained_min_risk

    def constrained_only(V, *args, **kwargs):
        # the unconstrained class is always feasible
        if len(V):
            raise InfeasibleVersionSpace("forced")
        return real(V, *args, **kwargs)

    monkeypatch.setattr(learners, "constrained_min_risk", constrained_only)
    cfg = write_cfg(tmp_path, TWO_POINT.replace("both", "active"))
    argv = ["run", "--config", cfg, "--trials", "2", "--out", str(tmp_path / "o.csv")]
    assert cli.main(argv) == 0
    assert cli.main(argv + ["--strict"]) == 3


def test_console_module_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "surrogate_al", "calibration",
                           "--out", str(tmp_path / "c.csv")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
