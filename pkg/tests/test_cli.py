import json

import numpy as np
import pytest

from torwave.cli import EXIT_OK, EXIT_PRECONDITION, EXIT_TARGET_MISSED, main
from torwave.specfun.conical import conical_p
from torwave.specfun.types import ConicalParams


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_nonpositive_k_is_a_precondition_failure(tmp_path, capsys):
    code, _, err = run(capsys, "specfun", "conical", "--k", "0", "--output-dir", str(tmp_path))
    assert code == EXIT_PRECONDITION
    assert "DomainError" in err
    code, _, _ = run(capsys, "specfun", "cnorm", "--k", "0", "--output-dir", str(tmp_path))
    assert code == EXIT_PRECONDITION


def test_conical_row_matches_library(tmp_path, capsys):
    code, out, _ = run(capsys, "specfun", "conical", "--mu", "0", "--k", "1", "--x", "1",
                       "--output-dir", str(tmp_path))
    assert code == EXIT_OK
    header, row = out.strip().splitlines()
    assert header == "mu,k,x,value,abs_err,regime"
    value = float(row.split(",")[3])
    assert value == conical_p(ConicalParams(0, 1.0, 1.0)).value
    assert (tmp_path / "specfun_conical.csv").read_text().splitlines()[1].split(",")[3] == repr(value)


def test_weighted_conical_vanishes_at_origin(tmp_path, capsys):
    code, out, _ = run(capsys, "specfun", "conical", "--mu", "1", "--k", "2", "--x", "0", "--weighted",
                       "--output-dir", str(tmp_path))
    assert code == EXIT_OK
    assert float(out.strip().splitlines()[1].split(",")[3]) == 0.0


def test_gamma_pole_and_olver_parameters(tmp_path, capsys):
    code, _, err = run(capsys, "specfun", "gamma", "--z", "0", "--output-dir", str(tmp_path))
    assert code == EXIT_PRECONDITION and "PoleError" in err
    # 2F1(1/2, 1/2; 1; z) = 2 K(z) / pi with K the complete elliptic integral of parameter z
    from scipy.special import ellipk
    code, out, _ = run(capsys, "specfun", "olver", "--a", "0.5", "--b", "0.5", "--c", "1", "--x", "0.3",
                       "--output-dir", str(tmp_path))
    assert code == EXIT_OK
    assert float(out.strip().splitlines()[1].split(",")[1]) == pytest.approx(2 * ellipk(0.3) / np.pi, rel=1e-13)


def test_dry_run_validates_without_writing(tmp_path, capsys):
    target = tmp_path / "never"
    code, out, _ = run(capsys, "mf", "--dry-run", "--output-dir", str(target))
    assert code == EXIT_OK and "configuration valid" in out
    assert not target.exists()
    code, _, err = run(capsys, "mf", "--dry-run", "--r", "3", "--R", "2")
    assert code == EXIT_PRECONDITION and "ConfigError" in err


def test_mf_zero_profile(tmp_path, capsys):
    code, out, _ = run(capsys, "mf", "--profile", "zero", "--output-dir", str(tmp_path))
    assert code == EXIT_OK and "PASS" in out
    report = json.loads((tmp_path / "mf_zero_mu0.json").read_text())
    assert report["roundtrip"]["60.0"]["linf"] == 0.0


def test_mf_exit_code_follows_tolerance(tmp_path, capsys):
    args = ["mf", "--profile", "tanh4_exp", "--mu", "1", "--k-max", "10", "20", "--k-nodes-per-unit", "32",
            "--output-dir", str(tmp_path)]
    code, _, _ = run(capsys, *args, "--tol", "1.0")
    loose = json.loads((tmp_path / "mf_tanh4_exp_mu1.json").read_text())
    assert code == EXIT_OK and loose["passed"]
    code, out, _ = run(capsys, *args, "--tol", "1e-12")
    strict = json.loads((tmp_path / "mf_tanh4_exp_mu1.json").read_text())
    assert code == EXIT_TARGET_MISSED and "FAIL" in out and not strict["passed"]
    assert strict["roundtrip"] == loose["roundtrip"]
    assert strict["monotone"]


def test_mf_unknown_profile(tmp_path, capsys):
    code, _, err = run(capsys, "mf", "--profile", "no-such-profile", "--output-dir", str(tmp_path))
    assert code == EXIT_PRECONDITION and "unknown profile" in err


def test_output_dir_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("TORWAVE_OUTPUT_DIR", str(tmp_path / "env"))
    code, _, _ = run(capsys, "specfun", "cnorm", "--mu", "1", "--k", "1")
    assert code == EXIT_OK
    assert (tmp_path / "env" / "specfun_cnorm.csv").exists()


def test_specfun_output_is_deterministic(tmp_path, capsys):
    for name in ("a", "b"):
        run(capsys, "specfun", "kernel", "--mu", "0", "2", "--k", "0.5", "7", "--x", "0.1", "3",
            "--output-dir", str(tmp_path / name))
    assert (tmp_path / "a" / "specfun_kernel.csv").read_bytes() == (tmp_path / "b" / "specfun_kernel.csv").read_bytes()


def test_trace_file_is_written(tmp_path, capsys):
    run(capsys, "specfun", "conical", "--k", "1", "30", "--x", "0.5", "--trace-specfun", "--output-dir", str(tmp_path))
    lines = (tmp_path / "specfun_trace.jsonl").read_text().splitlines()
    assert lines and all(json.loads(line)["event"] == "conical_dispatch" for line in lines)


def test_solve_zero_data(tmp_path, capsys):
    code, _, _ = run(capsys, "solve", "--data", "zero", "--t", "0.2", "--n-phi1", "4", "--n-phi2", "4",
                     "--n-tau", "4", "--m-max", "1", "--mu-max", "1", "--output-dir", str(tmp_path))
    assert code == EXIT_OK
    data = np.loadtxt(tmp_path / "solve_t0.2.csv", delimiter=",", skiprows=1)
    assert data.shape == (64, 4) and np.all(data[:, 3] == 0)


def test_scan_and_acceptance_argument_checks(tmp_path, capsys):
    code, _, _ = run(capsys, "dispersive-scan", "--tmin", "2", "--tmax", "1", "--output-dir", str(tmp_path))
    assert code == EXIT_PRECONDITION
    code, _, _ = run(capsys, "acceptance", "--criteria", "11", "--output-dir", str(tmp_path))
    assert code == EXIT_PRECONDITION


def test_config_file_values_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('seed = 7\n[geometry]\nr = 0.5\nR = 3.0\n')
    code, out, _ = run(capsys, "specfun", "conical", "--dry-run", "--config", str(cfg), "--R", "4")
    assert code == EXIT_OK
    assert "'r': 0.5" in out and "'R': 4.0" in out and "'seed': 7" in out
    bad = tmp_path / "bad.toml"
    bad.write_text("r = [\n")
    code, _, err = run(capsys, "specfun", "conical", "--dry-run", "--config", str(bad))
    assert code == EXIT_PRECONDITION and "cannot parse" in err
