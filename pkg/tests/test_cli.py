import json

import numpy as np
import pytest

from loqc_gates import io
from loqc_gates.cli import OUT_ENV, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def assert_one_line_error(err, category):
    lines = err.strip().splitlines()
    assert len(lines) == 1
    assert lines[0].startswith(f"error: {category}: ")


def test_unknown_gate_writes_nothing(tmp_path, capsys):
    out = tmp_path / "out"
    code, _, err = run(capsys, "optimize", "--gate", "swap", "--out", str(out))
    assert code == 2
    assert_one_line_error(err, "usage")
    assert not out.exists()


def test_bad_flags_are_usage_errors(tmp_path, capsys):
    code, _, err = run(capsys, "trace", "--gate", "cnot", "--cartan", "1,2", "--out", str(tmp_path))
    assert code == 2
    assert_one_line_error(err, "usage")
    code, _, err = run(capsys, "frobnicate")
    assert code == 2
    assert_one_line_error(err, "usage")


def test_empty_schedule_writes_nothing(tmp_path, capsys):
    out = tmp_path / "out"
    code, _, err = run(capsys, "trace", "--gate", "cnot", "--eps-steps", "0", "--out", str(out))
    assert code == 2
    assert_one_line_error(err, "usage")
    assert not out.exists()
    code, _, _ = run(capsys, "trace", "--gate", "cnot", "--eps-min", "3", "--eps-max", "1", "--out", str(out))
    assert code == 2 and not out.exists()


TRACE_ARGS = ("trace", "--gate", "cnot", "--restarts", "2", "--eps-steps", "8", "--seed", "3")


@pytest.fixture(scope="module")
def cnot_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("cnot")
    assert main([*TRACE_ARGS, "--out", str(out)]) == 0
    return out


def test_trace_outputs(cnot_run):
    t = io.load_trace(cnot_run / "cnot_trace.jsonl")
    assert t.complete and not t.aborted
    assert len(t.records) == 8
    assert all(r.implied_vacuum_modes == 0 for r in t.records)
    assert all(r.wall_time is not None and r.wall_time >= 0 for r in t.records)
    start = io.load_matrix(cnot_run / "cnot_start.mat", contraction=True)
    assert start.shape == (6, 6)


def test_trace_is_byte_identical(cnot_run, tmp_path, monkeypatch):
    # second run picks its directory from the environment
    monkeypatch.setenv(OUT_ENV, str(tmp_path))
    assert main(list(TRACE_ARGS)) == 0
    for name in ("cnot_trace.jsonl", "cnot_start.mat"):
        assert (tmp_path / name).read_bytes() == (cnot_run / name).read_bytes()


def test_header_config_reruns_identically(cnot_run, tmp_path):
    header = json.loads((cnot_run / "cnot_trace.jsonl").read_text().splitlines()[0])
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(header["config"]))
    assert main(["trace", "--config", str(cfg_path), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "cnot_trace.jsonl").read_bytes() == (cnot_run / "cnot_trace.jsonl").read_bytes()


def test_trace_from_start_file(cnot_run, tmp_path, capsys):
    code, out, _ = run(
        capsys, "trace", "--gate", "cnot", "--start", str(cnot_run / "cnot_start.mat"),
        "--eps-min", "0.3", "--eps-max", "1", "--eps-steps", "3", "--out", str(tmp_path),
    )
    assert code == 0 and "points: 3/3" in out
    assert not (tmp_path / "cnot_start.mat").exists()


def test_corrupt_start_file(tmp_path, capsys):
    bad = tmp_path / "bad.mat"
    bad.write_text("6 6\n1 0\n")
    code, _, err = run(capsys, "trace", "--gate", "cnot", "--start", str(bad), "--out", str(tmp_path / "o"))
    assert code == 2
    assert_one_line_error(err, "load")
    assert "entries" in err


def test_fit_and_report(cnot_run, tmp_path, capsys):
    code, out, _ = run(capsys, "fit", str(cnot_run / "cnot_trace.jsonl"), "--out", str(tmp_path))
    assert code == 0
    fit = json.loads((tmp_path / "cnot_trace_fit.json").read_text())
    assert fit["ratio"] == pytest.approx(1.03, abs=0.15)
    assert (tmp_path / "cnot_trace_fit.csv").exists() and "S1/S0" in out
    code, out, _ = run(capsys, "report", str(cnot_run / "cnot_trace.jsonl"), "--out", str(tmp_path))
    assert code == 0 and (tmp_path / "report.csv").exists()


def test_fit_on_truncated_trace_exits_3(cnot_run, tmp_path, capsys):
    lines = (cnot_run / "cnot_trace.jsonl").read_text().splitlines()
    short = tmp_path / "short.jsonl"
    short.write_text("\n".join(lines[:4]) + "\n")
    code, _, err = run(capsys, "fit", str(short), "--out", str(tmp_path))
    assert code == 3
    assert_one_line_error(err, "no-result")
    assert "0.1" in err


def test_validate(cnot_run, tmp_path, capsys):
    code, out, _ = run(capsys, "validate", str(cnot_run / "cnot_trace.jsonl"), str(cnot_run / "cnot_start.mat"))
    assert code == 0 and out.count("ok ") == 2
    broken = tmp_path / "broken.jsonl"
    text = (cnot_run / "cnot_trace.jsonl").read_text().replace('"converged": true', '"converged": 1', 1)
    broken.write_text(text)
    code, _, err = run(capsys, "validate", str(broken))
    assert code == 2
    assert_one_line_error(err, "load")
    assert "converged" in err


def test_dilate(tmp_path, capsys):
    rng = np.random.default_rng(0)
    u = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    u /= np.linalg.norm(u, 2)
    io.save_matrix(tmp_path / "u.mat", u)
    code, _, _ = run(capsys, "dilate", str(tmp_path / "u.mat"), "--out", str(tmp_path))
    assert code == 0
    w = io.load_matrix(tmp_path / "u_unitary.mat", unitary=True)
    assert w.shape == (7, 7)
    code, out, _ = run(capsys, "validate", "--unitary", str(tmp_path / "u_unitary.mat"))
    assert code == 0
    io.save_matrix(tmp_path / "big.mat", 2 * np.eye(3))
    code, _, err = run(capsys, "dilate", str(tmp_path / "big.mat"), "--out", str(tmp_path))
    assert code == 2 and "spectral_norm" in err


def test_optimize_writes_families(tmp_path, capsys):
    code, out, _ = run(capsys, "optimize", "--gate", "cnot", "--restarts", "2", "--out", str(tmp_path))
    assert code == 0
    summary = json.loads((tmp_path / "cnot_families.json").read_text())
    assert summary["families"][0]["success"] == pytest.approx(2 / 27, abs=1e-6)
    assert summary["families"][0]["knill_form"] is True


def test_custom_targets(tmp_path, capsys):
    io.save_matrix(tmp_path / "cz.mat", np.diag([1, 1, 1, -1]))
    code, out, _ = run(
        capsys, "optimize", "--target-file", str(tmp_path / "cz.mat"), "--ancillas", "2",
        "--restarts", "1", "--out", str(tmp_path),
    )
    assert code == 0 and (tmp_path / "cz_best.mat").exists()
    code, _, _ = run(
        capsys, "optimize", "--cartan", f"{np.pi / 2},0,0", "--ancillas", "2",
        "--restarts", "1", "--out", str(tmp_path),
    )
    assert code == 0 and (tmp_path / "cartan_families.json").exists()
    io.save_matrix(tmp_path / "bad.mat", np.ones((4, 4)))
    code, _, err = run(capsys, "optimize", "--target-file", str(tmp_path / "bad.mat"), "--out", str(tmp_path))
    assert code == 2 and "unitarity" in err
