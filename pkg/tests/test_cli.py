import json

import numpy as np
import pytest

from spectral_boundary.cli import EXIT_INPUT, EXIT_OK, EXIT_UNTRUSTED, main, parse_function
from spectral_boundary.config import RunConfig
from spectral_boundary.io import read_eigvecs, read_spectrum_csv


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_clifford(capsys):
    code, out, _ = run(capsys, "clifford", "--dim", "4", "--check")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["result"]["ok"] and doc["result"]["max_residual"] < 1e-12
    assert set(doc) == {"config", "result", "metadata"}


def test_clifford_bad_dim(capsys):
    code, _, err = run(capsys, "clifford", "--dim", "3")
    assert code == EXIT_INPUT and "error" in err


def test_check_bc_chiral(capsys):
    code, out, _ = run(capsys, "check-bc", "--operator", "dirac", "--dim", "2", "--S", "chiral")
    assert code == EXIT_OK
    assert json.loads(out)["result"]["verdict"] is True


@pytest.mark.parametrize("S,expect", [("zero", False), ("identity", False), ("chiral", True)])
def test_check_bc_dirac_dim4(capsys, S, expect):
    _, out, _ = run(capsys, "check-bc", "--operator", "dirac", "--dim", "4", "--S", S)
    assert json.loads(out)["result"]["verdict"] is expect


def test_check_bc_custom_json(capsys, tmp_path):
    spec = {"operator": {"J0": [[0, 1], [-1, 0]]}, "S": [[1, 0], [0, 0]]}
    f = tmp_path / "bc.json"
    f.write_text(json.dumps(spec))
    _, out, _ = run(capsys, "check-bc", "--input", str(f))
    assert json.loads(out)["result"]["verdict"] is True
    # complex entries as [re, im] pairs: A = i sigma_3 with a chiral-type S
    spec = {"operator": {"A": [[[0, 1], [0, 0]], [[0, 0], [0, -1]]]}, "S": [[1, 0], [0, 0]]}
    _, out, _ = run(capsys, "check-bc", "--input", json.dumps(spec))
    assert json.loads(out)["result"]["verdict"] is False
    code, _, _ = run(capsys, "check-bc", "--input", json.dumps({"operator": {"J0": [[0, 0], [0, 0]]}}))
    assert code == EXIT_INPUT


def test_spectrum_first_eigenvalue(capsys, tmp_path):
    out = tmp_path / "s.csv"
    code, _, _ = run(capsys, "spectrum", "--model", "example1d", "--grid", "256", "--out", str(out))
    assert code == EXIT_OK
    assert out.read_text().splitlines()[0] == "index,eigenvalue,mode,kernel_flag"
    data = read_spectrum_csv(out)
    nz = np.abs(data["eigenvalue"][~data["kernel_flag"]])
    assert abs(nz[0] - 1) < 1e-3
    side = json.loads((tmp_path / "s.csv.json").read_text())
    assert side["config"]["grid"] == 256


def test_roundtrip_byte_identical(capsys, tmp_path):
    out = tmp_path / "s.csv"
    run(capsys, "spectrum", "--model", "halftorus", "--grid", "32", "--modes", "8", "--out", str(out))
    first_csv = out.read_bytes()
    first = json.loads((tmp_path / "s.csv.json").read_text())
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(first))
    run(capsys, "spectrum", "--config", str(cfg))
    assert out.read_bytes() == first_csv
    second = json.loads((tmp_path / "s.csv.json").read_text())
    assert first["config"] == second["config"] and first["result"] == second["result"]


def test_analysis_from_files(capsys, tmp_path):
    s, v = tmp_path / "s.csv", tmp_path / "v.bin"
    run(capsys, "spectrum", "--grid", "512", "--out", str(s), "--eigvecs", str(v))
    assert read_eigvecs(v).shape == (1025, 1025)
    code, out, _ = run(capsys, "zeta", "--spectrum", str(s), "--s", "1")
    res = json.loads(out)["result"]
    assert code == EXIT_OK
    assert res["r"] == pytest.approx(2, abs=0.1) and res["trusted"]
    assert set(res) >= {"r", "spread", "windows", "trusted"}
    _, out, _ = run(capsys, "zeta", "--spectrum", str(s), "--s", "2", "--lambda", "40")
    assert json.loads(out)["result"]["value"] < np.pi**2 / 3
    code, _, err = run(capsys, "zeta", "--spectrum", str(s), "--lambda", "1000")
    assert code == EXIT_INPUT and "trusted" in err
    _, out, _ = run(capsys, "heat", "--spectrum", str(s))
    assert json.loads(out)["result"]["coefficients"]["a0"] == pytest.approx(np.sqrt(np.pi), rel=0.01)
    _, out, _ = run(capsys, "action", "--spectrum", str(s), "--lambda", "5,10,20")
    rows = json.loads(out)["result"]["rows"]
    assert rows[-1]["relative_error"] < 0.05
    code, out, _ = run(capsys, "tadpole", "--model", "example1d", "--spectrum", str(s), "--eigvecs", str(v), "--a", "sin", "--b", "cos:2")
    assert code == EXIT_OK and abs(json.loads(out)["result"]["r"]) < 1e-8
    code, _, _ = run(capsys, "tadpole", "--model", "example1d", "--spectrum", str(s))
    assert code == EXIT_INPUT


def test_tadpole_torus_and_strict(capsys):
    base = ["tadpole", "--grid", "128", "--modes", "32"]
    code, out, _ = run(capsys, *base, "--a", '{"-1": 1, "2": [0, 0.3]}', "--b", "exp:1")
    res = json.loads(out)["result"]
    assert code == EXIT_OK and abs(res["r"]) < 1e-8
    # the control is visible but its fit is unstable on this small grid
    code, out, err = run(capsys, *base, "--control", "--strict")
    res = json.loads(out)["result"]
    assert abs(res["r"]) > 0.1
    if not res["trusted"]:
        assert code == EXIT_UNTRUSTED and "untrusted" in err


def test_regularity_cli(capsys):
    code, out, _ = run(capsys, "regularity", "--fn", "cos", "--levels", "32,64,128", "--kmax", "1")
    res = json.loads(out)["result"]
    assert code == EXIT_OK and res["classification"][1] == "growing"
    code, _, _ = run(capsys, "regularity", "--fn", "custom")
    assert code == EXIT_INPUT
    _, out, _ = run(capsys, "regularity", "--fn", "custom", "--coeffs", '{"0": 1}', "--levels", "16,32,64", "--kmax", "1")
    assert json.loads(out)["result"]["classification"] == ["bounded", "bounded"]


def test_bad_usage(capsys):
    with pytest.raises(SystemExit) as e:
        main(["spectrum", "--nope"])
    assert e.value.code == 2
    with pytest.raises(SystemExit):
        main(["frobnicate"])
    code, _, _ = run(capsys, "spectrum", "--model", "halftorus", "--backend", "basis")
    assert code == EXIT_INPUT


def test_config_mismatch(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(RunConfig(command="zeta").to_dict()))
    code, _, err = run(capsys, "heat", "--config", str(cfg))
    assert code == EXIT_INPUT and "zeta" in err
    cfg.write_text(json.dumps({"bogus": 1}))
    code, _, _ = run(capsys, "heat", "--config", str(cfg))
    assert code == EXIT_INPUT


def test_parse_function():
    f = parse_function("cos:2")
    assert f(0.0) == pytest.approx(1.0)
    g = parse_function("exp:-1", tangential=True)
    assert g.coeffs.coeffs.tolist() == [1, 0, 0]
    h = parse_function({"1": [0, 1]})
    assert h.coeffs[-1] == 1j
    with pytest.raises(ValueError):
        parse_function("tan")


def test_threads_flag(capsys, monkeypatch):
    from spectral_boundary.spectral import THREADS_ENV, thread_count

    monkeypatch.setenv(THREADS_ENV, "1")
    code, _, _ = run(capsys, "clifford", "--threads", "2")
    assert code == EXIT_OK and thread_count() == 2


def test_verify_all_example(capsys, tmp_path):
    rep = tmp_path / "rep"
    code, _, err = run(capsys, "verify-all", "--model", "example1d", "--grid", "512", "--report", str(rep))
    assert code == EXIT_OK
    doc = json.loads((rep / "report.json").read_text())
    assert doc["result"]["passed"]
    assert [c["number"] for c in doc["result"]["criteria"]] == [1, 2, 3, 4, 5, 8, 9]
    assert (rep / "criteria.csv").read_text().startswith("number,name,passed,limit")
    assert (rep / "figures" / "spectrum_1d.png").exists()
    assert err.count("[PASS]") == 7


def test_verify_all_reports_failure(capsys, monkeypatch):
    from spectral_boundary import verification

    failing = verification._timed(99, "always fails", 1.0)(lambda: (False, {}, {}))
    monkeypatch.setattr(verification, "select", lambda model: [failing])
    code, out, err = run(capsys, "verify-all")
    assert code == 1
    assert "[FAIL]" in err
    assert json.loads(out)["result"]["passed"] is False
