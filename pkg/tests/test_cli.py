import csv
import io as _io
import json
import subprocess
import sys

import numpy as np
import pytest

from riskbif import REFERENCE_PARAMS
from riskbif.cli import main
from riskbif.io import BRANCH_HEADER


def run(args, tmp_path, name="out.txt"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    text = out.read_text() if out.exists() else ""
    return code, text


def write_params(tmp_path, **over):
    path = tmp_path / "params.json"
    path.write_text(json.dumps({**REFERENCE_PARAMS, **over}))
    return str(path)


def rows(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.reader(_io.StringIO("\n".join(lines))))


# -- exit codes ----------------------------------------------------------------------


def test_equilibria_json(tmp_path):
    code, text = run(["equilibria"], tmp_path)
    doc = json.loads(text)
    assert code == 0
    assert next(iter(doc)) == "schema_version" and doc["schema_version"] == "1"
    assert doc["R0"] == pytest.approx(2.26244344, abs=1e-8)
    assert doc["E1"]["stability"] == "saddle"


def test_missing_file_exits_1(tmp_path):
    assert main(["equilibria", "--params", str(tmp_path / "nope.json")]) == 1


def test_malformed_json_exits_1(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["equilibria", "--params", str(p)]) == 1


def test_invalid_parameters_exit_2(tmp_path):
    bad = dict(REFERENCE_PARAMS)
    bad.pop("beta")
    p = tmp_path / "p.json"
    p.write_text(json.dumps(bad))
    assert main(["equilibria", "--params", str(p)]) == 2
    assert main(["equilibria", "--params", write_params(tmp_path, T_total=-1.0)]) == 2
    assert main(["equilibria", "--tol", "-1"]) == 2
    assert main(["simulate", "--t-span", "5,1", "--out", str(tmp_path / "s.csv")]) == 2
    assert main(["simulate", "--x0", "1,2", "--out", str(tmp_path / "s.csv")]) == 2


def test_structure_failure_exits_3(tmp_path):
    # the reference point is not a double zero
    code, _ = run(["normal-form", "--as-is"], tmp_path)
    assert code == 3


def test_sweep_without_crossing_exits_4(tmp_path):
    rep = tmp_path / "rep.json"
    code, text = run(["sweep", "--param", "beta", "--from", "0.6", "--to", "0.8", "--steps", "5", "--report", str(rep)], tmp_path)
    assert code == 4
    doc = json.loads(rep.read_text())
    assert doc["found"] is False and doc["schema_version"] == "1"


# -- commands ----------------------------------------------------------------------------


def test_sweep_csv_and_report(tmp_path):
    rep = tmp_path / "rep.json"
    code, text = run(["sweep", "--param", "beta", "--from", "0.40", "--to", "0.50", "--steps", "11", "--report", str(rep)], tmp_path)
    assert code == 0
    lines = text.splitlines()
    assert lines[0] == BRANCH_HEADER
    assert len(lines) == 12
    table = rows(text)
    assert all(len(r) == len(table[0]) for r in table)
    doc = json.loads(rep.read_text())
    assert doc["found"] and doc["critical_value"] == pytest.approx(0.442, abs=1e-9)


def test_simulate_header_and_plane(tmp_path):
    code, text = run(["simulate", "--x0", "30,0,20", "--t-span", "0,50", "--dt", "1"], tmp_path)
    assert code == 0
    table = rows(text)
    assert table[0] == ["t", "S", "I", "U"]
    data = np.array(table[1:], dtype=float)
    assert len(data) == 51
    np.testing.assert_allclose(data[:, 0], np.arange(51), atol=1e-9)
    assert np.max(np.abs(data[:, 2])) <= 1e-10


def test_simulate_zero_span(tmp_path):
    code, text = run(["simulate", "--x0", "30,1,2", "--t-span", "3,3"], tmp_path)
    assert code == 0
    assert rows(text)[1:] == [["3", "30", "1", "2"]]


def test_simulate_full_and_events(tmp_path):
    code, text = run(["simulate", "--full", "--events", "--t-span", "0,100"], tmp_path)
    assert code == 0
    table = rows(text)
    assert table[0] == ["t", "S", "I", "U", "P", "event"]
    data = np.array([r[:5] for r in table[1:]], dtype=float)
    T = REFERENCE_PARAMS["T_total"]
    assert np.max(np.abs(data[:, 1:].sum(axis=1) - T)) <= 1e-8 * T
    assert data[:, 1:].min() >= -1e-9
    assert sum(r[5] == "section" for r in table[1:]) >= 3


def test_hopf_found_and_not_found(tmp_path):
    code, text = run(["hopf", "--param", "beta", "--from", "0.55", "--to", "0.6"], tmp_path)
    doc = json.loads(text)
    assert code == 0 and doc["found"] and doc["value"] == pytest.approx(0.5605196922, abs=1e-8)
    code, text = run(["hopf", "--param", "gamma", "--from", "0", "--to", "1"], tmp_path)
    doc = json.loads(text)
    assert code == 0 and doc["found"] is False and doc["reason"]


def test_cycle(tmp_path):
    code, text = run(["cycle"], tmp_path)
    doc = json.loads(text)
    assert code == 0 and doc["found"]
    assert doc["period"] == pytest.approx(20.4416454582, rel=1e-8)
    # below the Hopf value the endemic focus is stable: a structured "not found"
    code, text = run(["cycle", "--params", write_params(tmp_path, beta=0.55)], tmp_path)
    doc = json.loads(text)
    assert code == 0 and doc["found"] is False


def test_cycle_ramp(tmp_path):
    code, text = run(["cycle", "--ramp-param", "a1", "--ramp-values", "8,9"], tmp_path)
    doc = json.loads(text)
    assert code == 0 and len(doc["ramp"]["rows"]) == 2
    assert main(["cycle", "--ramp-param", "a1"]) == 2


def test_tbt_and_normal_form(tmp_path):
    code, text = run(["tbt"], tmp_path)
    doc = json.loads(text)
    assert code == 0 and doc["ok"] and doc["schema_version"] == "1"
    code, text = run(["normal-form"], tmp_path)
    doc = json.loads(text)
    assert code == 0
    assert doc["b2"] == pytest.approx(5.798275605729689e-6, rel=1e-8)
    assert doc["a2_is_zero"] is True


def test_json_floats_are_rounded(tmp_path):
    _, text = run(["equilibria"], tmp_path)
    doc = json.loads(text)
    assert doc["R0"] == float(f"{2.2624434389140271:.12g}")


# -- entry point and determinism -------------------------------------------------------------


def test_module_entry_point_is_byte_identical(tmp_path):
    cmd = [sys.executable, "-m", "riskbif", "sweep", "--param", "beta", "--from", "0.4", "--to", "0.6", "--steps", "9"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b and a.startswith(BRANCH_HEADER.encode())
