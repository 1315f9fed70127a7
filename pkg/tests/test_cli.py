import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from dgbem.cli import EXIT_ASSERT, EXIT_OK, EXIT_USAGE, main
from dgbem.coupling import read_solution
from dgbem.mesh import read_mesh


def run(tmp_path, study, config, *extra):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(config))
    return main([study, "--config", str(cfg), "--out", str(tmp_path / "out"), *extra])


def table(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_converge_study(tmp_path):
    code = run(tmp_path, "converge", {"geometry": "square", "k": 1, "xi": 1, "levels": 4})
    assert code == EXIT_OK
    rows = table(tmp_path / "out" / "convergence.csv")
    assert len(rows) == 4
    h1 = [float(r["h1"]) for r in rows]
    assert all(b < a for a, b in zip(h1, h1[1:]))
    assert rows[0]["eoc_h1"] == "" and float(rows[-1]["eoc_h1"]) > 0.8


def test_coercivity_study_large_sigma(tmp_path):
    code = run(tmp_path, "coercivity", {"geometry": "lshape", "k": 1, "xi": 1, "sigma": 1e4, "levels": 2})
    assert code == EXIT_OK
    rows = table(tmp_path / "out" / "spectrum.csv")
    assert len(rows) == 2
    assert all(float(r["min_quotient"]) >= 0.25 - 1e-3 for r in rows)


def test_coercivity_study_small_sigma_fails(tmp_path, capsys):
    code = run(tmp_path, "coercivity", {"k": 1, "xi": 1, "sigma": 0.5, "levels": 1})
    assert code == EXIT_ASSERT
    assert "quotient" in capsys.readouterr().err


def test_solve_study_files(tmp_path):
    code = run(tmp_path, "solve", {"k": 2, "xi": 0, "levels": 2})
    assert code == EXIT_OK
    out = tmp_path / "out"
    mesh = read_mesh(out / "mesh.txt")
    sol = read_solution(out / "solution.txt")
    assert sol["mesh"] == mesh.hash()
    assert len(sol["u"]) == 6 * mesh.n_triangles
    errs = table(out / "errors.csv")[0]
    assert float(errs["lambda_mean"]) < 1e-10


def test_theory_study(tmp_path):
    code = run(tmp_path, "theory", {"k": 1, "levels": 3, "samples": 20})
    assert code == EXIT_OK
    rows = table(tmp_path / "out" / "constants.csv")
    names = {r["constant"] for r in rows}
    assert names == {"C_star", "C_PF", "C_ref", "lemma_ratio_max"}
    ref = [r for r in rows if r["constant"] == "C_ref" and r["k"] == "1" and r["s"] == "0.4"]
    assert float(ref[0]["value"]) > 10 * 2 ** -0.2


def test_selftest(tmp_path):
    assert main(["selftest", "--out", str(tmp_path / "st")]) == EXIT_OK
    rows = table(tmp_path / "st" / "selftest.csv")
    assert rows and all(r["passed"] == "1" for r in rows)


@pytest.mark.parametrize("field, value", [("k", 0), ("xi", 2), ("sigma", -1.0), ("levels", 0), ("geometry", "disc")])
def test_malformed_config(tmp_path, capsys, field, value):
    code = run(tmp_path, "solve", {field: value})
    assert code == EXIT_USAGE
    assert f"'{field}'" in capsys.readouterr().err


def test_unknown_field_and_bad_json(tmp_path, capsys):
    assert run(tmp_path, "solve", {"penalty": 3}) == EXIT_USAGE
    assert "penalty" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["solve", "--config", str(bad)]) == EXIT_USAGE


def test_bad_case_field(tmp_path, capsys):
    assert run(tmp_path, "solve", {"case": {"x0": [3.0, 3.0]}}) == EXIT_USAGE
    assert "'case'" in capsys.readouterr().err


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == EXIT_USAGE


def test_deterministic_outputs_identical(tmp_path):
    config = {"geometry": "lshape", "k": 1, "sigmas": [4.0, 16.0], "levels": 2}
    outs = []
    for name, extra in (("a", ["--deterministic"]), ("b", ["--threads", "3"])):
        cfg = tmp_path / f"{name}.json"
        cfg.write_text(json.dumps(config))
        assert main(["coercivity", "--config", str(cfg), "--out", str(tmp_path / name), *extra]) in (EXIT_OK, EXIT_ASSERT)
        outs.append((tmp_path / name / "spectrum.csv").read_bytes())
    assert outs[0] == outs[1]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "dgbem", "selftest", "--out", str(tmp_path / "m")],
                          capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    assert "ok" in proc.stdout
