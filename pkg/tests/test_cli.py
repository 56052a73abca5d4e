import json

import numpy as np
import pytest

from mcrnorm.cli import main
from mcrnorm.csvio import read_matrix_csv, write_matrix_csv


def run(tmp_path, name, *argv):
    out = tmp_path / name
    code = main(list(argv) + ["--out-dir", str(out)])
    return code, out


def test_list_presets(capsys):
    assert main(["--list-presets"]) == 0
    text = capsys.readouterr().out
    for name in ("mm-dose-discrete", "four-component", "fsvt1n-cycling", "elution", "dye"):
        assert name in text


def test_no_command_is_usage_error():
    assert main([]) == 2
    assert main(["simulate", "--method", "rk23"]) == 2


def test_simulate_mm_rk89_conservation(tmp_path):
    code, out = run(tmp_path, "mm", "simulate", "--preset", "mm", "--method", "rk89",
                    "--abs-tol", "1e-16", "--rel-tol", "1e-13")
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert all(c["max_residual"] <= 1e-12 for c in rep["conservation"])
    C, names = read_matrix_csv(out / "concentrations.csv")
    assert names == ["S", "K", "SK", "P"] and C.shape == (241, 4)
    assert (out / "concentrations.svg").read_text().startswith("<?xml")


def test_simulate_bimolecular_loose_deviation(tmp_path):
    code, out = run(tmp_path, "b", "simulate", "--preset", "bimolecular", "--abs-tol", "1e-6", "--rel-tol", "1e-3")
    assert code == 0
    assert json.loads((out / "report.json").read_text())["closed_form_max_deviation"] >= 1e-5


def test_simulate_discrete_dose_gives_rank_four(tmp_path):
    code, out = run(tmp_path, "d", "simulate", "--preset", "mm", "--method", "rk89", "--abs-tol", "1e-16",
                    "--rel-tol", "1e-13", "--dose", "discrete:K:5e-4@3")
    assert code == 0
    assert json.loads((out / "report.json").read_text())["rank"]["estimated_rank"] == 4


def test_simulate_bad_dose_is_input_error(tmp_path):
    assert run(tmp_path, "x", "simulate", "--dose", "discrete:K:oops")[0] == 2


def test_simulate_integrator_failure_exit_3(tmp_path):
    doc = {"species": ["A"], "reactions": [{"reactants": {"A": 2}, "products": {"A": 3}, "k": 1.0}],
           "y0": [1.0], "grid": {"stop": 5.0, "points": 6}}
    path = tmp_path / "blowup.json"
    path.write_text(json.dumps(doc))
    assert run(tmp_path, "g", "simulate", "--system", str(path))[0] == 3


def test_rank_of_stacked_bimolecular(tmp_path):
    _, a = run(tmp_path, "a", "synth", "--preset", "bimolecular", "--spectra", "three-component",
               "--abs-tol", "1e-14", "--rel-tol", "1e-11")
    _, b = run(tmp_path, "b", "synth", "--preset", "bimolecular-swapped", "--spectra", "three-component",
               "--abs-tol", "1e-14", "--rel-tol", "1e-11")
    code, r1 = run(tmp_path, "r1", "rank", str(a / "data.csv"))
    assert code == 0 and json.loads((r1 / "rank.json").read_text())["estimated_rank"] == 2
    _, r2 = run(tmp_path, "r2", "rank", str(a / "data.csv"), str(b / "data.csv"))
    assert json.loads((r2 / "rank.json").read_text())["estimated_rank"] == 3


def test_rank_identity(tmp_path):
    write_matrix_csv(tmp_path / "eye.csv", np.eye(5))
    _, out = run(tmp_path, "r", "rank", str(tmp_path / "eye.csv"))
    assert json.loads((out / "rank.json").read_text())["estimated_rank"] == 5


def test_normalize_fsvt1n_ext_cycle(tmp_path):
    code, out = run(tmp_path, "n", "normalize", "--matrix", "fsvt1n-cycling", "--kind", "fsvt1n-ext", "--history")
    assert code == 0
    doc = json.loads((out / "fsvt1n.json").read_text())
    assert doc["cycle_detected"] is True and doc["iterations"] == 100
    assert read_matrix_csv(out / "history.csv")[0].shape == (100, 3)


def test_normalize_l1_rows_and_zero_row(tmp_path, capsys):
    write_matrix_csv(tmp_path / "m.csv", [[1.0, 3.0], [2.0, 2.0]])
    code, out = run(tmp_path, "n", "normalize", str(tmp_path / "m.csv"), "--kind", "l1-rows")
    assert code == 0 and np.allclose(read_matrix_csv(out / "normalized.csv")[0].sum(axis=1), 1)
    write_matrix_csv(tmp_path / "z.csv", [[1.0, 3.0], [0.0, 0.0]])
    assert run(tmp_path, "z", "normalize", str(tmp_path / "z.csv"))[0] == 2
    assert "row 1" in capsys.readouterr().err


@pytest.mark.parametrize("kind", ["l1-abs", "internal-sum", "fsvt1n-int"])
def test_normalize_other_kinds(tmp_path, kind):
    code, out = run(tmp_path, kind, "normalize", "--matrix", "source-R", "--kind", kind, "--rank", "3")
    assert code == 0 and (out / "normalized.csv").is_file()


def test_titrate_verdicts(tmp_path):
    code, out = run(tmp_path, "t0", "titrate")
    assert code == 0 and json.loads((out / "report.json").read_text())["verdict"] == "rank deficient"
    code, out = run(tmp_path, "t1", "titrate", "--indicator-in-titrant", "1e-10")
    assert code == 0 and json.loads((out / "report.json").read_text())["verdict"] == "full rank"


def test_titrate_malformed_json_reports_schema_path(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"model": {"model": [[1]], "log_beta": [0]}, "protocol": {"v0": -1}}))
    assert run(tmp_path, "t", "titrate", "--protocol", str(bad))[0] == 2
    assert "$.protocol" in capsys.readouterr().err
    bad.write_text("{not json")
    assert run(tmp_path, "t2", "titrate", "--protocol", str(bad))[0] == 2


def test_reduce_exit_codes(tmp_path, capsys):
    assert run(tmp_path, "c", "reduce", "--matrix", "cyclic3")[0] == 0
    assert "irreducible" in capsys.readouterr().out
    assert run(tmp_path, "i", "reduce", "--matrix", "identity3")[0] == 1
    write_matrix_csv(tmp_path / "r.csv", np.ones((2, 3)))
    assert run(tmp_path, "r", "reduce", str(tmp_path / "r.csv"))[0] == 2


def test_scf_preset_boundary(tmp_path, capsys):
    code, out = run(tmp_path, "s", "scf", "--preset", "consecutive", "--grid-n", "51")
    assert code == 0 and "extrema on boundary" in capsys.readouterr().out
    assert read_matrix_csv(out / "scf_grid.csv")[0].shape == (51, 51)
    assert (out / "scf.svg").is_file()


def test_recover_with_known_substrate(tmp_path):
    _, s = run(tmp_path, "s", "synth", "--preset", "mm", "--method", "rk89", "--abs-tol", "1e-16",
               "--rel-tol", "1e-13", "--sd", "0.1", "--seed", "3")
    code, out = run(tmp_path, "r", "recover", "--data", str(s / "data.csv"), "--conc", str(s / "concentrations.csv"),
                    "--known", "0", "--known-spectra", str(s / "spectra.csv"))
    assert code == 0
    est, names = read_matrix_csv(out / "spectra.csv")
    A = read_matrix_csv(s / "spectra.csv")[0]
    assert names == ["K", "SK", "P"]
    cos = np.sum(est * A[:, 1:], axis=0) / np.linalg.norm(est, axis=0) / np.linalg.norm(A[:, 1:], axis=0)
    assert np.all(cos >= 0.99)


def test_recover_requires_known_spectra(tmp_path):
    write_matrix_csv(tmp_path / "d.csv", np.eye(3))
    assert run(tmp_path, "r", "recover", "--data", str(tmp_path / "d.csv"), "--conc", str(tmp_path / "d.csv"),
               "--known", "0")[0] == 2


def test_spectra_json_format(tmp_path):
    code, out = run(tmp_path, "sp", "spectra", "--spectra", "two-component", "--format", "json")
    doc = json.loads((out / "spectra.json").read_text())
    assert code == 0 and doc["columns"] == ["A", "B"] and len(doc["data"]) == 100


def test_manifest_replay_detects_changed_input(tmp_path):
    write_matrix_csv(tmp_path / "m.csv", [[1.0, 3.0], [2.0, 2.0]])
    _, out = run(tmp_path, "n", "normalize", str(tmp_path / "m.csv"))
    assert main(["--manifest", str(out / "manifest.json"), "--out-dir", str(tmp_path / "again")]) == 0
    write_matrix_csv(tmp_path / "m.csv", [[1.0, 3.0], [2.0, 5.0]])
    assert main(["--manifest", str(out / "manifest.json"), "--out-dir", str(tmp_path / "again2")]) == 2


def test_seed_changes_noise(tmp_path):
    _, a = run(tmp_path, "a", "synth", "--preset", "mm", "--sd", "0.01", "--seed", "1")
    _, b = run(tmp_path, "b", "synth", "--preset", "mm", "--sd", "0.01", "--seed", "2")
    assert (a / "data.csv").read_bytes() != (b / "data.csv").read_bytes()
    assert (a / "concentrations.csv").read_bytes() == (b / "concentrations.csv").read_bytes()
