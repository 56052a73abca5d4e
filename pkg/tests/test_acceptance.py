"""Acceptance criteria 1-12, one test each."""

import time

import numpy as np
import pytest

from mcrnorm import scenarios as sc
from mcrnorm.cli import main
from mcrnorm.datasets import CYCLIC_PERMUTATION, FSVT1N_CYCLING
from mcrnorm.manifest import RunManifest
from mcrnorm.normalization import fsvt1n_external
from mcrnorm.odeint import IntegratorConfig, integrate
from mcrnorm.reducibility import is_irreducible
from mcrnorm.scf import norm_identity_check, scf_boundary_study, two_component_data

from test_reducibility import brute_force_irreducible


def test_01_bimolecular_solver_accuracy():
    start = time.perf_counter()
    loose = sc.bimolecular_accuracy(sc.LOOSE)
    tight = sc.bimolecular_accuracy(sc.TIGHT_RK45)
    elapsed = time.perf_counter() - start
    assert loose["deviation"] >= 1e-5
    assert tight["deviation"] <= 1e-9
    assert elapsed < 1.0


def test_02_michaelis_menten_conservation():
    tight = sc.mm_conservation(sc.TIGHT_RK89)
    assert np.all(tight["residuals"] <= 1e-12)
    assert tight["ratio"] <= 1e-12
    # low-accuracy emulation (RK45 at abs 1e-6 / rel 1e-3)
    loose = sc.mm_conservation(sc.LOOSE)
    assert 1e-13 <= loose["ratio"] <= 1e-3, f"sigma4/sigma1 = {loose['ratio']:.3e}"


def test_03_augmentation():
    start = time.perf_counter()
    r = sc.augmentation()
    elapsed = time.perf_counter() - start
    assert r["ratio_single"] <= 1e-12
    assert r["ratio_stacked"] >= 0.05
    assert 0.5 * 0.061 <= r["ratio_stacked"] <= 1.5 * 0.061
    assert r["recovery_error"] <= 1e-8
    assert elapsed < 2.0


def test_04_dosing():
    cont = sc.dosing("mm-dose-continuous", 1e-4)
    disc = sc.dosing("mm-dose-discrete", 1e-3)
    assert cont["sigma4"] > 1e-5
    assert disc["sigma4"] > 1e-4
    for ref, ours in ((1.76e-4, cont["sigma4"]), (5.56e-4, disc["sigma4"])):
        assert 0.1 * ref <= ours <= 10 * ref
    # spectral error is checked with the 0.005 total enzyme dose
    cont_l = sc.dosing("mm-dose-continuous-large", 1e-4)
    disc_l = sc.dosing("mm-dose-discrete-large", 1e-3)
    assert np.all(cont_l["spectral_error"] < 0.05)
    assert np.all(disc_l["spectral_error"] < 0.05)


def test_05_known_spectrum_recovery():
    clean = sc.known_spectrum_recovery(0.0)
    noisy = sc.known_spectrum_recovery(0.1, seed=0)
    assert clean["unknown"] == [1, 2, 3]
    assert np.all(clean["cosine"] >= 0.999)
    assert np.all(noisy["cosine"] >= 0.99)


def test_06_fsvt1n_divergence():
    it = {n: fsvt1n_external(FSVT1N_CYCLING, 3, 1e-15, n, keep_history=False).scores for n in range(100, 104)}
    assert np.max(np.abs(it[100] - it[102])) <= 1e-10
    assert np.max(np.abs(it[101] - it[103])) <= 1e-10
    assert np.max(np.abs(it[100] - it[101])) > 0.1
    assert np.max(np.abs(it[102] - it[103])) > 0.1
    assert it[100][0, 0] == pytest.approx(1.9174, abs=5e-4)
    assert it[101][0, 0] == pytest.approx(0.5215, abs=5e-4)


def test_07_reducibility():
    assert not is_irreducible(FSVT1N_CYCLING).irreducible
    assert not is_irreducible(np.eye(3)).irreducible
    assert is_irreducible(CYCLIC_PERMUTATION).irreducible
    rng = np.random.default_rng(7)
    for _ in range(1000):
        M = (rng.random((4, 4)) < 0.35).astype(float)
        assert is_irreducible(M).irreducible == brute_force_irreducible(M)


def test_08_titration():
    start = time.perf_counter()
    deficient = sc.titration(0.0)
    full = sc.titration(1e-10)
    elapsed = time.perf_counter() - start
    assert deficient["ratios"][4] < 1e-6
    # concentrations here are mol/L; the reference values are 1000x larger
    assert np.all(1e3 * full["singular_values"] > 1e-9)
    for k, ref in ((4, 3.907e-8 / 0.2446), (5, 1.296e-8 / 0.2446)):
        assert ref / 10 <= full["ratios"][k] <= ref * 10
    assert deficient["max_residual"] < 1e-12 and full["max_residual"] < 1e-12
    assert deficient["all_converged"] and full["all_converged"]
    assert elapsed < 1.0


def test_09_dilution_nonlinearity():
    r = sc.dilution_deviation(0)
    assert r["mid_deviation"] > 0.005


def test_10_scf_norm_identity_and_boundary_extrema():
    rng = np.random.default_rng(10)
    for _ in range(1000):
        n = int(rng.integers(2, 15))
        k = int(rng.integers(1, n + 1))
        U = np.linalg.qr(rng.standard_normal((n, k)))[0]
        y = rng.standard_normal(k)
        a, b = norm_identity_check(U, y)
        assert abs(a - b) <= 1e-12 * max(1.0, b)
    for preset in ("consecutive", "elution"):
        D = two_component_data(preset)[0]
        study = scf_boundary_study(D, grid_n=201)
        assert study.max_on_boundary and study.min_on_boundary, preset


def _order(method, steps):
    def rhs(t, y):
        return np.array([np.cos(t)])

    err = [abs(integrate(rhs, [0.0], [0.0, 10.0], IntegratorConfig(method, fixed_step=h)).states[-1, 0]
               - np.sin(10.0)) for h in steps]
    return np.polyfit(np.log(steps), np.log(err), 1)[0]


def test_11_integrator_order():
    assert abs(_order("RK45", [0.4, 0.2, 0.1, 0.05]) - 5) <= 0.5
    assert abs(_order("RK89", [2.5, 1.25, 0.625]) - 8) <= 0.5


def test_12_manifest_replay_is_byte_identical(tmp_path):
    synth = tmp_path / "synth"
    commands = [
        ("synth", ["synth", "--preset", "mm", "--method", "rk89", "--abs-tol", "1e-16", "--rel-tol", "1e-13",
                   "--sd", "0.1", "--seed", "11"]),
        ("simulate", ["simulate", "--preset", "mm-dose-discrete", "--method", "rk89"]),
        ("rank", ["rank", str(synth / "data.csv")]),
        ("normalize", ["normalize", "--matrix", "fsvt1n-cycling", "--kind", "fsvt1n-ext", "--history"]),
        ("titrate", ["titrate", "--indicator-in-titrant", "1e-10"]),
        ("reduce", ["reduce", "--matrix", "cyclic3"]),
        ("scf", ["scf", "--preset", "elution"]),
        ("recover", ["recover", "--data", str(synth / "data.csv"), "--conc", str(synth / "concentrations.csv"),
                     "--known", "0", "--known-spectra", str(synth / "spectra.csv")]),
        ("spectra", ["spectra", "--spectra", "four-component"]),
    ]
    for name, argv in commands:
        out = tmp_path / name
        assert main(argv + ["--out-dir", str(out)]) == 0, name
        manifest = RunManifest.read(out / "manifest.json")
        csvs = sorted(p for p in manifest.outputs if p.endswith(".csv"))
        assert csvs, name
        again = tmp_path / f"{name}-replay"
        assert main(["--manifest", str(out / "manifest.json"), "--out-dir", str(again)]) == 0, name
        for f in csvs:
            assert (again / f).read_bytes() == (out / f).read_bytes(), f"{name}: {f}"
