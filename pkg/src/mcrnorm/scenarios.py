"""Reproducible numerical experiments built from the library modules.

Each function runs one experiment with fixed settings and returns a small
dict of the measured quantities (plus the matrices involved where useful),
so the tests and the CLI share one definition of every experiment.
"""

from __future__ import annotations

import numpy as np

from . import kinetics as kin
from .bilinear import (
    SPECTRUM_PRESETS, NoiseSpec, add_noise, augmented_estimate, cosine_similarity, estimate_spectra,
    estimate_with_known, gaussian_spectra, make_rng, premix_recovery, spectral_error,
)
from .normalization import closure_stats
from .odeint import IntegratorConfig
from .speciation import DYE_COLUMNS, dye_protocol, dye_model, titrate

LOOSE = IntegratorConfig("RK45", abs_tol=1e-6, rel_tol=1e-3)
TIGHT_RK45 = IntegratorConfig("RK45", abs_tol=1e-14, rel_tol=1e-11)
TIGHT_RK89 = IntegratorConfig("RK89", abs_tol=1e-16, rel_tol=1e-13)


def singular_values(M) -> np.ndarray:
    return np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)


def run_preset(name: str, cfg: IntegratorConfig) -> kin.Simulation:
    p = kin.get_preset(name)
    return kin.simulate(p.system, p.grid, cfg, p.doses, natural_steps=p.natural_steps)


def bimolecular_accuracy(cfg: IntegratorConfig, preset: str = "bimolecular") -> dict:
    """Max-norm deviation of the simulated X, Y, Z from the exact solution."""
    p = kin.get_preset(preset)
    sim = run_preset(preset, cfg)
    X0, Y0, Z0 = p.system.y0
    exact = kin.bimolecular_closed_form(p.system.reactions[0].k, X0, Y0, Z0, sim.times)
    return {"deviation": float(np.max(np.abs(sim.C - exact))), "steps": sim.steps_accepted,
            "times": sim.times, "C": sim.C, "exact": exact}


def mm_conservation(cfg: IntegratorConfig = TIGHT_RK89) -> dict:
    p = kin.get_preset("mm")
    sim = run_preset("mm", cfg)
    s = singular_values(sim.C)
    return {
        "residuals": kin.conservation_residuals(sim.C, p.laws),
        "singular_values": s,
        "ratio": float(s[3] / s[0]),
        "closure": closure_stats(sim.C),
        "C": sim.C,
        "times": sim.times,
    }


def augmentation(cfg: IntegratorConfig = TIGHT_RK45, spectra: str = "three-component") -> dict:
    """Two bimolecular runs with exchanged X0/Y0, each rank 2, stacked to rank 3."""
    A = gaussian_spectra(SPECTRUM_PRESETS[spectra])
    C1 = run_preset("bimolecular", cfg).C
    C2 = run_preset("bimolecular-swapped", cfg).C
    D1, D2 = C1 @ A.T, C2 @ A.T
    s1 = singular_values(D1)
    s12 = singular_values(np.vstack([D1, D2]))
    est = augmented_estimate([(D1, C1), (D2, C2)])
    rel = float(np.linalg.norm(est.A - A) / np.linalg.norm(A))
    return {"ratio_single": float(s1[2] / s1[0]), "ratio_stacked": float(s12[2] / s12[0]),
            "sv_single": s1, "sv_stacked": s12, "recovery_error": rel, "A": A, "A_est": est.A}


def dosing(preset: str, sd: float, seed: int = 0, cfg: IntegratorConfig = TIGHT_RK89) -> dict:
    """sigma_4 of a dosed Michaelis-Menten run and the least-squares spectra
    from noisy data."""
    A = gaussian_spectra(SPECTRUM_PRESETS["four-component"])
    sim = run_preset(preset, cfg)
    s = singular_values(sim.C)
    D = add_noise(sim.C @ A.T, NoiseSpec(sd, seed))
    est = estimate_spectra(D, sim.C, warn=False)
    return {"sigma4": float(s[3]), "singular_values": s, "spectral_error": spectral_error(est.A, A),
            "C": sim.C, "times": sim.times, "A_est": est.A, "A": A}


def known_spectrum_recovery(sd: float, seed: int = 0, known=(0,), cfg: IntegratorConfig = TIGHT_RK89) -> dict:
    """Undosed (rank 3) Michaelis-Menten data; the spectra of ``known``
    components are supplied and the rest estimated."""
    A = gaussian_spectra(SPECTRUM_PRESETS["four-component"])
    sim = run_preset("mm", cfg)
    D = add_noise(sim.C @ A.T, NoiseSpec(sd, seed))
    known = sorted(known)
    est = estimate_with_known(D, sim.C, known, A[:, known], warn=False)
    unknown = [j for j in range(A.shape[1]) if j not in known]
    return {"cosine": cosine_similarity(est.A, A[:, unknown]), "unknown": unknown,
            "A_est": est.A, "rank_deficient": est.rank_deficient}


def practical_premix(sd: float = 0.003, ratio: float = 1000.0, seed: int = 0) -> dict:
    """Enzyme spectrum from a substrate-only and an initial-mixture
    measurement when the substrate is ``ratio`` times more concentrated."""
    A = gaussian_spectra(SPECTRUM_PRESETS["four-component"])
    S0, K0 = 1.0, 1.0 / ratio
    rng = make_rng(seed)
    d0 = S0 * A[:, 0] + K0 * A[:, 1] + sd * rng.standard_normal(A.shape[0])
    a_sm = S0 * A[:, 0] + sd * rng.standard_normal(A.shape[0])
    a_s, a_k = premix_recovery(a_sm, d0, S0, K0)
    return {"cosine_enzyme": cosine_similarity(a_k, A[:, 1]),
            "cosine_substrate": cosine_similarity(a_s, A[:, 0]), "a_S": a_s, "a_K": a_k}


def titration(indicator_in_titrant: float = 0.0) -> dict:
    res = titrate(dye_model(), dye_protocol(indicator_in_titrant))
    C = res.C[:, DYE_COLUMNS]
    s = singular_values(C)
    return {"singular_values": s, "ratios": s / s[0], "max_residual": float(np.max(res.residuals)),
            "all_converged": res.all_converged, "iterations": res.iterations, "C": C, "result": res}


def dilution_deviation(dye: int = 0) -> dict:
    """Relative gap between a dye's total concentration and the straight
    line joining its first and last values, near the middle of the run."""
    proto = dye_protocol(0.0)
    res = titrate(dye_model(), proto)
    acid, base = {0: (0, 4), 1: (1, 5), 2: (2, 6)}[dye]
    total = res.C[:, acid] + res.C[:, base]
    v = proto.v_added
    chord = total[0] + (total[-1] - total[0]) * (v - v[0]) / (v[-1] - v[0])
    mid = int(np.argmin(np.abs(v - 0.5 * (v[0] + v[-1]))))
    rel = np.abs(total - chord) / chord
    return {"mid_index": mid, "mid_deviation": float(rel[mid]), "max_deviation": float(rel.max()),
            "volumes": v, "total": total, "chord": chord}

