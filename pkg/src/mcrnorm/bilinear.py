"""Bilinear data D = C A^T: Gaussian spectra, seeded noise and spectrum
recovery by least squares (plain, with known spectra, augmented, pre-mix).

Noise comes from numpy's Philox4x32-10 counter-based generator
(``np.random.Generator(np.random.Philox(seed))``), whose output stream for a
given key is specified independently of numpy and so can be reproduced
elsewhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .matcore import LstsqResult, as_matrix, least_squares


@dataclass(frozen=True)
class Peak:
    amplitude: float
    center: float
    width: float  # denominator of the exponent, exp(-(x - center)^2 / width)
    baseline: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("peak amplitude must be non-negative")
        if not self.width > 0:
            raise ValueError("peak width must be positive")
        if self.baseline < 0:
            raise ValueError("baseline must be non-negative")


@dataclass(frozen=True)
class SpectrumSet:
    channels: np.ndarray
    peaks: tuple

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=float).ravel()
        if ch.size == 0:
            raise ValueError("channel grid is empty")
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "peaks", tuple(self.peaks))

    @property
    def names(self) -> list[str]:
        return [p.name or f"c{i + 1}" for i, p in enumerate(self.peaks)]

    def to_dict(self) -> dict:
        return {
            "channels": [float(c) for c in self.channels],
            "components": [
                {"name": p.name, "amplitude": p.amplitude, "center": p.center,
                 "width": p.width, "baseline": p.baseline}
                for p in self.peaks
            ],
        }


def gaussian_spectra(spec: SpectrumSet) -> np.ndarray:
    """Matrix A (channels x components), ``amp * exp(-(x - c)^2 / w) + base``."""
    x = spec.channels[:, None]
    amp = np.array([p.amplitude for p in spec.peaks])
    cen = np.array([p.center for p in spec.peaks])
    wid = np.array([p.width for p in spec.peaks])
    base = np.array([p.baseline for p in spec.peaks])
    return amp * np.exp(-((x - cen) ** 2) / wid) + base


CHANNELS = np.arange(1.0, 101.0)

SPECTRUM_PRESETS = {
    "three-component": SpectrumSet(CHANNELS, (
        Peak(2.5, 20, 200, 0.075, "X"),
        Peak(12.5, 40, 200, 0.075, "Y"),
        Peak(10.0, 60, 200, 0.065, "Z"),
    )),
    "four-component": SpectrumSet(CHANNELS, (
        Peak(2.5, 20, 200, 0.075, "S"),
        Peak(12.5, 40, 200, 0.075, "K"),
        Peak(10.0, 60, 200, 0.065, "SK"),
        Peak(1.0, 80, 100, 0.065, "P"),
    )),
    "two-component": SpectrumSet(CHANNELS, (
        Peak(1.0, 35, 150, 0.05, "A"),
        Peak(0.8, 65, 250, 0.04, "B"),
    )),
}


def spectrum_set_from_dict(doc: dict) -> SpectrumSet:
    if "channels" in doc:
        ch = np.asarray(doc["channels"], dtype=float)
    else:
        g = doc.get("grid", {"start": 1, "stop": 100, "points": 100})
        ch = np.linspace(float(g["start"]), float(g["stop"]), int(g["points"]))
    peaks = [Peak(float(c["amplitude"]), float(c["center"]), float(c["width"]),
                  float(c.get("baseline", 0.0)), str(c.get("name", "")))
             for c in doc["components"]]
    return SpectrumSet(ch, peaks)


def load_spectrum_set(path) -> SpectrumSet:
    from .schemas import validate_document

    doc = json.loads(Path(path).read_text())
    validate_document(doc, "spectrum_set")
    return spectrum_set_from_dict(doc)


def get_spectrum_preset(name: str) -> SpectrumSet:
    try:
        return SPECTRUM_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown spectrum preset {name!r}; choose from {sorted(SPECTRUM_PRESETS)}") from None


def bilinear_data(C, A) -> np.ndarray:
    C = as_matrix(C, "C")
    A = as_matrix(A, "A")
    if C.shape[1] != A.shape[1]:
        raise ValueError(f"C has {C.shape[1]} components, A has {A.shape[1]}")
    return C @ A.T


@dataclass(frozen=True)
class NoiseSpec:
    sd: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.sd) and self.sd >= 0):
            raise ValueError(f"noise sd must be >= 0, got {self.sd}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def add_noise(D, spec: NoiseSpec) -> np.ndarray:
    """``D + sd * N(0, 1)`` drawn in row-major order from Philox(seed)."""
    D = as_matrix(D, "D")
    if spec.sd == 0:
        return D.copy()
    return D + spec.sd * make_rng(spec.seed).standard_normal(D.shape)


@dataclass(frozen=True)
class SpectraEstimate:
    A: np.ndarray
    rank: int
    rank_deficient: bool
    singular_values: np.ndarray
    residual: float = float("nan")

    @classmethod
    def from_lstsq(cls, res: LstsqResult, residual: float) -> "SpectraEstimate":
        return cls(res.x.T, res.rank, res.rank_deficient, res.singular_values, residual)


def _fit(C, D, rel_tolerance, warn) -> SpectraEstimate:
    res = least_squares(C, D, rel_tolerance=rel_tolerance, warn=warn)
    resid = float(np.linalg.norm(C @ res.x - D))
    return SpectraEstimate.from_lstsq(res, resid)


def estimate_spectra(D, C, rel_tolerance: float | None = None, warn: bool = True) -> SpectraEstimate:
    """Least-squares spectra ``A`` (channels x components) from ``D ~ C A^T``."""
    D = as_matrix(D, "D")
    C = as_matrix(C, "C")
    if D.shape[0] != C.shape[0]:
        raise ValueError(f"D has {D.shape[0]} rows, C has {C.shape[0]}")
    return _fit(C, D, rel_tolerance, warn)


def estimate_with_known(D, C, known: Sequence[int], A_known, rel_tolerance: float | None = None,
                        warn: bool = True) -> SpectraEstimate:
    """Spectra of the components not in ``known``, after subtracting the
    contribution of the known ones from ``D``.

    The returned ``A`` has the unknown components in increasing index order.
    """
    D = as_matrix(D, "D")
    C = as_matrix(C, "C")
    if D.shape[0] != C.shape[0]:
        raise ValueError(f"D has {D.shape[0]} rows, C has {C.shape[0]}")
    known = sorted(set(int(k) for k in known))
    ncomp = C.shape[1]
    if any(k < 0 or k >= ncomp for k in known):
        raise ValueError(f"known indices must be in [0, {ncomp})")
    A_known = np.asarray(A_known, dtype=float)
    if A_known.ndim == 1:
        A_known = A_known[:, None]
    if A_known.shape != (D.shape[1], len(known)):
        raise ValueError(f"A_known must be {D.shape[1]} x {len(known)}, got {A_known.shape}")
    unknown = [j for j in range(ncomp) if j not in known]
    R = D - C[:, known] @ A_known.T
    if not unknown:
        return SpectraEstimate(np.zeros((D.shape[1], 0)), 0, False, np.zeros(0), float(np.linalg.norm(R)))
    return _fit(C[:, unknown], R, rel_tolerance, warn)


def augmented_estimate(pairs: Sequence[tuple], rel_tolerance: float | None = None,
                       warn: bool = True) -> SpectraEstimate:
    """Solve ``[D1; D2; ...] ~ [C1; C2; ...] A^T`` for a shared ``A``."""
    if not pairs:
        raise ValueError("need at least one (D, C) pair")
    Ds, Cs = [], []
    for i, (D, C) in enumerate(pairs):
        D = as_matrix(D, f"D{i + 1}")
        C = as_matrix(C, f"C{i + 1}")
        if D.shape[0] != C.shape[0]:
            raise ValueError(f"pair {i + 1}: D has {D.shape[0]} rows, C has {C.shape[0]}")
        if Ds and (D.shape[1] != Ds[0].shape[1] or C.shape[1] != Cs[0].shape[1]):
            raise ValueError(f"pair {i + 1} has inconsistent channel or component count")
        Ds.append(D)
        Cs.append(C)
    return _fit(np.vstack(Cs), np.vstack(Ds), rel_tolerance, warn)


def premix_recovery(a_substrate_measured, d_initial_row, S0: float, K0: float):
    """Pure substrate and enzyme spectra from two pre-reaction measurements.

    ``a_substrate_measured`` is the substrate solution alone (S0 times its
    spectrum), ``d_initial_row`` the mixture right after the enzyme is added.
    """
    if not (S0 > 0 and K0 > 0):
        raise ValueError("S0 and K0 must be positive (K0 = 0 leaves the enzyme undetermined)")
    a_sm = np.asarray(a_substrate_measured, dtype=float).ravel()
    d0 = np.asarray(d_initial_row, dtype=float).ravel()
    if a_sm.shape != d0.shape:
        raise ValueError("measured spectra must have the same length")
    return a_sm / S0, (d0 - a_sm) / K0


def spectral_error(A_est, A_true) -> np.ndarray:
    """Per-component relative RMS error ``rms(A_est - A) / rms(A)``."""
    A_est = np.asarray(A_est, dtype=float)
    A_true = np.asarray(A_true, dtype=float)
    return np.sqrt(np.mean((A_est - A_true) ** 2, axis=0) / np.mean(A_true**2, axis=0))


def cosine_similarity(a, b) -> np.ndarray:
    """Column-wise cosine between two matrices (or vectors)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
    return np.sum(a * b, axis=0) / (np.linalg.norm(a, axis=0) * np.linalg.norm(b, axis=0))
