"""Equilibrium speciation by Newton-Raphson and a segmented titration driver.

Species concentrations follow ``c_spec = beta * prod(c ** Model)`` over the
free component concentrations ``c``; the solver adjusts ``c`` until the
mass balance ``Model @ c_spec = c_tot`` holds. Everything is in mol/L.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

ZERO_TOTAL = 1e-15
MAX_ITER = 100


@dataclass(frozen=True)
class EquilibriumModel:
    model: np.ndarray  # ncomp x nspec stoichiometric exponents
    log_beta: np.ndarray
    component_names: tuple = ()
    species_names: tuple = ()

    def __post_init__(self):
        M = np.array(self.model, dtype=float)
        if M.ndim != 2:
            raise ValueError("model must be a 2-D array (components x species)")
        lb = np.array(self.log_beta, dtype=float).ravel()
        ncomp, nspec = M.shape
        if lb.size != nspec:
            raise ValueError(f"log_beta has {lb.size} entries for {nspec} species")
        if nspec < ncomp or not np.array_equal(M[:, :ncomp], np.eye(ncomp)):
            raise ValueError("the first ncomp species columns must be the identity (free components)")
        if np.any(lb[:ncomp] != 0):
            raise ValueError("free components must have log_beta = 0")
        if not np.all(np.isfinite(lb)):
            raise ValueError("log_beta must be finite")
        object.__setattr__(self, "model", M)
        object.__setattr__(self, "log_beta", lb)
        cn = tuple(self.component_names) or tuple(f"c{i + 1}" for i in range(ncomp))
        sn = tuple(self.species_names) or cn + tuple(f"s{i + 1}" for i in range(ncomp, nspec))
        if len(cn) != ncomp or len(sn) != nspec:
            raise ValueError("name lists do not match the model shape")
        object.__setattr__(self, "component_names", cn)
        object.__setattr__(self, "species_names", sn)

    @property
    def ncomp(self) -> int:
        return self.model.shape[0]

    @property
    def nspec(self) -> int:
        return self.model.shape[1]

    def species(self, c) -> np.ndarray:
        """Species concentrations for free component concentrations ``c``
        (evaluated in logs so large beta values do not overflow)."""
        c = np.asarray(c, dtype=float)
        return np.exp(self.log_beta * np.log(10.0) + np.log(c) @ self.model)

    def jacobian(self, c_spec) -> np.ndarray:
        """``J[j, k] = sum_s Model[j, s] Model[k, s] c_spec[s]``, the derivative
        of the computed totals with respect to ``log c``."""
        return (self.model * c_spec) @ self.model.T

    def to_dict(self) -> dict:
        return {
            "model": self.model.tolist(),
            "log_beta": self.log_beta.tolist(),
            "component_names": list(self.component_names),
            "species_names": list(self.species_names),
        }


@dataclass
class SpeciationResult:
    c_spec: np.ndarray
    iterations: int
    converged: bool
    mass_balance_residual: float

    @property
    def free(self) -> np.ndarray:
        return self.c_spec[: self._ncomp]

    _ncomp: int = field(default=0, repr=False)


def newton_raphson_speciation(model: EquilibriumModel, c_tot, guess, max_iter: int = MAX_ITER,
                              tol: float | None = None) -> SpeciationResult:
    """Solve the mass balance for the free component concentrations.

    The update is ``dc = (d J^-1) * c`` with ``d`` the total residual, a
    Newton step in ``log c`` written multiplicatively. If any component
    would become non-positive the step is halved until it does not (or the
    step falls below 1e-15). Zero totals are replaced by 1e-15.
    Convergence: all ``|d| < 1e-15 * max(1, max|c_tot|)`` unless ``tol`` is
    given.
    """
    c_tot = np.array(c_tot, dtype=float).ravel()
    if c_tot.size != model.ncomp or not np.all(np.isfinite(c_tot)):
        raise ValueError(f"c_tot must be {model.ncomp} finite values")
    c = np.array(guess, dtype=float).ravel()
    if c.size != model.ncomp or not np.all(c > 0):
        raise ValueError("guess must be strictly positive free concentrations")
    c_tot = np.where(c_tot == 0, ZERO_TOTAL, c_tot)
    if tol is None:
        tol = 1e-15 * max(1.0, float(np.max(np.abs(c_tot))))

    best = None
    for it in range(1, max_iter + 1):
        c_spec = model.species(c)
        d = c_tot - model.model @ c_spec
        res = float(np.max(np.abs(d)))
        if best is None or res < best[1]:
            best = (c_spec, res)
        if res < tol:
            return SpeciationResult(c_spec, it, True, res, model.ncomp)
        J = model.jacobian(c_spec)
        try:
            # J is symmetric, so d J^-1 (row vector) equals solve(J, d)
            dc = np.linalg.solve(J, d) * c
        except np.linalg.LinAlgError:
            break
        c = c + dc
        while np.any(c <= 0):
            dc = 0.5 * dc
            c = c - dc
            if np.all(np.abs(dc) < 1e-15):
                break
        if np.any(c <= 0):
            break
    c_spec, res = best
    return SpeciationResult(c_spec, max_iter, False, res, model.ncomp)


def dilution_totals(v0: float, c0, v_added, c_added) -> np.ndarray:
    """Totals after mixing ``v0`` of ``c0`` with ``v_added`` of ``c_added``.

    ``v_added`` may be a vector; the result is then (len(v_added) x ncomp).
    """
    if not v0 > 0:
        raise ValueError("v0 must be positive")
    c0 = np.asarray(c0, dtype=float)
    c_added = np.asarray(c_added, dtype=float)
    va = np.asarray(v_added, dtype=float)
    if np.any(va < 0):
        raise ValueError("added volume must be non-negative")
    if va.ndim == 0:
        return (v0 * c0 + va * c_added) / (v0 + va)
    return (v0 * c0 + va[:, None] * c_added) / (v0 + va[:, None])


@dataclass(frozen=True)
class TitrationSegment:
    indices: tuple  # titration points (0-based) that use this titrant
    c_added: np.ndarray


@dataclass(frozen=True)
class TitrationProtocol:
    v0: float
    c0: np.ndarray
    v_added: np.ndarray
    segments: tuple

    def __post_init__(self):
        va = np.asarray(self.v_added, dtype=float).ravel()
        if np.any(np.diff(va) < 0):
            raise ValueError("volume schedule must be non-decreasing")
        object.__setattr__(self, "v_added", va)
        object.__setattr__(self, "c0", np.asarray(self.c0, dtype=float).ravel())
        cover = sorted(i for s in self.segments for i in s.indices)
        if cover != list(range(va.size)):
            raise ValueError("segments must partition the titration points exactly once")

    def totals(self) -> np.ndarray:
        out = np.empty((self.v_added.size, self.c0.size))
        for seg in self.segments:
            idx = np.asarray(seg.indices, dtype=int)
            out[idx] = dilution_totals(self.v0, self.c0, self.v_added[idx], seg.c_added)
        return out

    def to_dict(self) -> dict:
        return {
            "v0": self.v0,
            "c0": self.c0.tolist(),
            "v_added": self.v_added.tolist(),
            "segments": [{"indices": list(s.indices), "c_added": np.asarray(s.c_added).tolist()}
                         for s in self.segments],
        }


@dataclass
class TitrationResult:
    C: np.ndarray  # points x species
    c_tot: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    residuals: np.ndarray

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))

    @property
    def failed_points(self) -> list[int]:
        return np.nonzero(~self.converged)[0].tolist()


def titrate(model: EquilibriumModel, protocol: TitrationProtocol, warm_start: bool = True) -> TitrationResult:
    """Speciation at every titration point, starting from ``c0`` and (by
    default) warm-starting each point from the previous free concentrations."""
    tot = protocol.totals()
    if tot.shape[1] != model.ncomp:
        raise ValueError("protocol and model disagree on the number of components")
    guess0 = np.where(protocol.c0 > 0, protocol.c0, ZERO_TOTAL)
    n = tot.shape[0]
    C = np.empty((n, model.nspec))
    conv = np.zeros(n, dtype=bool)
    iters = np.zeros(n, dtype=int)
    res = np.zeros(n)
    guess = guess0
    for i in range(n):
        r = newton_raphson_speciation(model, tot[i], guess)
        C[i], conv[i], iters[i], res[i] = r.c_spec, r.converged, r.iterations, r.mass_balance_residual
        if warm_start:
            guess = r.c_spec[: model.ncomp]
    return TitrationResult(C, tot, conv, iters, res)


# ---------------------------------------------------------------- dye preset

DYE_COMPONENTS = ("P-", "M", "B2-", "H+")
DYE_SPECIES = ("P-", "M", "B2-", "H+", "HP", "HM+", "HB-", "OH-")
DYE_COLUMNS = [0, 1, 2, 4, 5, 6]  # the six dye forms, without H+ and OH-


def dye_model() -> EquilibriumModel:
    """Three monoprotic dyes (phenol red, methyl orange, bromocresol green)
    plus water autoprotolysis."""
    M = np.array([
        [1, 0, 0, 0, 1, 0, 0, 0],
        [0, 1, 0, 0, 0, 1, 0, 0],
        [0, 0, 1, 0, 0, 0, 1, 0],
        [0, 0, 0, 1, 1, 1, 1, -1],
    ])
    return EquilibriumModel(M, [0, 0, 0, 0, 7.66, 3.43, 4.62, -14], DYE_COMPONENTS, DYE_SPECIES)


def dye_volumes() -> np.ndarray:
    """Added titrant volumes in L (60 points, denser near equivalence)."""
    ml = np.concatenate([
        np.arange(0, 16) * 0.6,           # 0 : 0.6 : 9
        9.05 + np.arange(0, 14) * 0.05,   # 9.05 : 0.05 : 9.7
        9.725 + np.arange(0, 8) * 0.025,  # 9.725 : 0.025 : 9.9
        9.95 + np.arange(0, 22) * 0.05,   # 9.95 : 0.05 : 11
    ])
    return 1e-3 * ml


def dye_protocol(indicator_in_titrant: float = 0.0, base: float = 0.005) -> TitrationProtocol:
    """50 mL of 3e-5/3e-5/2e-5 M dyes in 1 mM HCl titrated with NaOH.

    With ``indicator_in_titrant > 0`` the titrant carries that dye
    concentration in some segments (phenol red, then methyl orange, then
    all three), which breaks the dilution-only dependence between the dyes.
    """
    ind = float(indicator_in_titrant)
    segs = (
        TitrationSegment(tuple(range(0, 16)), np.array([0.0, 0.0, 0.0, -base])),
        TitrationSegment(tuple(range(16, 30)), np.array([ind, 0.0, 0.0, -base])),
        TitrationSegment(tuple(range(30, 38)), np.array([0.0, ind, 0.0, -base])),
        TitrationSegment(tuple(range(38, 60)), np.array([ind, ind, ind, -base])),
    )
    return TitrationProtocol(0.05, np.array([3e-5, 3e-5, 2e-5, 0.001]), dye_volumes(), segs)


def protocol_from_dict(doc: dict) -> tuple[EquilibriumModel, TitrationProtocol]:
    m = doc["model"]
    model = EquilibriumModel(m["model"], m["log_beta"], tuple(m.get("component_names", ())),
                             tuple(m.get("species_names", ())))
    p = doc["protocol"]
    segs = tuple(TitrationSegment(tuple(int(i) for i in s["indices"]), np.asarray(s["c_added"], dtype=float))
                 for s in p["segments"])
    return model, TitrationProtocol(float(p["v0"]), np.asarray(p["c0"], dtype=float),
                                    np.asarray(p["v_added"], dtype=float), segs)


def load_protocol(path) -> tuple[EquilibriumModel, TitrationProtocol]:
    from .schemas import validate_document

    doc = json.loads(Path(path).read_text())
    validate_document(doc, "titration")
    return protocol_from_dict(doc)
