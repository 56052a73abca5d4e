"""Signal contribution function (SCF) and its extrema over the feasible set
of two-component resolutions.

For a rank-2 nonnegative ``D ~ X V^T`` (``X = U S``), every resolution is
``S = V T^T`` and ``C = X T^-1`` with ``T = [[1, alpha], [1, beta]]``. The
nonnegative ones form a rectangle ``[alpha_lo, alpha_hi] x [beta_lo,
beta_hi]`` (Lawton-Sylvestre bounds).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matcore import as_matrix, flipped_svd, svd


class OrthonormalityError(ValueError):
    def __init__(self, deviation: float):
        super().__init__(f"basis is not orthonormal: max |U^T U - I| = {deviation:.3e}")
        self.deviation = deviation


def scf_value(c, s, d_fro2: float) -> float:
    """``||c s^T||_F^2 / ||D||_F^2``, using ``||c s^T||_F = ||c|| ||s||``."""
    if not d_fro2 > 0:
        raise ValueError("d_fro2 must be positive")
    c = np.asarray(c, dtype=float).ravel()
    s = np.asarray(s, dtype=float).ravel()
    return float((c @ c) * (s @ s) / d_fro2)


def norm_identity_check(U, y, tol: float = 1e-12) -> tuple[float, float]:
    """Return ``(||U y||^2, ||y||^2)``; they agree when ``U`` has orthonormal
    columns, which is checked first."""
    U = as_matrix(U, "U")
    y = np.asarray(y, dtype=float).ravel()
    if y.size != U.shape[1]:
        raise ValueError(f"y has {y.size} entries, U has {U.shape[1]} columns")
    dev = float(np.max(np.abs(U.T @ U - np.eye(U.shape[1]))))
    if dev > tol:
        raise OrthonormalityError(dev)
    Uy = U @ y
    return float(Uy @ Uy), float(y @ y)


@dataclass(frozen=True)
class AbstractSpace:
    u: np.ndarray
    v: np.ndarray
    x_coords: np.ndarray  # row i of D equals V @ x_coords[i]
    y_coords: np.ndarray  # column j of D equals U @ y_coords[j]
    d_fro2: float


def abstract_space(D, k: int = 2) -> AbstractSpace:
    D = as_matrix(D, "D")
    r = svd(D, k)
    return AbstractSpace(r.u, r.v, r.u * r.s, r.v * r.s, float(np.sum(D**2)))


def check_clean(D) -> np.ndarray:
    """Reject data with all-zero rows or columns."""
    D = as_matrix(D, "D")
    zr = np.nonzero(~np.any(D != 0, axis=1))[0]
    zc = np.nonzero(~np.any(D != 0, axis=0))[0]
    if zr.size or zc.size:
        parts = []
        if zr.size:
            parts.append(f"zero rows {zr.tolist()}")
        if zc.size:
            parts.append(f"zero columns {zc.tolist()}")
        raise ValueError("D has " + " and ".join(parts) + "; delete them before resolving")
    return D


@dataclass(frozen=True)
class TwoComponentRegion:
    alpha: tuple
    beta: tuple
    X: np.ndarray
    V: np.ndarray
    d_fro2: float

    @property
    def empty(self) -> bool:
        return self.alpha[0] > self.alpha[1] or self.beta[0] > self.beta[1]

    def profiles(self, alpha: float, beta: float):
        """(C, S) for one point of the region."""
        T = np.array([[1.0, alpha], [1.0, beta]])
        return self.X @ np.linalg.inv(T), self.V @ T.T

    def to_dict(self) -> dict:
        return {"alpha": list(self.alpha), "beta": list(self.beta), "empty": self.empty}


def feasible_region_2comp(D, rel_tolerance: float = 1e-8) -> TwoComponentRegion:
    """Nonnegative two-component resolutions of ``D`` as intervals.

    With ``r_i = -V[i, 0] / V[i, 1]`` over channels and ``q_j = X[j, 1] /
    X[j, 0]`` over samples, nonnegative spectra need ``alpha, beta`` between
    ``max(r_i : V[i,1] > 0)`` and ``min(r_i : V[i,1] < 0)``, and nonnegative
    concentrations need ``alpha <= min q <= max q <= beta``.
    """
    D = check_clean(D)
    if np.any(D < 0):
        raise ValueError("D must be nonnegative")
    s = np.linalg.svd(D, compute_uv=False)
    rank = int(np.sum(s > rel_tolerance * s[0]))
    if rank != 2:
        raise ValueError(f"numerical rank of D is {rank} (rel. tolerance {rel_tolerance:g}), need 2")
    X, V = flipped_svd(D, 2)
    v1, v2 = V[:, 0], V[:, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = -v1 / v2
    lo = np.max(r[v2 > 0]) if np.any(v2 > 0) else -np.inf
    hi = np.min(r[v2 < 0]) if np.any(v2 < 0) else np.inf
    if np.any((v2 == 0) & (v1 < 0)):
        lo, hi = np.inf, -np.inf
    if np.any(X[:, 0] <= 0):
        raise ValueError("first score vector is not positive; data are not a nonnegative two-component mixture")
    q = X[:, 1] / X[:, 0]
    alpha = (float(lo), float(q.min()))
    beta = (float(q.max()), float(hi))
    return TwoComponentRegion(alpha, beta, X, V, float(np.sum(D**2)))


@dataclass
class ScfStudy:
    alphas: np.ndarray
    betas: np.ndarray
    values: np.ndarray  # len(alphas) x len(betas), NaN where T is singular
    argmax: tuple
    argmin: tuple
    skipped: list = field(default_factory=list)

    @staticmethod
    def _on_boundary(idx, shape) -> bool:
        i, j = idx
        return i in (0, shape[0] - 1) or j in (0, shape[1] - 1)

    @property
    def max_on_boundary(self) -> bool:
        return self._on_boundary(self.argmax, self.values.shape)

    @property
    def min_on_boundary(self) -> bool:
        return self._on_boundary(self.argmin, self.values.shape)

    @property
    def verdict(self) -> str:
        if self.max_on_boundary and self.min_on_boundary:
            return "extrema on boundary"
        return "interior extremum"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "grid_shape": list(self.values.shape),
            "max": {"value": float(self.values[self.argmax]), "alpha": float(self.alphas[self.argmax[0]]),
                    "beta": float(self.betas[self.argmax[1]]), "index": list(self.argmax),
                    "on_boundary": self.max_on_boundary},
            "min": {"value": float(self.values[self.argmin]), "alpha": float(self.alphas[self.argmin[0]]),
                    "beta": float(self.betas[self.argmin[1]]), "index": list(self.argmin),
                    "on_boundary": self.min_on_boundary},
            "skipped_cells": [list(c) for c in self.skipped],
        }


def _axis(lo: float, hi: float, n: int) -> np.ndarray:
    return np.array([lo]) if hi == lo else np.linspace(lo, hi, n)


def scf_grid(region: TwoComponentRegion, alphas, betas, component: int = 0) -> np.ndarray:
    """SCF of one component for every (alpha, beta) pair.

    Uses ``||s_1||^2 = 1 + alpha^2`` (orthonormal V) and
    ``||c_1||^2 = (beta^2 s1^2 + s2^2) / (beta - alpha)^2`` (orthogonal score
    columns), i.e. the norms of the abstract coordinates.
    """
    a = np.asarray(alphas, dtype=float)[:, None]
    b = np.asarray(betas, dtype=float)[None, :]
    x2 = np.sum(region.X**2, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        if component == 0:
            val = (1 + a**2) * (b**2 * x2[0] + x2[1]) / (b - a) ** 2
        else:
            val = (1 + b**2) * (a**2 * x2[0] + x2[1]) / (b - a) ** 2
    val = val / region.d_fro2
    return np.where(a == b, np.nan, val)


def scf_boundary_study(D, region: TwoComponentRegion | None = None, grid_n: int = 201,
                       component: int = 0) -> ScfStudy:
    """Evaluate the SCF on a ``grid_n x grid_n`` grid over the feasible region
    and locate its extrema."""
    if grid_n < 16:
        raise ValueError("grid_n must be at least 16")
    if region is None:
        region = feasible_region_2comp(D)
    if region.empty:
        raise ValueError("feasible region is empty (noise too large for a two-component resolution)")
    alphas = _axis(*region.alpha, grid_n)
    betas = _axis(*region.beta, grid_n)
    vals = scf_grid(region, alphas, betas, component)
    skipped = [tuple(int(v) for v in c) for c in np.argwhere(np.isnan(vals))]
    if len(skipped) == vals.size:
        raise ValueError("every grid cell has a singular transformation")
    amax = tuple(int(v) for v in np.unravel_index(np.nanargmax(vals), vals.shape))
    amin = tuple(int(v) for v in np.unravel_index(np.nanargmin(vals), vals.shape))
    return ScfStudy(alphas, betas, vals, amax, amin, skipped)


# ---------------------------------------------------------------- synthesis

def two_component_data(preset: str = "consecutive", n_times: int = 60):
    """Noiseless rank-2 data ``(D, C, A)`` for the boundary study.

    ``consecutive``: first-order A -> B, ``c_A = exp(-0.5 t)`` on [0, 10].
    ``elution``: two overlapping Gaussian elution peaks on [0, 10].
    Both use the two-Gaussian ``two-component`` spectra.
    """
    from .bilinear import SPECTRUM_PRESETS, gaussian_spectra

    t = np.linspace(0.0, 10.0, n_times)
    if preset == "consecutive":
        ca = np.exp(-0.5 * t)
        C = np.column_stack([ca, 1.0 - ca])
        C[0, 1] = 0.0
    elif preset == "elution":
        C = np.column_stack([np.exp(-((t - 4.0) ** 2) / 2.0), 0.7 * np.exp(-((t - 6.0) ** 2) / 3.0)])
    else:
        raise ValueError(f"unknown two-component preset {preset!r}; choose 'consecutive' or 'elution'")
    A = gaussian_spectra(SPECTRUM_PRESETS["two-component"])
    return C @ A.T, C, A


TWO_COMPONENT_PRESETS = ("consecutive", "elution")


def true_parameters(region: TwoComponentRegion, A) -> tuple[float, float]:
    """(alpha, beta) of the generating spectra ``A`` (channels x 2) in the
    region's parameterization, taking the component with the smaller
    ratio as the first."""
    coords = region.V.T @ np.asarray(A, dtype=float)  # 2 x 2, column j = V^T a_j
    ratios = coords[1] / coords[0]
    return tuple(float(v) for v in np.sort(ratios))
