"""Small built-in matrices used by the examples, tests and CLI."""

from __future__ import annotations

import numpy as np

# Element profiles of three aerosol sources (mass fractions) and the source
# contributions to 20 samples (ug/m3).
ELEMENTS = ("Na", "Al", "Si", "Cl", "K", "Ca", "Ti", "Fe", "Br", "Pb")
SOURCES = ("Marine", "Udust", "Auto")

_SOURCE_PROFILES = np.array([
    [0.40000, 0.01250, 0.00000],
    [0.00000, 0.08840, 0.01100],
    [0.00000, 0.22300, 0.00820],
    [0.40000, 0.00000, 0.03000],
    [0.01400, 0.01030, 0.00072],
    [0.01400, 0.02440, 0.01250],
    [0.00000, 0.00640, 0.00000],
    [0.00000, 0.06000, 0.02100],
    [0.00200, 0.00020, 0.05000],
    [0.00000, 0.00370, 0.20000],
])

_CONTRIBUTIONS = np.array([
    [3, 8, 19], [3, 8, 16], [5, 7, 12], [6, 49, 13], [6, 39, 7],
    [6, 9, 12], [6, 17, 18], [2, 6, 6], [4, 42, 7], [4, 49, 20],
    [4, 29, 14], [5, 44, 9], [5, 32, 12], [5, 9, 11], [6, 26, 8],
    [3, 8, 14], [2, 39, 11], [3, 6, 20], [4, 48, 15], [5, 37, 14],
], dtype=float)


def source_apportionment():
    """Return ``(R, C, A)`` with ``R = C A^T`` (10 elements x 20 samples)."""
    C = _SOURCE_PROFILES.copy()
    A = _CONTRIBUTIONS.copy()
    return C @ A.T, C, A


# A lower-triangular-pattern matrix on which the external fsvt1n iteration
# alternates between two limits instead of converging.
FSVT1N_CYCLING = np.array([[1.0, 0.0, 0.0], [2.0, 3.0, 4.0], [5.0, 6.0, 7.0]])

CYCLIC_PERMUTATION = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])

MATRICES = {
    "fsvt1n-cycling": FSVT1N_CYCLING,
    "identity3": np.eye(3),
    "cyclic3": CYCLIC_PERMUTATION,
    "source-R": _SOURCE_PROFILES @ _CONTRIBUTIONS.T,
}


def get_matrix(name: str) -> np.ndarray:
    try:
        return MATRICES[name].copy()
    except KeyError:
        raise ValueError(f"unknown matrix preset {name!r}; choose from {sorted(MATRICES)}") from None
