"""Dense linear algebra used everywhere else: SVD, least squares, norms,
numerical rank and the two-way sign-flip convention for SVD factors.

Matrices are plain 2-D float64 numpy arrays; :func:`as_matrix` is the single
validation gate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

EPS = np.finfo(float).eps
LOG_FLOOR = 1e-300


class RankDeficiencyWarning(UserWarning):
    """Emitted when a least-squares solve meets a numerically singular matrix."""


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Return ``m`` as a finite 2-D float64 array or raise ``ValueError``."""
    a = np.array(m, dtype=float)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        bad = np.argwhere(~np.isfinite(a))[0]
        raise ValueError(f"{name} has a non-finite entry at {tuple(int(i) for i in bad)}")
    return a


def default_rel_tolerance(shape) -> float:
    return max(shape) * EPS


@dataclass(frozen=True)
class SvdResult:
    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray

    @property
    def k(self) -> int:
        return self.s.size

    @property
    def v(self) -> np.ndarray:
        return self.vt.T

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.vt


def svd(m, k: int | None = None) -> SvdResult:
    """Thin SVD, optionally truncated to ``k`` factors.

    Each left singular vector is oriented so that its largest-magnitude entry
    is positive (the matching right vector flips with it), which makes the
    factors deterministic.
    """
    a = as_matrix(m)
    kmax = min(a.shape)
    if k is None:
        k = kmax
    if not 1 <= k <= kmax:
        raise ValueError(f"k must be in [1, {kmax}], got {k}")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    u, s, vt = u[:, :k].copy(), s[:k].copy(), vt[:k].copy()
    idx = np.argmax(np.abs(u), axis=0)
    flip = u[idx, np.arange(k)] < 0
    u[:, flip] *= -1
    vt[flip] *= -1
    return SvdResult(u, s, vt)


def holder_norm(v, p: float = 2.0) -> float:
    """l_p norm of a vector; ``p=np.inf`` gives the max norm."""
    x = np.asarray(v, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("vector must be non-empty")
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    ax = np.abs(x)
    if np.isinf(p):
        return float(ax.max())
    # scale by the max to keep large p from overflowing
    top = ax.max()
    if top == 0:
        return 0.0
    return float(top * np.sum((ax / top) ** p) ** (1.0 / p))


@dataclass(frozen=True)
class LstsqResult:
    x: np.ndarray
    rank: int
    rank_deficient: bool
    singular_values: np.ndarray
    tolerance: float


def least_squares(a, b, rel_tolerance: float | None = None, warn: bool = True) -> LstsqResult:
    """Minimum-norm solution of ``min ||a @ x - b||_F`` via a truncated SVD.

    Singular values at or below ``rel_tolerance * s[0]`` are dropped; when any
    are dropped the result carries ``rank_deficient=True`` and, unless
    ``warn`` is False, a :class:`RankDeficiencyWarning` is issued.
    """
    a = as_matrix(a, "a")
    b = np.asarray(b, dtype=float)
    vector_rhs = b.ndim == 1
    b = as_matrix(b, "b")
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"row mismatch: a has {a.shape[0]} rows, b has {b.shape[0]}")
    if rel_tolerance is None:
        rel_tolerance = default_rel_tolerance(a.shape)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    tol = rel_tolerance * s[0] if s.size else 0.0
    keep = s > tol
    r = int(keep.sum())
    x = vt[keep].T @ ((u[:, keep].T @ b) / s[keep][:, None])
    deficient = r < a.shape[1]
    if deficient and warn:
        warnings.warn(f"rank deficient, rank = {r}, tol = {tol:e}", RankDeficiencyWarning, stacklevel=2)
    if vector_rhs:
        x = x.ravel()
    return LstsqResult(x, r, deficient, s, tol)


def right_divide(b, a, **kw) -> LstsqResult:
    """Solve ``x @ a = b`` in the least-squares sense (the ``b / a`` idiom)."""
    res = least_squares(np.asarray(a, dtype=float).T, np.asarray(b, dtype=float).T, **kw)
    return LstsqResult(res.x.T, res.rank, res.rank_deficient, res.singular_values, res.tolerance)


@dataclass(frozen=True)
class RankReport:
    singular_values: np.ndarray
    elbow_index: int
    estimated_rank: int
    condition_number: float
    rel_tolerance: float

    def to_dict(self) -> dict:
        return {
            "singular_values": [float(x) for x in self.singular_values],
            "elbow_index": self.elbow_index,
            "estimated_rank": self.estimated_rank,
            "condition_number": self.condition_number,
            "rel_tolerance": self.rel_tolerance,
        }


def estimate_rank(s, rel_tolerance: float | None = None, shape=None) -> RankReport:
    """Numerical rank and scree elbow of a singular-value list.

    ``estimated_rank`` counts values above ``rel_tolerance * s[0]``.
    ``elbow_index`` is the position of the first value after the largest
    drop in ``log10(s)``, i.e. where the scree curve levels off.
    Without an explicit tolerance, ``max(shape) * eps`` is used (``len(s)``
    stands in for the shape when it is not given).
    """
    s = np.asarray(s, dtype=float).ravel()
    if s.size == 0:
        raise ValueError("singular value list is empty")
    if np.any(s < 0) or np.any(np.diff(s) > 0):
        raise ValueError("singular values must be non-negative and non-increasing")
    if rel_tolerance is None:
        rel_tolerance = default_rel_tolerance(shape if shape is not None else (s.size,))
    rank = int(np.sum(s > rel_tolerance * s[0])) if s[0] > 0 else 0
    if s.size > 1:
        gaps = -np.diff(np.log10(s + LOG_FLOOR))
        elbow = int(np.argmax(gaps)) + 1
    else:
        elbow = 1
    cond = float(s[0] / s[rank - 1]) if rank > 0 else float("inf")
    return RankReport(s, elbow, rank, cond, float(rel_tolerance))


def matrix_rank_report(m, rel_tolerance: float | None = None) -> RankReport:
    a = as_matrix(m)
    s = np.linalg.svd(a, compute_uv=False)
    return estimate_rank(s, rel_tolerance, shape=a.shape)


def _mode_sign_scores(data: np.ndarray, loads: list[np.ndarray]) -> np.ndarray:
    """Signed-squared projection sums S[mode, f] (two-way Bro-Acar-Kolda)."""
    n_factors = loads[0].shape[1]
    S = np.zeros((2, n_factors))
    for mode in range(2):
        x_full = data if mode == 0 else data.T
        own, other = loads[mode], loads[1 - mode]
        for f in range(n_factors):
            rest = [g for g in range(n_factors) if g != f]
            x = x_full - own[:, rest] @ other[:, rest].T
            a = own[:, f]
            a = a / (a @ a)
            proj = a @ x
            S[mode, f] = np.sum(np.sign(proj) * proj**2)
    return S


def _handle_odd(scores: np.ndarray) -> np.ndarray:
    sgn = np.where(scores < 0, -1.0, 1.0)
    n_neg = int(np.sum(scores < 0))
    i = int(np.argmin(np.abs(scores)))
    if scores[i] < 0 or (scores[i] > 0 and n_neg > 0):
        sgn[i] = -sgn[i]
    return sgn


def sign_flip(scores, loadings, data):
    """Resolve the sign ambiguity of a two-way factor model.

    ``scores`` (m x F) and ``loadings`` (n x F) approximate ``data`` (m x n).
    For each factor the signed squared projections of the data (with the
    other factors removed) decide each mode's sign; a factor is flipped in
    both modes when both are negative, and when only one mode is negative
    the mode with the smaller evidence gives way.

    Returns ``(scores, loadings, signs)`` where ``signs`` is a 2 x F array of
    the signs applied to each mode.
    """
    scores = as_matrix(scores, "scores").copy()
    loadings = as_matrix(loadings, "loadings").copy()
    data = as_matrix(data, "data")
    if scores.shape[1] != loadings.shape[1]:
        raise ValueError(
            f"factor count mismatch: scores has {scores.shape[1]}, loadings has {loadings.shape[1]}"
        )
    if scores.shape[0] != data.shape[0] or loadings.shape[0] != data.shape[1]:
        raise ValueError("scores/loadings do not match the data shape")
    S = _mode_sign_scores(data, [scores, loadings])
    signs = np.ones_like(S)
    for f in range(S.shape[1]):
        # sign(0) is taken as +1 so that a factor is never zeroed out
        sgn = np.where(S[:, f] < 0, -1.0, 1.0)
        if np.sum(sgn < 0) % 2:
            sgn = _handle_odd(S[:, f])
        signs[:, f] = sgn
    scores *= signs[0]
    loadings *= signs[1]
    return scores, loadings, signs


def flipped_svd(m, k: int | None = None):
    """Truncated SVD returned as sign-flipped ``(X, V)`` with ``X = U S``."""
    a = as_matrix(m)
    res = svd(a, k)
    X, V, _ = sign_flip(res.u * res.s, res.v, a)
    return X, V
