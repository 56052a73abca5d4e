"""External and internal normalizations of data and abstract coordinates.

External normalizations act on the data matrix before the SVD; internal
ones act on the SVD scores. Two pairs are provided: row-sum (l1) scaling,
and the first-scores-vector-to-1 scaling (``fsvt1n``) whose external form is
an iteration that need not converge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matcore import as_matrix, flipped_svd, svd

TINY = 1e-300


class NormalizationError(ValueError):
    """A row cannot be normalized; ``row`` is its 0-based index."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


def _check_divisor(div: np.ndarray, what: str):
    bad = np.nonzero(~(np.abs(div) > TINY))[0]
    if bad.size:
        i = int(bad[0])
        raise NormalizationError(f"row {i} has {what} {div[i]!r}, too close to zero to normalize", i)


def normalize_rows_sum(M, mode: str = "plain_sum") -> np.ndarray:
    """Divide each row by its sum (``plain_sum``) or absolute sum (``abs_sum``)."""
    M = as_matrix(M)
    if mode == "plain_sum":
        div = M.sum(axis=1)
    elif mode == "abs_sum":
        div = np.abs(M).sum(axis=1)
    else:
        raise ValueError(f"mode must be 'plain_sum' or 'abs_sum', got {mode!r}")
    _check_divisor(div, "sum")
    return M / div[:, None]


def internal_normalize_sum(scores) -> np.ndarray:
    """Scale each score row so that it sums to one."""
    X = as_matrix(scores, "scores")
    div = X.sum(axis=1)
    _check_divisor(div, "score sum")
    return X / div[:, None]


def fsvt1n_internal(scores) -> np.ndarray:
    """Divide each score row by its first entry, so column 0 becomes all ones."""
    X = as_matrix(scores, "scores")
    div = X[:, 0].copy()
    _check_divisor(div, "first score")
    out = X / div[:, None]
    out[:, 0] = 1.0
    return out


@dataclass
class Fsvt1nResult:
    scores: np.ndarray
    loadings: np.ndarray
    iterations: int
    converged: bool
    cycle_detected: bool
    cycle_period: int | None
    residual: float
    normalized: np.ndarray
    history: list = field(default_factory=list, repr=False)
    accumulation_points: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "cycle_detected": self.cycle_detected,
            "cycle_period": self.cycle_period,
            "residual": self.residual,
            "first_scores": [float(v) for v in self.scores[:, 0]],
            "accumulation_points": [[float(v) for v in X[:, 0]] for X in self.accumulation_points],
        }


def fsvt1n_external(R, rank: int | None = None, eps: float = 1e-15, max_iter: int = 100,
                    keep_history: bool = True) -> Fsvt1nResult:
    """Iterate SVD and row rescaling until the first score vector is all ones.

    Each pass takes the rank-``rank`` SVD of the current matrix, orients the
    first singular pair so the left vector has a positive maximum, divides
    every row ``i`` by ``(R v1)[i]`` and sets ``X = U S``. The loop stops when
    ``max|X[:, 0] - 1| <= eps`` or after ``max_iter`` passes.

    If the scores repeat with period two (iterate ``n`` equals iterate
    ``n - 2`` within ``eps`` but not iterate ``n - 1``), ``cycle_detected``
    is set and the two alternating iterates are kept in
    ``accumulation_points``.
    """
    R = as_matrix(R, "R")
    kmax = min(R.shape)
    rank = kmax if rank is None else int(rank)
    if not 1 <= rank <= kmax:
        raise ValueError(f"rank must be in [1, {kmax}]")
    if not np.any(R):
        raise ValueError("R is the zero matrix")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")

    history = []
    prev = []  # last two score matrices
    cycle = False
    accum = []
    it = 0
    while True:
        res = svd(R, rank)
        U, s, V = res.u.copy(), res.s, res.v.copy()
        if U[:, 0].max() <= 0:
            U[:, 0] *= -1
            V[:, 0] *= -1
        w = R @ V[:, 0]
        small = np.nonzero(~(np.abs(w) > TINY))[0]
        if small.size:
            i = int(small[0])
            raise NormalizationError(f"iteration {it + 1}: (R v1)[{i}] = {w[i]!r} is too close to zero", i)
        R = R / w[:, None]
        X = U * s
        it += 1
        if keep_history:
            history.append(X.copy())
        residual = float(np.max(np.abs(X[:, 0] - 1)))
        converged = residual <= eps
        if not converged and len(prev) == 2:
            if (np.max(np.abs(X - prev[0])) <= eps and np.max(np.abs(X - prev[1])) > eps):
                cycle = True
                accum = [prev[1].copy(), X.copy()]
        prev = [prev[-1], X] if prev else [X]
        if converged or it >= max_iter:
            break
    if converged:
        cycle = False
        accum = []
    return Fsvt1nResult(
        scores=X, loadings=V, iterations=it, converged=converged,
        cycle_detected=cycle, cycle_period=2 if cycle else None, residual=residual,
        normalized=R, history=history, accumulation_points=accum,
    )


@dataclass(frozen=True)
class ClosureStats:
    min: float
    max: float
    mean: float
    std: float
    n: int
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {"min": self.min, "max": self.max, "mean": self.mean, "std": self.std,
                "rows": self.n, "single_row": self.degenerate}


def closure_stats(C) -> ClosureStats:
    """Statistics of the row sums; the std uses the n-1 divisor."""
    C = as_matrix(C, "C")
    rs = C.sum(axis=1)
    n = rs.size
    std = float(np.std(rs, ddof=1)) if n > 1 else 0.0
    return ClosureStats(float(rs.min()), float(rs.max()), float(rs.mean()), std, n, n == 1)


@dataclass
class L1Pairing:
    X_ext: np.ndarray  # scores of the row-normalized data
    V_ext: np.ndarray
    T_ext: np.ndarray  # unit-sum true spectra in the V_ext basis (one row each)
    X_int: np.ndarray  # scores of the raw data, rows scaled to unit sum
    T_int: np.ndarray  # true spectra in the raw V basis, rows scaled to unit sum


def l1_pairing(R, A_true, rank: int | None = None) -> L1Pairing:
    """Abstract coordinates of the data rows and of the true spectra under
    external (row sums of ``R``) and internal (row sums of the scores)
    l1 normalization.

    For the external pair every row ``x`` of ``X_ext`` and ``t`` of
    ``T_ext`` satisfies ``(V_ext^T 1) . x = 1``; for the internal pair the
    rows of ``X_int`` and ``T_int`` sum to one. SVD factors are
    sign-flipped before use.
    """
    R = as_matrix(R, "R")
    A_true = as_matrix(A_true, "A_true")
    k = A_true.shape[1] if rank is None else rank
    X_ext, V_ext = flipped_svd(normalize_rows_sum(R), k)
    T_ext = (A_true / A_true.sum(axis=0)).T @ V_ext
    X, V = flipped_svd(R, k)
    return L1Pairing(X_ext, V_ext, T_ext, internal_normalize_sum(X), internal_normalize_sum(A_true.T @ V))
