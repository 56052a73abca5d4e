"""Adaptive explicit Runge-Kutta integration sampled on a caller-supplied grid.

Two embedded pairs are provided:

* ``RK45``: Dormand-Prince 5(4), seven stages with the first-same-as-last
  property.
* ``RK89``: Hairer's DOP853, order 8 with a combined 5th/3rd order error
  estimate.

Steps are clipped so that they land exactly on every output time, so the
states returned are genuine integrator states, never interpolants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

# Dormand & Prince (1980) 5(4) tableau.
_DP5_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP5_A = np.array([
    [0, 0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
_DP5_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
# difference between the 5th and the embedded 4th order weights
_DP5_E = np.array([71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

# DOP853 coefficients (E. Hairer & G. Wanner, dop853.f, as also tabulated in
# scipy/integrate/_ivp/dop853_coefficients.py). Only the 12 stages of the
# main step are needed; the dense-output stages are not used here.
_DOP853_C = np.array([
    0.0, 0.05260015195876773, 0.0789002279381516,
    0.1183503419072274, 0.2816496580927726, 0.3333333333333333,
    0.25, 0.3076923076923077, 0.6512820512820513,
    0.6, 0.8571428571428571, 1.0,
])
_DOP853_A = np.zeros((12, 12))
_DOP853_A[1, 0] = 0.05260015195876773
_DOP853_A[2, 0] = 0.0197250569845379
_DOP853_A[2, 1] = 0.0591751709536137
_DOP853_A[3, 0] = 0.02958758547680685
_DOP853_A[3, 2] = 0.08876275643042054
_DOP853_A[4, 0] = 0.2413651341592667
_DOP853_A[4, 2] = -0.8845494793282861
_DOP853_A[4, 3] = 0.924834003261792
_DOP853_A[5, 0] = 0.037037037037037035
_DOP853_A[5, 3] = 0.17082860872947386
_DOP853_A[5, 4] = 0.12546768756682242
_DOP853_A[6, 0] = 0.037109375
_DOP853_A[6, 3] = 0.17025221101954405
_DOP853_A[6, 4] = 0.06021653898045596
_DOP853_A[6, 5] = -0.017578125
_DOP853_A[7, 0] = 0.03709200011850479
_DOP853_A[7, 3] = 0.17038392571223998
_DOP853_A[7, 4] = 0.10726203044637328
_DOP853_A[7, 5] = -0.015319437748624402
_DOP853_A[7, 6] = 0.008273789163814023
_DOP853_A[8, 0] = 0.6241109587160757
_DOP853_A[8, 3] = -3.3608926294469414
_DOP853_A[8, 4] = -0.868219346841726
_DOP853_A[8, 5] = 27.59209969944671
_DOP853_A[8, 6] = 20.154067550477894
_DOP853_A[8, 7] = -43.48988418106996
_DOP853_A[9, 0] = 0.47766253643826434
_DOP853_A[9, 3] = -2.4881146199716677
_DOP853_A[9, 4] = -0.590290826836843
_DOP853_A[9, 5] = 21.230051448181193
_DOP853_A[9, 6] = 15.279233632882423
_DOP853_A[9, 7] = -33.28821096898486
_DOP853_A[9, 8] = -0.020331201708508627
_DOP853_A[10, 0] = -0.9371424300859873
_DOP853_A[10, 3] = 5.186372428844064
_DOP853_A[10, 4] = 1.0914373489967295
_DOP853_A[10, 5] = -8.149787010746927
_DOP853_A[10, 6] = -18.52006565999696
_DOP853_A[10, 7] = 22.739487099350505
_DOP853_A[10, 8] = 2.4936055526796523
_DOP853_A[10, 9] = -3.0467644718982196
_DOP853_A[11, 0] = 2.273310147516538
_DOP853_A[11, 3] = -10.53449546673725
_DOP853_A[11, 4] = -2.0008720582248625
_DOP853_A[11, 5] = -17.9589318631188
_DOP853_A[11, 6] = 27.94888452941996
_DOP853_A[11, 7] = -2.8589982771350235
_DOP853_A[11, 8] = -8.87285693353063
_DOP853_A[11, 9] = 12.360567175794303
_DOP853_A[11, 10] = 0.6433927460157636
_DOP853_B = np.zeros(12)
_DOP853_B[0] = 0.054293734116568765
_DOP853_B[5] = 4.450312892752409
_DOP853_B[6] = 1.8915178993145003
_DOP853_B[7] = -5.801203960010585
_DOP853_B[8] = 0.3111643669578199
_DOP853_B[9] = -0.1521609496625161
_DOP853_B[10] = 0.20136540080403034
_DOP853_B[11] = 0.04471061572777259
_DOP853_E3 = np.zeros(12)
_DOP853_E3[0] = -0.18980075407240762
_DOP853_E3[5] = 4.450312892752409
_DOP853_E3[6] = 1.8915178993145003
_DOP853_E3[7] = -5.801203960010585
_DOP853_E3[8] = -0.4226823213237919
_DOP853_E3[9] = -0.1521609496625161
_DOP853_E3[10] = 0.20136540080403034
_DOP853_E3[11] = 0.02265179219836082
_DOP853_E5 = np.zeros(12)
_DOP853_E5[0] = 0.01312004499419488
_DOP853_E5[5] = -1.2251564463762044
_DOP853_E5[6] = -0.4957589496572502
_DOP853_E5[7] = 1.6643771824549864
_DOP853_E5[8] = -0.35032884874997366
_DOP853_E5[9] = 0.3341791187130175
_DOP853_E5[10] = 0.08192320648511571
_DOP853_E5[11] = -0.022355307863886294


class IntegrationError(RuntimeError):
    """Integration failed; ``partial`` holds the grid prefix reached so far."""

    def __init__(self, message: str, t: float, partial: "OdeSolution | None" = None):
        super().__init__(message)
        self.t = t
        self.partial = partial


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "RK45"
    abs_tol: float = 1e-6
    rel_tol: float = 1e-3
    max_step: float | None = None
    initial_step: float | None = None
    max_steps: int = 10**7
    fixed_step: float | None = None  # non-adaptive mode, used for order checks

    def __post_init__(self):
        m = self.method.upper()
        if m not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {sorted(_METHODS)}")
        object.__setattr__(self, "method", m)
        for name in ("abs_tol", "rel_tol"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        for name in ("max_step", "initial_step", "fixed_step"):
            v = getattr(self, name)
            if v is not None and not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")

    @property
    def order(self) -> int:
        return _METHODS[self.method]["order"]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "abs_tol": self.abs_tol,
            "rel_tol": self.rel_tol,
            "max_step": self.max_step,
            "initial_step": self.initial_step,
            "max_steps": self.max_steps,
            "fixed_step": self.fixed_step,
        }


@dataclass
class OdeSolution:
    times: np.ndarray
    states: np.ndarray
    steps_accepted: int = 0
    steps_rejected: int = 0
    rhs_evals: int = field(default=0, repr=False)


def _dp5_step(fun, t, y, f0, h):
    K = np.empty((7, y.size))
    K[0] = f0
    for i in range(1, 6):
        K[i] = fun(t + _DP5_C[i] * h, y + h * (_DP5_A[i, :i] @ K[:i]))
    y_new = y + h * (_DP5_B[:6] @ K[:6])
    f_new = fun(t + h, y_new)
    K[6] = f_new
    return y_new, f_new, h * (_DP5_E @ K), None, 6


def _dop853_step(fun, t, y, f0, h):
    K = np.empty((12, y.size))
    K[0] = f0
    for i in range(1, 12):
        K[i] = fun(t + _DOP853_C[i] * h, y + h * (_DOP853_A[i, :i] @ K[:i]))
    y_new = y + h * (_DOP853_B @ K)
    f_new = fun(t + h, y_new)
    return y_new, f_new, _DOP853_E5 @ K, _DOP853_E3 @ K, 12


_METHODS = {
    "RK45": {"step": _dp5_step, "order": 5, "est_order": 4},
    "RK89": {"step": _dop853_step, "order": 8, "est_order": 7},
}


def _error_norm(method, err5, err3, h, scale):
    if method == "RK45":
        return float(np.sqrt(np.mean((err5 / scale) ** 2)))
    # DOP853 combined estimate
    e5 = np.sum((err5 / scale) ** 2)
    e3 = np.sum((err3 / scale) ** 2)
    if e5 == 0.0 and e3 == 0.0:
        return 0.0
    denom = e5 + 0.01 * e3
    return float(abs(h) * e5 / np.sqrt(denom * scale.size))


def _initial_step(fun, t0, y0, f0, order, rtol, atol):
    # Hairer, Norsett & Wanner, Solving ODEs I, sec. II.4
    scale = atol + np.abs(y0) * rtol
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * f0
    f1 = fun(t0 + h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (order + 1))
    return min(100 * h0, h1)


SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


def integrate(
    rhs: Callable, y0, output_grid, cfg: IntegratorConfig | None = None, record_steps: bool = False
) -> OdeSolution:
    """Integrate ``y' = rhs(t, y)`` and return the states at ``output_grid``.

    The first grid point is the initial time. Errors are controlled with the
    usual mixed test ``|err_i| <= abs_tol + rel_tol * max(|y_i|, |y_new_i|)``
    (RMS over components) and a PI step-size controller. With
    ``cfg.fixed_step`` set, a constant step is used instead (still clipped
    to land on grid points).

    ``record_steps=True`` additionally keeps every accepted step, so that
    ``output_grid = [t0, tf]`` yields the solver's own time sequence.
    """
    cfg = cfg or IntegratorConfig()
    grid = np.asarray(output_grid, dtype=float).ravel()
    if grid.size < 1 or not np.all(np.isfinite(grid)):
        raise ValueError("output grid must be non-empty and finite")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("output grid must be strictly increasing")
    y = np.array(y0, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise ValueError("initial state must be finite")

    n_evals = 0

    def fun(t, yy):
        nonlocal n_evals
        n_evals += 1
        out = np.asarray(rhs(t, yy), dtype=float).ravel()
        if out.shape != yy.shape:
            raise ValueError(f"rhs returned shape {out.shape}, expected {yy.shape}")
        if not np.all(np.isfinite(out)):
            raise IntegrationError(f"non-finite derivative at t = {t!r}", t)
        return out

    meth = _METHODS[cfg.method]
    step = meth["step"]
    exponent = 1.0 / (meth["est_order"] + 1)
    # PI controller gains (Gustafsson / Hairer-Wanner form)
    beta = 0.4 * exponent
    alpha = exponent - 0.75 * beta

    states = np.empty((grid.size, y.size))
    states[0] = y
    t = grid[0]
    f = fun(t, y)
    span = grid[-1] - grid[0]
    max_step = cfg.max_step if cfg.max_step is not None else (span if span > 0 else np.inf)

    if cfg.fixed_step is not None:
        h = cfg.fixed_step
    elif cfg.initial_step is not None:
        h = cfg.initial_step
    elif span > 0:
        h = _initial_step(fun, t, y, f, meth["order"], cfg.rel_tol, cfg.abs_tol)
    else:
        h = 1.0
    h = min(h, max_step)

    accepted = rejected = 0
    err_prev = 1e-4

    rec_t, rec_y = [t], [y]

    def partial(i):
        if record_steps:
            return OdeSolution(np.array(rec_t), np.array(rec_y), accepted, rejected, n_evals)
        return OdeSolution(grid[:i].copy(), states[:i].copy(), accepted, rejected, n_evals)

    for i in range(1, grid.size):
        t_target = grid[i]
        while t < t_target:
            if accepted + rejected >= cfg.max_steps:
                raise IntegrationError(
                    f"max_steps = {cfg.max_steps} exceeded at t = {t!r}", t, partial(i)
                )
            remaining = t_target - t
            # absorb round-off slivers into the landing step
            landing = h * (1 + 1e-9) >= remaining
            h_try = remaining if landing else h
            if h_try <= 16 * np.spacing(abs(t)):
                raise IntegrationError(f"step size underflow at t = {t!r}", t, partial(i))
            try:
                y_new, f_new, e5, e3, _ = step(fun, t, y, f, h_try)
            except IntegrationError as exc:
                raise IntegrationError(str(exc), exc.t, partial(i)) from None

            if cfg.fixed_step is not None:
                accepted += 1
                t = t_target if landing else t + h_try
                y, f = y_new, f_new
                if record_steps:
                    rec_t.append(t)
                    rec_y.append(y)
                continue

            scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            if cfg.method == "RK45":
                err = _error_norm("RK45", e5, None, h_try, scale)
            else:
                err = _error_norm("RK89", e5, e3, h_try, scale)

            if err <= 1.0:
                accepted += 1
                if err == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = SAFETY * err ** (-alpha) * err_prev ** beta
                    factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
                err_prev = max(err, 1e-4)
                t = t_target if landing else t + h_try
                y, f = y_new, f_new
                if record_steps:
                    rec_t.append(t)
                    rec_y.append(y)
                h_next = h_try * factor
                if landing:
                    # a step shortened to hit a grid point says little about
                    # the natural step size; do not let it shrink the proposal
                    h_next = max(h_next, h)
                h = min(max_step, h_next)
            else:
                rejected += 1
                factor = max(MIN_FACTOR, SAFETY * err ** (-exponent))
                h = h_try * factor
        states[i] = y

    if record_steps:
        return partial(grid.size)
    return OdeSolution(grid.copy(), states, accepted, rejected, n_evals)
