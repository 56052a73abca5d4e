"""Mass-action reaction systems, dosing, conservation laws and closed forms.

Concentrations are in mol/L and time in seconds. Dose amounts are taken as
concentration increments, i.e. a unit reaction volume is assumed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .matcore import as_matrix
from .odeint import IntegrationError, IntegratorConfig, OdeSolution, integrate


class ModelError(ValueError):
    """Invalid reaction system or dose definition."""


@dataclass(frozen=True)
class Reaction:
    reactants: dict
    products: dict
    k: float

    def __post_init__(self):
        for side in (self.reactants, self.products):
            for name, nu in side.items():
                if not (float(nu).is_integer() and nu >= 0):
                    raise ModelError(f"stoichiometric coefficient of {name!r} must be a non-negative integer, got {nu}")
        if not any(nu > 0 for nu in self.reactants.values()):
            raise ModelError("a reaction needs at least one reactant")
        if not (np.isfinite(self.k) and self.k > 0):
            raise ModelError(f"rate constant must be positive, got {self.k}")

    def label(self) -> str:
        def side(d):
            return " + ".join((f"{int(n)} " if n != 1 else "") + s for s, n in d.items() if n > 0) or "0"
        return f"{side(self.reactants)} -> {side(self.products)}"


@dataclass(frozen=True)
class ReactionSystem:
    species: tuple
    reactions: tuple
    y0: np.ndarray
    name: str = ""

    def __post_init__(self):
        species = tuple(self.species)
        if len(set(species)) != len(species) or not species:
            raise ModelError("species names must be unique and non-empty")
        object.__setattr__(self, "species", species)
        object.__setattr__(self, "reactions", tuple(self.reactions))
        y0 = np.array(self.y0, dtype=float).ravel()
        if y0.size != len(species):
            raise ModelError(f"y0 has {y0.size} entries for {len(species)} species")
        if np.any(y0 < 0) or not np.all(np.isfinite(y0)):
            raise ModelError("initial concentrations must be finite and non-negative")
        object.__setattr__(self, "y0", y0)
        for r in self.reactions:
            for name in list(r.reactants) + list(r.products):
                if name not in species:
                    raise ModelError(f"reaction {r.label()!r} uses unknown species {name!r}")

    def index(self, name: str) -> int:
        try:
            return self.species.index(name)
        except ValueError:
            raise ModelError(f"unknown species {name!r}") from None

    def reactant_matrix(self) -> np.ndarray:
        R = np.zeros((len(self.species), len(self.reactions)))
        for j, r in enumerate(self.reactions):
            for s, nu in r.reactants.items():
                R[self.index(s), j] += nu
        return R

    def product_matrix(self) -> np.ndarray:
        P = np.zeros((len(self.species), len(self.reactions)))
        for j, r in enumerate(self.reactions):
            for s, nu in r.products.items():
                P[self.index(s), j] += nu
        return P

    def stoichiometry(self) -> np.ndarray:
        """Net stoichiometric matrix (species x reactions)."""
        return self.product_matrix() - self.reactant_matrix()

    def with_y0(self, y0) -> "ReactionSystem":
        return ReactionSystem(self.species, self.reactions, y0, self.name)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "species": list(self.species),
            "reactions": [
                {"reactants": dict(r.reactants), "products": dict(r.products), "k": r.k}
                for r in self.reactions
            ],
            "y0": [float(v) for v in self.y0],
        }


@dataclass(frozen=True)
class ConservationLaw:
    """``C @ weights == constant`` along every trajectory."""

    weights: np.ndarray
    constant: float = 0.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "weights", np.array(self.weights, dtype=float).ravel())

    @property
    def kind(self) -> str:
        return "linear" if self.constant == 0 else "affine"


@dataclass(frozen=True)
class ContinuousDose:
    """Constant feed of ``rate`` mol/(L s) into ``target`` from ``start`` for
    ``amount / rate`` seconds. ``rate=None`` spreads the amount over the
    remainder of the run."""

    target: str
    amount: float
    rate: float | None = None
    start: float = 0.0

    def __post_init__(self):
        if not self.amount > 0:
            raise ModelError("dose amount must be positive")
        if self.rate is not None and not self.rate > 0:
            raise ModelError("dose rate must be positive")

    def window(self, t_end: float) -> tuple[float, float, float]:
        rate = self.rate if self.rate is not None else self.amount / (t_end - self.start)
        return self.start, self.start + self.amount / rate, rate

    def to_dict(self) -> dict:
        return {"mode": "continuous", "target": self.target, "amount": self.amount,
                "rate": self.rate, "start": self.start}


@dataclass(frozen=True)
class DiscreteDose:
    """Instantaneous addition of ``amount`` to ``target`` at ``time``."""

    target: str
    amount: float
    time: float

    def __post_init__(self):
        if not self.amount > 0:
            raise ModelError("dose amount must be positive")

    def to_dict(self) -> dict:
        return {"mode": "discrete", "target": self.target, "amount": self.amount, "time": self.time}


def parse_dose(text: str):
    """Parse ``discrete:K:5e-4@3`` or ``continuous:K:5e-4[:rate][@start]``."""
    try:
        mode, target, rest = text.split(":", 2)
        at = None
        if "@" in rest:
            rest, at = rest.split("@", 1)
        parts = rest.split(":")
        amount = float(parts[0])
        if mode == "discrete":
            if at is None or len(parts) != 1:
                raise ValueError
            return DiscreteDose(target, amount, float(at))
        if mode == "continuous":
            rate = float(parts[1]) if len(parts) > 1 else None
            return ContinuousDose(target, amount, rate, float(at) if at is not None else 0.0)
    except (ValueError, IndexError):
        pass
    raise ModelError(
        f"cannot parse dose {text!r}; expected discrete:SPECIES:AMOUNT@TIME or "
        "continuous:SPECIES:AMOUNT[:RATE][@START]"
    )


def mass_action_rhs(system: ReactionSystem, feed=None) -> Callable:
    """Return ``f(t, y)`` for the mass-action ODEs of ``system``.

    ``feed`` is an optional constant vector added to the derivative.
    """
    R = system.reactant_matrix()
    N = system.stoichiometry()
    k = np.array([r.k for r in system.reactions])
    feed = None if feed is None else np.asarray(feed, dtype=float)
    # only nonzero exponents matter; keep an index list per reaction
    terms = [(np.nonzero(R[:, j])[0], R[np.nonzero(R[:, j])[0], j]) for j in range(R.shape[1])]

    def rhs(t, y):
        rates = np.empty(len(terms))
        for j, (idx, nu) in enumerate(terms):
            rates[j] = k[j] * np.prod(y[idx] ** nu)
        dy = N @ rates
        if feed is not None:
            dy = dy + feed
        return dy

    return rhs


@dataclass
class Simulation:
    times: np.ndarray
    C: np.ndarray
    species: tuple
    steps_accepted: int = 0
    steps_rejected: int = 0
    doses: list = field(default_factory=list)


def simulate(
    system: ReactionSystem,
    grid,
    cfg: IntegratorConfig | None = None,
    doses: Sequence = (),
    natural_steps: bool = False,
) -> Simulation:
    """Integrate ``system`` and return concentrations at the grid points.

    Discrete dose times are inserted into the grid; the row at a dose time
    holds the state just after the dose. Continuous doses add a constant
    feed while active; integration is split at the feed window edges so
    that the right-hand side is smooth inside every piece.

    With ``natural_steps`` the grid only gives the time span and every
    accepted solver step is reported.
    """
    cfg = cfg or IntegratorConfig()
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must have at least two strictly increasing times")
    t0, t_end = grid[0], grid[-1]
    if natural_steps:
        grid = np.array([t0, t_end])

    jumps: dict[float, np.ndarray] = {}
    feeds = []
    for d in doses:
        j = system.index(d.target)
        if isinstance(d, DiscreteDose):
            if not t0 <= d.time <= t_end:
                raise ModelError(f"discrete dose time {d.time} outside [{t0}, {t_end}]")
            jumps.setdefault(float(d.time), np.zeros(len(system.species)))[j] += d.amount
        elif isinstance(d, ContinuousDose):
            start, stop, rate = d.window(t_end)
            if start < t0 or start >= t_end:
                raise ModelError(f"continuous dose start {start} outside [{t0}, {t_end})")
            feeds.append((start, stop, j, rate))
        else:
            raise ModelError(f"unknown dose type {type(d).__name__}")

    if jumps:
        grid = np.union1d(grid, np.array(sorted(jumps)))
    edges = {t0, t_end} | set(jumps)
    for start, stop, _, _ in feeds:
        edges |= {start, min(stop, t_end)}
    edges = np.array(sorted(e for e in edges if t0 <= e <= t_end))

    out_t, out_c = [], []
    y = system.y0.copy()
    if t0 in jumps:
        y = y + jumps[t0]
    accepted = rejected = 0
    for a, b in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (a + b)
        feed = np.zeros(len(system.species))
        for start, stop, j, rate in feeds:
            if start <= mid < stop:
                feed[j] += rate
        rhs = mass_action_rhs(system, feed if np.any(feed) else None)
        inner = grid[(grid > a) & (grid < b)]
        seg_grid = np.concatenate(([a], inner, [b]))
        try:
            sol = integrate(rhs, y, seg_grid, cfg, record_steps=natural_steps)
        except IntegrationError as exc:
            raise IntegrationError(f"{exc} (segment [{a}, {b}] of {system.name or 'system'})", exc.t, exc.partial) from None
        accepted += sol.steps_accepted
        rejected += sol.steps_rejected
        y = sol.states[-1].copy()
        if b in jumps:
            y = y + jumps[b]
        keep = np.ones(sol.times.size, dtype=bool)
        if out_t:
            keep[0] = False  # already emitted as the end of the previous piece
        if not natural_steps:
            keep &= np.isin(sol.times, grid)
        rows = sol.states.copy()
        rows[-1] = y
        out_t.append(sol.times[keep])
        out_c.append(rows[keep])
    times = np.concatenate(out_t)
    C = np.vstack(out_c)
    return Simulation(times, C, system.species, accepted, rejected, list(doses))


def bimolecular_closed_form(k, X0, Y0, Z0, t, switch: float = 1e-8):
    """Exact solution of X + Y -> Z with rate ``k*X*Y``.

    Returns an array (len(t) x 3) of X, Y, Z. When the initial X and Y agree
    to within ``switch`` (relative), the equal-concentration limit
    ``X0 / (1 + X0 k t)`` is used because the general formula is 0/0 there.
    """
    if X0 <= 0 or Y0 <= 0:
        raise ValueError("X0 and Y0 must be positive")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    if abs(X0 - Y0) < switch * max(X0, Y0):
        X = X0 / (1 + X0 * k * t)
    else:
        # divide through by exp(X0 k t) so nothing overflows for X0 > Y0
        with np.errstate(over="ignore"):
            X = X0 * (X0 - Y0) / (X0 - Y0 * np.exp((Y0 - X0) * k * t))
    return np.column_stack([X, X - X0 + Y0, Z0 + X0 - X])


def lambert_w0(x: float) -> float:
    """Principal branch of the Lambert W function for real ``x >= -1/e``."""
    x = float(x)
    branch = -np.exp(-1.0)
    if not x >= branch:
        if np.isclose(x, branch, rtol=0, atol=1e-16):
            return -1.0
        raise ValueError(f"lambert_w0 needs x >= -1/e, got {x}")
    if x == 0.0:
        return 0.0
    if np.isinf(x):
        return np.inf
    if x < -0.25:
        # series about the branch point
        p = np.sqrt(2.0 * (np.e * x + 1.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    elif x < 3.0:
        w = np.log1p(x) * (1 - np.log1p(np.log1p(x)) / (2 + np.log1p(x)))
    else:
        lx = np.log(x)
        w = lx - np.log(lx)
    for _ in range(100):
        ew = np.exp(w)
        f = w * ew - x
        if f == 0.0:
            break
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        # Halley step
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w_new = w - step
        if abs(step) <= 1e-16 * (1.0 + abs(w_new)):
            w = w_new
            break
        w = w_new
    return float(w)


def lambert_w0_exp(u: float) -> float:
    """``W0(exp(u))`` without forming ``exp(u)``, for any real ``u``.

    For ``u > 700`` the equation ``w + ln(w) = u`` is solved by Newton's
    method from the asymptotic start ``u - ln(u)``.
    """
    if u <= 700.0:
        return lambert_w0(np.exp(u))
    w = u - np.log(u)
    for _ in range(50):
        f = w + np.log(w) - u
        step = f / (1.0 + 1.0 / w)
        w -= step
        if abs(step) <= 1e-16 * w:
            break
    return float(w)


@dataclass(frozen=True)
class MmClosedFormParams:
    k1: float = 20.0
    k1r: float = 0.1
    k2: float = 3.0
    S0: float = 1.0
    K0: float = 0.1

    def __post_init__(self):
        for name in ("k1", "k2", "S0", "K0"):
            if not getattr(self, name) > 0:
                raise ModelError(f"{name} must be positive")
        if self.k1r < 0:
            raise ModelError("k1r must be non-negative")

    @property
    def K_M(self) -> float:
        return (self.k1r + self.k2) / self.k1

    @property
    def vmax(self) -> float:
        return self.k2 * self.K0


def mm_qssa_closed_form(p: MmClosedFormParams, t) -> np.ndarray:
    """Quasi-steady-state Michaelis-Menten profiles (S, K, SK, P) at ``t``.

    The substrate follows ``S = K_M W0((S0/K_M) exp((S0 - vmax t)/K_M))``;
    the argument of W0 is handled in the log domain.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    KM, vmax = p.K_M, p.vmax
    u = np.log(p.S0 / KM) + (p.S0 - vmax * t) / KM
    S = KM * np.array([lambert_w0_exp(ui) for ui in u])
    SK = p.K0 * S / (KM + S) * (1 - np.exp(-(KM + S) * p.k1 * t))
    K = p.K0 - SK
    P = p.S0 - S - SK
    # P can dip a hair below zero from rounding at t = 0
    P = np.where(np.abs(P) < 1e-15 * p.S0, np.abs(P), P)
    return np.column_stack([S, K, SK, P])


def conservation_residuals(C, laws: Sequence[ConservationLaw]) -> np.ndarray:
    """Max-norm residual of ``C @ w - b`` over time points, per law."""
    C = as_matrix(C, "C")
    out = []
    for law in laws:
        if law.weights.size != C.shape[1]:
            raise ValueError(f"law has {law.weights.size} weights, C has {C.shape[1]} columns")
        out.append(float(np.max(np.abs(C @ law.weights - law.constant))))
    return np.array(out)


def stoichiometric_conservation(system: ReactionSystem, tol: float = 1e-10) -> list[ConservationLaw]:
    """Basis of the left null space of the stoichiometric matrix, as laws
    anchored at the system's initial state."""
    N = system.stoichiometry()
    u, s, _ = np.linalg.svd(N, full_matrices=True)
    rank = int(np.sum(s > tol * (s[0] if s.size else 1.0)))
    laws = []
    for i, w in enumerate(u[:, rank:].T):
        w = w / w[np.argmax(np.abs(w))]
        laws.append(ConservationLaw(w, float(w @ system.y0), f"null{i + 1}"))
    return laws


def mm_system(p: MmClosedFormParams = MmClosedFormParams(), name: str = "mm") -> ReactionSystem:
    reactions = [Reaction({"S": 1, "K": 1}, {"SK": 1}, p.k1)]
    if p.k1r > 0:
        reactions.append(Reaction({"SK": 1}, {"S": 1, "K": 1}, p.k1r))
    reactions.append(Reaction({"SK": 1}, {"P": 1, "K": 1}, p.k2))
    return ReactionSystem(("S", "K", "SK", "P"), reactions, [p.S0, p.K0, 0.0, 0.0], name)


def mm_laws(S0: float, K0: float) -> list[ConservationLaw]:
    """The enzyme balance (affine) and the S0/K0-weighted combination of the
    substrate and enzyme balances that is exactly linear."""
    return [
        ConservationLaw([0, 1, 1, 0], K0, "K + SK"),
        ConservationLaw([1, -S0 / K0, 1 - S0 / K0, 1], 0.0, "S - (S0/K0) K + (1 - S0/K0) SK + P"),
    ]


def bimolecular_system(k: float = 12.0, X0: float = 1.0, Y0: float = 0.7, Z0: float = 0.2,
                       name: str = "bimolecular") -> ReactionSystem:
    return ReactionSystem(("X", "Y", "Z"), (Reaction({"X": 1, "Y": 1}, {"Z": 1}, k),), [X0, Y0, Z0], name)


def mm_reduced_systems(p: MmClosedFormParams, variant: str = "SP"):
    """Two-equation Michaelis-Menten models using both conservation laws.

    Returns ``(rhs, y0, reconstruct)`` where ``reconstruct(Y)`` maps the
    (n x 2) reduced states to the (n x 4) matrix of S, K, SK, P.
    """
    k1, k1r, k2, S0, K0 = p.k1, p.k1r, p.k2, p.S0, p.K0
    v = variant.upper()
    if v == "SP":
        def rhs(t, y):
            S, P = y
            return np.array([-k1 * (S + P + K0 - S0) * S + k1r * (S0 - S - P), k2 * (S0 - S - P)])

        def reconstruct(Y):
            Y = np.atleast_2d(Y)
            S, P = Y[:, 0], Y[:, 1]
            SK = S0 - S - P
            return np.column_stack([S, K0 - SK, SK, P])

        return rhs, np.array([S0, 0.0]), reconstruct
    if v == "SK":
        def rhs(t, y):
            S, K = y
            return np.array([-k1 * S * K + k1r * (K0 - K), -k1 * S * K + (k1r + k2) * (K0 - K)])

        def reconstruct(Y):
            Y = np.atleast_2d(Y)
            S, K = Y[:, 0], Y[:, 1]
            SK = K0 - K
            return np.column_stack([S, K, SK, S0 - SK - S])

        return rhs, np.array([S0, K0]), reconstruct
    raise ValueError(f"variant must be 'SP' or 'SK', got {variant!r}")


# ---------------------------------------------------------------- presets

@dataclass(frozen=True)
class KineticsPreset:
    name: str
    system: ReactionSystem
    grid: np.ndarray
    doses: tuple = ()
    natural_steps: bool = False
    laws: tuple = ()
    description: str = ""


def growth_grid(stop: float, first: float, ratio: float) -> np.ndarray:
    """Times 0, first, first*(1+ratio), ... geometric steps, ending at ``stop``."""
    steps = [0.0]
    h = first
    while steps[-1] + h < stop:
        steps.append(steps[-1] + h)
        h *= ratio
    steps.append(stop)
    return np.array(steps)


MM_PARAMS = MmClosedFormParams()
MM_GRID_POINTS = 241
MM_STOP = 7.5


def dose_stop_time(dose: float, mode: str) -> float:
    """Run length for a dosed Michaelis-Menten experiment.

    Linear in the dose: 7.5 s at a dose of 5e-4, rising to 15 s at 0.1
    (continuous) or 12 s at 0.09 (discrete), so larger doses still show the
    full time course.
    """
    x_lo, y_lo = 0.0005, MM_STOP
    x_hi, y_hi = (0.1, 15.0) if mode == "continuous" else (0.09, 12.0)
    return (y_hi - y_lo) / (x_hi - x_lo) * (dose - x_lo) + y_lo


def _mm_dosed(name, dose, mode, rate=None, text=""):
    stop = dose_stop_time(dose, mode)
    p = MmClosedFormParams(K0=MM_PARAMS.K0 - dose)
    if mode == "continuous":
        doses = (ContinuousDose("K", dose, rate, 0.0),)
    else:
        doses = (DiscreteDose("K", dose, 3.0),)
    return KineticsPreset(
        name, mm_system(p, name), np.linspace(0.0, stop, MM_GRID_POINTS), doses,
        description=text,
    )


def _build_presets() -> dict:
    mm = mm_system(MM_PARAMS)
    presets = [
        KineticsPreset(
            "bimolecular", bimolecular_system(), np.array([0.0, 3.5]), natural_steps=True,
            description="X + Y -> Z, k = 12, (X0, Y0, Z0) = (1, 0.7, 0.2); solver step sequence on [0, 3.5]",
        ),
        KineticsPreset(
            "bimolecular-swapped", bimolecular_system(X0=0.7, Y0=1.0, name="bimolecular-swapped"),
            np.array([0.0, 3.5]), natural_steps=True,
            description="bimolecular with X0 and Y0 exchanged, for augmentation",
        ),
        KineticsPreset(
            "mm", mm, np.linspace(0.0, MM_STOP, MM_GRID_POINTS),
            laws=tuple(mm_laws(MM_PARAMS.S0, MM_PARAMS.K0)),
            description="S + K <=> SK -> P + K, k1 = 20, k1r = 0.1, k2 = 3, S0 = 1, K0 = 0.1",
        ),
        _mm_dosed("mm-dose-continuous", 5e-4, "continuous",
                  text="enzyme fed at amount/stop over the whole run (5e-4 total, K0 = 0.0995)"),
        _mm_dosed("mm-dose-discrete", 5e-4, "discrete",
                  text="5e-4 enzyme spiked at t = 3 s (K0 = 0.0995)"),
        _mm_dosed("mm-dose-continuous-large", 5e-3, "continuous", rate=5e-3,
                  text="5e-3 enzyme fed at 5e-3 per second from t = 0 (K0 = 0.095)"),
        _mm_dosed("mm-dose-discrete-large", 5e-3, "discrete",
                  text="5e-3 enzyme spiked at t = 3 s (K0 = 0.095)"),
    ]
    return {p.name: p for p in presets}


PRESETS = _build_presets()


def get_preset(name: str) -> KineticsPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ModelError(f"unknown kinetics preset {name!r}; choose from {sorted(PRESETS)}") from None


def dose_from_dict(d: dict):
    mode = d.get("mode")
    if mode == "discrete":
        return DiscreteDose(d["target"], float(d["amount"]), float(d["time"]))
    if mode == "continuous":
        rate = d.get("rate")
        return ContinuousDose(d["target"], float(d["amount"]), None if rate is None else float(rate),
                              float(d.get("start", 0.0)))
    raise ModelError(f"dose mode must be 'discrete' or 'continuous', got {mode!r}")


def system_from_dict(doc: dict) -> tuple[ReactionSystem, list, np.ndarray | None]:
    """Build ``(system, doses, grid)`` from a parsed JSON document.

    ``grid`` is None when the document carries no time specification.
    """
    species = list(doc["species"])
    reactions = [Reaction(dict(r.get("reactants", {})), dict(r.get("products", {})), float(r["k"]))
                 for r in doc["reactions"]]
    y0 = doc.get("y0", [0.0] * len(species))
    if isinstance(y0, dict):
        unknown = set(y0) - set(species)
        if unknown:
            raise ModelError(f"y0 names unknown species {sorted(unknown)}")
        y0 = [float(y0.get(s, 0.0)) for s in species]
    system = ReactionSystem(species, reactions, y0, doc.get("name", ""))
    doses = [dose_from_dict(d) for d in doc.get("doses", [])]
    grid = None
    if "times" in doc:
        grid = np.asarray(doc["times"], dtype=float)
    elif "grid" in doc:
        g = doc["grid"]
        grid = np.linspace(float(g.get("start", 0.0)), float(g["stop"]), int(g.get("points", 101)))
    return system, doses, grid


def load_system(path) -> tuple[ReactionSystem, list, np.ndarray | None]:
    from .schemas import validate_document

    doc = json.loads(Path(path).read_text())
    validate_document(doc, "reaction_system")
    return system_from_dict(doc)
