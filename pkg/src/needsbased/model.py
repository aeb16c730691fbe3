"""Domain types and evaluators for the deterministic inventory model.

Units: hours for time, consumption-days for inventory, abstract money for
utility. Day indices are 1-based in the public API (anchors, weekend sets,
violation reports) and 0-based inside numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError

TOL = 1e-9


def _as_float_array(x, name, ndim=None) -> np.ndarray:
    arr = np.array(x, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise DomainError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------- horizon

@dataclass(frozen=True)
class Horizon:
    H: int
    weekend_days: frozenset | None = None

    def __post_init__(self):
        if int(self.H) != self.H or self.H < 1:
            raise DomainError(f"H must be a positive integer, got {self.H}")
        object.__setattr__(self, "H", int(self.H))
        if self.weekend_days is None:
            wk = {d for d in range(1, self.H + 1) if (d - 1) % 7 in (5, 6)}
        else:
            wk = {int(d) for d in self.weekend_days}
            if any(d < 1 or d > self.H for d in wk):
                raise DomainError(f"weekend days must lie in 1..{self.H}")
        object.__setattr__(self, "weekend_days", frozenset(wk))

    @classmethod
    def weeks(cls, k: int) -> "Horizon":
        return cls(7 * int(k))

    @property
    def n_weeks(self) -> int:
        return -(-self.H // 7)

    @property
    def weekend_mask(self) -> np.ndarray:
        m = np.zeros(self.H, dtype=bool)
        for d in self.weekend_days:
            m[d - 1] = True
        return m


# ------------------------------------------------------------- production

@dataclass(frozen=True)
class CobbDouglas:
    q0: float
    q1: float
    q2: float

    def __post_init__(self):
        if not 0.0 < self.q1 < 1.0:
            raise DomainError(f"CobbDouglas needs 0 < q1 < 1, got {self.q1}")

    kind = "cobb_douglas"

    def constant(self, A):
        return np.exp(self.q0) * np.power(A, self.q2)

    def shape(self, d):
        return np.power(np.asarray(d, dtype=float), self.q1)

    def inverse_shape(self, y):
        return np.power(np.asarray(y, dtype=float), 1.0 / self.q1)

    def to_dict(self):
        return {"type": self.kind, "q0": self.q0, "q1": self.q1, "q2": self.q2}


@dataclass(frozen=True)
class Piecewise:
    """Concave piecewise-linear production: C * pw(d).

    ``slopes`` p_1 > p_2 > ... > 0 and ``breakpoints`` 0 < b_1 < ... (one
    fewer than slopes). The last segment is unbounded.
    """

    q0: float
    q2: float
    slopes: tuple
    breakpoints: tuple = ()

    kind = "piecewise"

    def __post_init__(self):
        p = tuple(float(s) for s in np.atleast_1d(self.slopes))
        b = tuple(float(s) for s in np.atleast_1d(self.breakpoints)) if len(np.atleast_1d(self.breakpoints)) else ()
        if len(p) < 1:
            raise DomainError("at least one slope required")
        if len(b) != len(p) - 1:
            raise DomainError(f"{len(p)} slopes need {len(p) - 1} breakpoints, got {len(b)}")
        if p[-1] <= 0 or any(p[i] <= p[i + 1] for i in range(len(p) - 1)):
            raise DomainError(f"slopes must be strictly decreasing and positive, got {p}")
        if b and (b[0] <= 0 or any(b[i] >= b[i + 1] for i in range(len(b) - 1))):
            raise DomainError(f"breakpoints must be strictly increasing and positive, got {b}")
        object.__setattr__(self, "slopes", p)
        object.__setattr__(self, "breakpoints", b)

    @property
    def is_linear(self) -> bool:
        return len(self.slopes) == 1

    @property
    def p1(self) -> float:
        return self.slopes[0]

    @property
    def n_segments(self) -> int:
        return len(self.slopes)

    def segment_bounds(self):
        """Left and right ends of each segment (last right end is inf)."""
        lo = np.concatenate([[0.0], self.breakpoints])
        hi = np.concatenate([self.breakpoints, [np.inf]])
        return lo, hi

    def constant(self, A):
        return np.exp(self.q0) * np.power(A, self.q2)

    def shape(self, d):
        d = np.asarray(d, dtype=float)
        if len(self.slopes) == 1:
            return self.slopes[0] * d
        lo, hi = self.segment_bounds()
        widths = np.clip(d[..., None] - lo, 0.0, hi - lo)
        return widths @ np.asarray(self.slopes)

    def inverse_shape(self, y):
        y = np.asarray(y, dtype=float)
        lo, hi = self.segment_bounds()
        p = np.asarray(self.slopes)
        knots = np.concatenate([[0.0], np.cumsum(p[:-1] * (hi[:-1] - lo[:-1]))])
        seg = np.searchsorted(knots, y, side="right") - 1
        seg = np.clip(seg, 0, len(p) - 1)
        return lo[seg] + (y - knots[seg]) / p[seg]

    def to_dict(self):
        if self.is_linear:
            return {"type": "linear", "q0": self.q0, "p1": self.p1, "q2": self.q2}
        return {"type": self.kind, "q0": self.q0, "q2": self.q2,
                "slopes": list(self.slopes), "breakpoints": list(self.breakpoints)}


def Linear(q0: float, p1: float, q2: float) -> Piecewise:
    """Linear production is the one-segment piecewise case."""
    return Piecewise(q0=q0, q2=q2, slopes=(p1,))


def production_from_dict(doc: dict):
    kind = doc.get("type")
    try:
        if kind == "cobb_douglas":
            return CobbDouglas(float(doc["q0"]), float(doc["q1"]), float(doc["q2"]))
        if kind == "linear":
            return Linear(float(doc["q0"]), float(doc["p1"]), float(doc["q2"]))
        if kind == "piecewise":
            return Piecewise(float(doc["q0"]), float(doc["q2"]), tuple(doc["slopes"]),
                             tuple(doc.get("breakpoints", ())))
    except KeyError as exc:
        raise DomainError(f"production spec missing field {exc}") from None
    raise DomainError(f"unknown production type {kind!r}")


def production(spec, d, A, participate=True):
    """Activity production in consumption-days. Vectorized over d, A, participate."""
    d = np.asarray(d, dtype=float)
    A = np.asarray(A, dtype=float)
    part = np.asarray(participate, dtype=bool)
    if np.any(d < 0):
        raise DomainError("duration must be non-negative")
    if np.any(A <= 0):
        raise DomainError("attractiveness must be positive")
    if np.any(~part & (d != 0)):
        raise DomainError("non-participation requires zero duration")
    with np.errstate(divide="ignore"):
        out = spec.constant(A) * spec.shape(d)
    out = np.where(part, out, 0.0)
    return float(out) if out.ndim == 0 else out


# ----------------------------------------------------------------- params

@dataclass(frozen=True)
class ModelParams:
    gamma: float
    rho1: float
    rho3: float
    production: object
    rho2: float | None = None
    lambda_weekday: float = 1.0

    def __post_init__(self):
        if self.rho2 is None:
            object.__setattr__(self, "rho2", 2.0 * self.rho3)
        if not (self.rho1 > 0 and self.rho3 > 0 and self.gamma > 0 and self.lambda_weekday > 0):
            raise DomainError("rho1, rho3, gamma and lambda_weekday must be positive")
        if not self.rho2 > self.rho3:
            raise DomainError(f"rho2 must exceed rho3 (got rho2={self.rho2}, rho3={self.rho3})")
        if not isinstance(self.production, (CobbDouglas, Piecewise)):
            raise DomainError("production must be CobbDouglas or Piecewise")

    def replace(self, **kw) -> "ModelParams":
        doc = dict(gamma=self.gamma, rho1=self.rho1, rho3=self.rho3, rho2=self.rho2,
                   production=self.production, lambda_weekday=self.lambda_weekday)
        if "rho3" in kw and "rho2" not in kw:
            doc["rho2"] = None
        doc.update(kw)
        return ModelParams(**doc)

    def to_dict(self):
        return {"lambda_weekday": self.lambda_weekday, "gamma": self.gamma, "rho1": self.rho1,
                "rho2": self.rho2, "rho3": self.rho3, "production": self.production.to_dict()}


def consumption_vector(h: Horizon, params: ModelParams) -> np.ndarray:
    lam = np.full(h.H, float(params.lambda_weekday))
    lam[h.weekend_mask] *= params.gamma
    return lam


# ---------------------------------------------------------------- inputs

@dataclass(frozen=True)
class ScenarioInputs:
    """Per-individual inputs. TT and TC are two-way (home to location and back)."""

    locations: tuple
    attractiveness: np.ndarray   # (L, H)
    travel_time: np.ndarray      # (L, H) hours
    travel_cost: np.ndarray      # (L, H) money
    free_time: np.ndarray        # (H,) hours
    size_measures: np.ndarray | None = None   # (L, K)
    size_measure_names: tuple = ()

    def __post_init__(self):
        locs = tuple(str(x) for x in self.locations)
        A = _as_float_array(self.attractiveness, "attractiveness", 2)
        TT = _as_float_array(self.travel_time, "travel_time", 2)
        TC = _as_float_array(self.travel_cost, "travel_cost", 2)
        FT = _as_float_array(self.free_time, "free_time", 1)
        L, H = len(locs), FT.shape[0]
        for name, m in (("attractiveness", A), ("travel_time", TT), ("travel_cost", TC)):
            if m.shape != (L, H):
                raise DomainError(f"{name} has shape {m.shape}, expected {(L, H)}")
        if np.any(A <= 0):
            raise DomainError("attractiveness must be positive")
        if np.any(TT < 0) or np.any(TC < 0):
            raise DomainError("travel time and cost must be non-negative")
        if np.any(FT <= 0):
            raise DomainError("free time must be positive")
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "attractiveness", A)
        object.__setattr__(self, "travel_time", TT)
        object.__setattr__(self, "travel_cost", TC)
        object.__setattr__(self, "free_time", FT)
        if self.size_measures is not None:
            X = _as_float_array(self.size_measures, "size_measures", 2)
            if X.shape[0] != L:
                raise DomainError("size_measures must have one row per location")
            names = tuple(self.size_measure_names) or tuple(f"x{k}" for k in range(X.shape[1]))
            if len(names) != X.shape[1]:
                raise DomainError("size_measure_names length mismatch")
            object.__setattr__(self, "size_measures", X)
            object.__setattr__(self, "size_measure_names", names)

    @property
    def H(self) -> int:
        return self.free_time.shape[0]

    @property
    def n_locations(self) -> int:
        return len(self.locations)

    def replicate(self, k: int) -> "ScenarioInputs":
        """Tile the day axis k times (multi-week extension)."""
        return ScenarioInputs(
            self.locations,
            np.tile(self.attractiveness, (1, k)),
            np.tile(self.travel_time, (1, k)),
            np.tile(self.travel_cost, (1, k)),
            np.tile(self.free_time, k),
            self.size_measures,
            self.size_measure_names,
        )

    @classmethod
    def uniform(cls, H, *, attractiveness, travel_time_two_way, travel_cost_two_way,
                free_time_weekday, free_time_weekend, n_locations=1, horizon=None):
        """Same attributes on every day and location; free time by day type."""
        h = horizon or Horizon(H)
        ft = np.where(h.weekend_mask, free_time_weekend, free_time_weekday).astype(float)
        full = lambda v: np.full((n_locations, H), float(v))
        return cls(tuple(f"z{j + 1}" for j in range(n_locations)), full(attractiveness),
                   full(travel_time_two_way), full(travel_cost_two_way), ft)


# -------------------------------------------------------------- patterns

@dataclass(frozen=True)
class ActivityPattern:
    delta: np.ndarray
    d: np.ndarray
    loc: np.ndarray

    def __post_init__(self):
        delta = np.array(self.delta)
        if not np.all((delta == 0) | (delta == 1)):
            raise DomainError("delta must be binary")
        delta = delta.astype(np.int8)
        d = _as_float_array(self.d, "d", 1)
        loc = np.array(self.loc, dtype=np.int64)
        if not (delta.shape == d.shape == loc.shape) or delta.ndim != 1:
            raise DomainError("delta, d and loc must be vectors of equal length")
        if np.any(d < 0):
            raise DomainError("durations must be non-negative")
        if np.any((delta == 0) & (d > 0)):
            raise DomainError("positive duration on a non-participation day")
        delta.setflags(write=False)
        loc.setflags(write=False)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "loc", loc)

    @classmethod
    def _trusted(cls, delta, d, loc):
        """Skip validation for arrays produced by the solver itself."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "delta", delta)
        object.__setattr__(obj, "d", d)
        object.__setattr__(obj, "loc", loc)
        return obj

    @property
    def H(self):
        return self.delta.shape[0]

    def validate_strict(self, n_locations=None):
        """Reject active days with zero duration and out-of-range locations."""
        bad = np.flatnonzero((self.delta == 1) & (self.d <= 0))
        if bad.size:
            raise DomainError(f"active day(s) {list(bad + 1)} have zero duration")
        if n_locations is not None:
            act = self.delta == 1
            if np.any((self.loc[act] < 0) | (self.loc[act] >= n_locations)):
                raise DomainError("location index out of range on an active day")
        return self


@dataclass(frozen=True)
class InventoryTrajectory:
    I: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        I = _as_float_array(self.I, "I", 1)
        Q = _as_float_array(self.Q, "Q", 1)
        if I.shape != Q.shape:
            raise DomainError("I and Q must have equal length")
        object.__setattr__(self, "I", I)
        object.__setattr__(self, "Q", Q)

    @classmethod
    def _trusted(cls, I, Q):
        obj = object.__new__(cls)
        object.__setattr__(obj, "I", I)
        object.__setattr__(obj, "Q", Q)
        return obj

    @property
    def I_min(self) -> float:
        return float(self.I.min())

    def shifted(self, c: float) -> "InventoryTrajectory":
        return InventoryTrajectory(self.I + c, self.Q)


@dataclass(frozen=True)
class SolveResult:
    pattern: ActivityPattern
    trajectory: InventoryTrajectory
    objective: float
    weeks: int = 1
    anchor: int | None = None
    degenerate: bool = False

    def to_dict(self):
        return {
            "objective": self.objective,
            "horizon_days": int(self.pattern.H),
            "horizon_weeks": int(self.weeks),
            "anchor_day": self.anchor,
            "degenerate": bool(self.degenerate),
            "delta": self.pattern.delta.astype(int).tolist(),
            "duration": self.pattern.d.tolist(),
            "location": self.pattern.loc.astype(int).tolist(),
            "inventory": self.trajectory.I.tolist(),
            "production": self.trajectory.Q.tolist(),
            "safety_stock": self.trajectory.I_min,
        }


# ------------------------------------------------------------ evaluators

def _day_attr(mat: np.ndarray, loc: np.ndarray) -> np.ndarray:
    idx = np.minimum(np.maximum(loc, 0), mat.shape[0] - 1)
    return mat[idx, np.arange(mat.shape[1])]


def pattern_production(pattern: ActivityPattern, inputs: ScenarioInputs, params: ModelParams):
    A = _day_attr(inputs.attractiveness, pattern.loc)
    return production(params.production, pattern.d, A, pattern.delta == 1)


def evaluate_objective(pattern: ActivityPattern, trajectory: InventoryTrajectory,
                       inputs: ScenarioInputs, params: ModelParams, h: Horizon | None = None) -> float:
    H = pattern.H
    if h is not None and h.H != H:
        raise DomainError("horizon length mismatch")
    if trajectory.I.shape[0] != H or inputs.H != H:
        raise DomainError("pattern, trajectory and inputs must share the horizon")
    h = h or Horizon(H)
    lam = consumption_vector(h, params)
    delta = pattern.delta.astype(float)
    tt = _day_attr(inputs.travel_time, pattern.loc)
    tc = _day_attr(inputs.travel_cost, pattern.loc)
    benefit = params.rho3 / H * np.sum(trajectory.I + trajectory.Q - lam / 2)
    cost = (params.rho1 / H * np.sum(pattern.d + delta * tt)
            + params.rho2 * trajectory.I_min
            + np.sum(delta * tc) / H)
    return float(benefit - cost)


def reconstruct_trajectory(Q, lam) -> InventoryTrajectory:
    """Forward recursion I_{t+1} = I_t + Q_t - lam_t, shifted so min I = 0."""
    Q = np.asarray(Q, dtype=float)
    lam = np.asarray(lam, dtype=float)
    I = np.concatenate([[0.0], np.cumsum(Q - lam)[:-1]])
    return InventoryTrajectory(I - I.min(), Q)


@dataclass(frozen=True)
class Violation:
    constraint: str
    day: int
    amount: float


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple = ()
    trajectory: InventoryTrajectory | None = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def days(self, constraint: str):
        return sorted({v.day for v in self.violations if v.constraint == constraint})

    def __bool__(self):
        return self.ok


def check_feasibility(pattern: ActivityPattern, inputs: ScenarioInputs, params: ModelParams,
                      h: Horizon | None = None, trajectory: InventoryTrajectory | None = None,
                      tol: float = TOL) -> FeasibilityReport:
    """Check the four constraint families plus the delta/d link.

    Without ``trajectory`` the inventory is rebuilt from production with the
    min-inventory day anchored at 0. A supplied trajectory is checked as is.
    """
    H = pattern.H
    h = h or Horizon(H)
    lam = consumption_vector(h, params)
    out: list[Violation] = []
    act = pattern.delta == 1
    for t in np.flatnonzero(act & (pattern.d <= 0)):
        out.append(Violation("duration_value", int(t) + 1, 0.0))
    Q = pattern_production(pattern, inputs, params)
    scale = max(1.0, float(lam.sum()))
    if trajectory is None:
        traj = reconstruct_trajectory(Q, lam)
    else:
        traj = trajectory
        if np.max(np.abs(traj.Q - Q)) > tol * scale:
            out.append(Violation("production", int(np.argmax(np.abs(traj.Q - Q))) + 1,
                                 float(np.max(np.abs(traj.Q - Q)))))
        gap = traj.I[1:] - traj.I[:-1] - (traj.Q[:-1] - lam[:-1])
        for t in np.flatnonzero(np.abs(gap) > tol * scale):
            out.append(Violation("conservation", int(t) + 1, float(gap[t])))
    imbalance = float(traj.I[0] - traj.I[-1] - (traj.Q[-1] - lam[-1]))
    if abs(imbalance) > tol * scale:
        out.append(Violation("periodicity", H, imbalance))
    slack = traj.I + traj.Q - lam
    for t in np.flatnonzero(slack < -tol * scale):
        out.append(Violation("replenish", int(t) + 1, float(-slack[t])))
    tt = _day_attr(inputs.travel_time, pattern.loc)
    over = pattern.d + pattern.delta * tt - inputs.free_time
    for t in np.flatnonzero(act & (over > tol)):
        out.append(Violation("daily_time", int(t) + 1, float(over[t])))
    return FeasibilityReport(tuple(out), traj)
