"""Exact solver for the deterministic model.

For fixed participation and locations the duration problem is a small
concave program. Anchoring the min-inventory day k at zero turns the
replenish/periodicity constraints into prefix-coverage constraints on the
cyclic order k, k+1, ..., k-1, and the objective becomes linear in
production with weight w_t = H-1-pos(t). The day-by-day procedure for
linear production with a common rate lives in ``_anchor_fill_linear``;
``_anchor_fill_greedy`` handles piecewise production and unequal rates.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, HorizonCapError, InfeasibleError
from .model import (
    ActivityPattern,
    CobbDouglas,
    Horizon,
    InventoryTrajectory,
    ModelParams,
    Piecewise,
    ScenarioInputs,
    SolveResult,
    _day_attr,
    consumption_vector,
    evaluate_objective,
)

from .batch import numba

FEAS_TOL = 1e-10


def _jit(fn):
    return numba.njit(cache=True)(fn) if numba is not None else fn


@_jit
def _linear_all_anchors(act, lam, cap, c, rho1, rho3, tol):
    """Compiled twin of the linear anchor loop: best (value, anchor, d, I).

    Value excludes the constant benefit/travel terms added by the caller;
    anchor is -1 when every anchor is infeasible.
    """
    H = lam.shape[0]
    m = act.shape[0]
    cum = np.zeros(2 * H + 1)
    for i in range(2 * H):
        cum[i + 1] = cum[i] + lam[i % H]
    best_v = -np.inf
    best_k = -1
    best_d = np.zeros(H)
    d = np.zeros(H)
    for l in range(m):
        k0 = act[l]
        d[:] = 0.0
        for i in range(m):
            nxt = act[i + 1] if i + 1 < m else act[0] + H
            d[act[i]] = (cum[nxt] - cum[act[i]]) / c
        for j in range(1, m):
            u = (l - j) % m
            t = act[u]
            over = d[t] - cap[t]
            if over > 0:
                d[act[(u - 1) % m]] += over
                d[t] = cap[t]
        if d[k0] - cap[k0] > tol * max(1.0, d[k0]):
            continue
        d[k0] = min(d[k0], cap[k0])
        for jj in range(1, m):
            u = (l - jj) % m
            t = act[u]
            # earlier days in the anchor order, nearest first
            n_chk = u - l if u > l else u + m - l
            for q in range(1, n_chk + 1):
                if d[t] <= 0:
                    break
                tj = act[(u - q) % m]
                room = cap[tj] - d[tj]
                if room > 0:
                    z = min(room, d[t])
                    d[t] -= z
                    d[tj] += z
        v = 0.0
        for t in range(H):
            w = k0 + H - 1 - t if t >= k0 else k0 - 1 - t
            v += rho3 / H * w * (c * d[t] - lam[t]) - rho1 / H * d[t]
        if v > best_v:
            best_v = v
            best_k = k0
            best_d[:] = d
    I = np.zeros(H)
    if best_k >= 0:
        run = 0.0
        for i in range(H):
            t = (best_k + i) % H
            I[t] = run
            run += c * best_d[t] - lam[t]
    return best_v, best_k, best_d, I


@dataclass(frozen=True)
class ConditionedProblem:
    delta: np.ndarray
    loc: np.ndarray
    inputs: ScenarioInputs
    params: ModelParams
    horizon: Horizon | None = None

    def __post_init__(self):
        delta = np.array(self.delta)
        if delta.ndim != 1 or not np.all((delta == 0) | (delta == 1)):
            raise DomainError("delta must be a binary vector")
        loc = np.broadcast_to(np.array(self.loc, dtype=np.int64), delta.shape).copy()
        h = self.horizon or Horizon(delta.shape[0])
        if h.H != delta.shape[0] or self.inputs.H != h.H:
            raise DomainError("delta, inputs and horizon disagree on H")
        act = delta == 1
        if np.any((loc[act] < 0) | (loc[act] >= self.inputs.n_locations)):
            raise DomainError("location index out of range")
        object.__setattr__(self, "delta", delta.astype(np.int8))
        object.__setattr__(self, "loc", loc)
        object.__setattr__(self, "horizon", h)

    @property
    def H(self):
        return self.horizon.H

    def day_data(self):
        """Per-day consumption, production constant, time cap, TT and TC."""
        lam = consumption_vector(self.horizon, self.params)
        C = self.params.production.constant(_day_attr(self.inputs.attractiveness, self.loc))
        tt = _day_attr(self.inputs.travel_time, self.loc)
        tc = _day_attr(self.inputs.travel_cost, self.loc)
        cap = np.where(self.delta == 1, np.maximum(self.inputs.free_time - tt, 0.0), 0.0)
        return lam, C, cap, tt, tc


# ---------------------------------------------------------------- slopes

def anchor_weights(k: int, H: int) -> np.ndarray:
    """w_t for 1-based anchor k: H-1 minus the cyclic distance from k."""
    t = np.arange(1, H + 1)
    return np.where(t >= k, k - 1 + H - t, k - 1 - t).astype(float)


def slopes(k: int, C, p1: float, params: ModelParams, h: Horizon) -> np.ndarray:
    """Marginal utility per hour of duration on each day for anchor k (1-based)."""
    if not 1 <= k <= h.H:
        raise DomainError(f"anchor must lie in 1..{h.H}")
    H = h.H
    return anchor_weights(k, H) * np.asarray(C) * p1 * params.rho3 / H - params.rho1 / H


def reformed_objective(d, Q, delta, k: int, I_k: float, lam, tt, tc, params: ModelParams) -> float:
    """Objective rewritten around anchor k using total balance.

    Agrees with ``evaluate_objective`` whenever sum(Q) == sum(lam) and the
    trajectory starts from I_k at day k.
    """
    H = len(lam)
    w = anchor_weights(k, H)
    delta = np.asarray(delta, dtype=float)
    benefit = params.rho3 / H * (H * I_k + lam.sum() / 2 + np.sum(w * (np.asarray(Q) - lam)))
    cost = (params.rho1 / H * np.sum(np.asarray(d) + delta * tt)
            + params.rho2 * I_k + np.sum(delta * tc) / H)
    return float(benefit - cost)


# ------------------------------------------------------- anchor routines

def _anchor_fill_linear(k0: int, act: np.ndarray, lam: np.ndarray, cap: np.ndarray, c: float):
    """Duration vector for anchor day k0 (0-based), or None if infeasible.

    Minimum-production start, backward push of overflow for time feasibility,
    then moves toward earlier (higher-slope) days. Constant rate c.
    """
    H = lam.shape[0]
    m = act.shape[0]
    d = np.zeros(H)
    cum = np.concatenate([[0.0], np.cumsum(np.concatenate([lam, lam]))])
    for i in range(m):
        nxt = act[i + 1] if i + 1 < m else act[0] + H
        d[act[i]] = (cum[nxt] - cum[act[i]]) / c
    l = int(np.searchsorted(act, k0))
    order = [(l - j) % m for j in range(1, m)]
    for u in order:
        t = act[u]
        over = d[t] - cap[t]
        if over > 0:
            d[act[(u - 1) % m]] += over
            d[t] = cap[t]
    if d[k0] - cap[k0] > FEAS_TOL * max(1.0, d[k0]):
        return None
    d[k0] = min(d[k0], cap[k0])
    for u in order:
        if u < l:
            checks = list(range(u - 1, -1, -1)) + list(range(m - 1, l - 1, -1))
        else:
            checks = list(range(u - 1, l - 1, -1))
        t = act[u]
        for j in checks:
            if d[t] <= 0:
                break
            tj = act[j]
            room = cap[tj] - d[tj]
            if room > 0:
                z = min(room, d[t])
                d[t] -= z
                d[tj] += z
    return d


def _anchor_fill_greedy(k0, act, lam, cap, C, spec: Piecewise, params: ModelParams):
    """Exact LP for anchor k0 with piecewise production, by slot greedy.

    Each (day, segment) slot is an item with capacity in production units and
    a per-unit value; prefix coverage makes the feasible set a base polytope,
    so filling items in value order subject to suffix bounds is optimal.
    """
    H = lam.shape[0]
    pos = (np.arange(H) - k0) % H
    L = np.cumsum(lam[(k0 + np.arange(H)) % H])
    total = L[-1]
    rem = np.concatenate([[total], total - L[:-1]])
    lo, hi = spec.segment_bounds()
    p = np.asarray(spec.slopes)
    items = []
    for t in act:
        for s in range(len(p)):
            width = min(hi[s], cap[t]) - lo[s]
            if width <= 0:
                break
            value = params.rho3 * (H - 1 - pos[t]) / H - params.rho1 / (H * C[t] * p[s])
            items.append((-value, int(t), s, width * C[t] * p[s]))
    items.sort()
    x = np.zeros(H)
    d = np.zeros(H)
    for _, t, s, qcap in items:
        j = pos[t] + 1
        amt = min(qcap, rem[:j].min())
        if amt > 0:
            rem[:j] -= amt
            x[t] += amt
            d[t] += amt / (C[t] * p[s])
    if total - x.sum() > FEAS_TOL * max(1.0, total):
        return None
    return d


def _trajectory_from_anchor(Q, lam, k0) -> InventoryTrajectory:
    H = lam.shape[0]
    order = (k0 + np.arange(H)) % H
    I = np.empty(H)
    I[order] = np.concatenate([[0.0], np.cumsum(Q[order] - lam[order])[:-1]])
    return InventoryTrajectory(I, Q)


def _result(prob: ConditionedProblem, d, k0, weeks=None, data=None, V=None) -> SolveResult:
    lam, C, _, _, _ = data or prob.day_data()
    Q = np.where(prob.delta == 1, C * prob.params.production.shape(d), 0.0)
    traj = _trajectory_from_anchor(Q, lam, k0)
    pat = ActivityPattern(prob.delta, d, np.where(prob.delta == 1, prob.loc, 0))
    if V is None:
        V = evaluate_objective(pat, traj, prob.inputs, prob.params, prob.horizon)
    degen = bool(np.any((prob.delta == 1) & (d <= 1e-12)))
    return SolveResult(pat, traj, V, weeks or prob.horizon.n_weeks, int(k0) + 1, degen)


def uses_linear_path(prob: ConditionedProblem, data=None) -> bool:
    spec = prob.params.production
    if not (isinstance(spec, Piecewise) and spec.is_linear):
        return False
    C = (data or prob.day_data())[1][prob.delta == 1]
    return bool((np.abs(C - C[0]) <= 1e-12 * abs(C[0])).all())


def anchor_solutions(prob: ConditionedProblem, data=None):
    """Yield (anchor_0based, durations or None) for every active day."""
    act = np.flatnonzero(prob.delta)
    lam, C, cap, _, _ = data or prob.day_data()
    spec = prob.params.production
    linear = uses_linear_path(prob, (lam, C, cap, None, None))
    for k0 in act:
        if linear:
            d = _anchor_fill_linear(int(k0), act, lam, cap, float(C[k0] * spec.p1))
        else:
            d = _anchor_fill_greedy(int(k0), act, lam, cap, C, spec, prob.params)
        yield int(k0), d


def solve_conditioned(prob: ConditionedProblem) -> SolveResult:
    """Optimal durations for fixed participation and locations.

    Raises InfeasibleError when no anchor admits a feasible allocation.
    """
    if not np.any(prob.delta):
        raise InfeasibleError("no participation day: total production cannot match consumption")
    spec = prob.params.production
    if isinstance(spec, CobbDouglas):
        from .oracle import oracle_gradient
        return oracle_gradient(prob)
    data = prob.day_data()
    lam, C, cap, tt, tc = data
    H = prob.H
    p = prob.params
    act = prob.delta == 1
    fixed = p.rho1 / H * np.sum(tt[act]) + np.sum(tc[act]) / H
    base = p.rho3 / H * lam.sum() / 2
    if uses_linear_path(prob, data):
        idx = np.flatnonzero(act)
        c = float(C[idx[0]] * spec.p1)
        v, k0, d, I = _linear_all_anchors(idx, lam, cap, c, p.rho1, p.rho3, FEAS_TOL)
        if k0 < 0:
            raise InfeasibleError("activity days cannot absorb the required production within free time")
        traj = InventoryTrajectory._trusted(I, np.where(act, c * d, 0.0))
        pat = ActivityPattern._trusted(prob.delta, d, np.where(act, prob.loc, 0))
        return SolveResult(pat, traj, float(v + base - fixed), prob.horizon.n_weeks, int(k0) + 1,
                           bool((act & (d <= 1e-12)).any()))
    best = None
    # anchors are ranked by the reformed objective with I_k = 0, which equals the evaluated
    # objective because the anchor trajectory has minimum 0; only the winner is materialized
    for k0, d in anchor_solutions(prob, data):
        if d is None:
            continue
        Q = np.where(act, C * spec.shape(d), 0.0)
        v = base + p.rho3 / H * anchor_weights(k0 + 1, H) @ (Q - lam) - p.rho1 / H * d.sum() - fixed
        if best is None or v > best[0]:
            best = (v, k0, d)
    if best is None:
        raise InfeasibleError("activity days cannot absorb the required production within free time")
    return _result(prob, best[2], best[1], data=data, V=float(best[0]))


# -------------------------------------------------------------- full DM

def enumerate_patterns(H: int):
    """All non-zero binary vectors of length H in lexicographic order."""
    return [np.array(p, dtype=np.int8) for p in itertools.product((0, 1), repeat=H) if any(p)]


def _candidates(inputs: ScenarioInputs, H: int, location_policy, loc):
    L = inputs.n_locations
    for delta in enumerate_patterns(H):
        if location_policy == "single":
            for j in range(L):
                yield delta, np.full(H, j)
        elif location_policy == "fixed":
            yield delta, np.asarray(loc)
        elif location_policy == "any":
            act = np.flatnonzero(delta)
            for combo in itertools.product(range(L), repeat=act.size):
                v = np.zeros(H, dtype=np.int64)
                v[act] = combo
                yield delta, v
        else:
            raise DomainError(f"unknown location policy {location_policy!r}")


def _try_solve(prob):
    try:
        return solve_conditioned(prob)
    except InfeasibleError:
        return None


def solve_full(inputs: ScenarioInputs, params: ModelParams, h: Horizon | None = None,
               location_policy: str = "single", loc=None, workers: int = 1) -> SolveResult:
    """Best (participation, location, duration) over all patterns.

    ``location_policy``: "single" (one location for every active day),
    "fixed" (use ``loc``) or "any" (every location vector; small cases only).
    Ties keep the lexicographically first pattern, then the lowest location.
    """
    h = h or Horizon(inputs.H)
    probs = [ConditionedProblem(dl, lc, inputs, params, h)
             for dl, lc in _candidates(inputs, h.H, location_policy, loc)]
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(_try_solve, probs))
    else:
        results = [_try_solve(p) for p in probs]
    best = None
    for res in results:
        if res is not None and (best is None or res.objective > best.objective):
            best = res
    if best is None:
        raise InfeasibleError("every participation pattern is infeasible")
    return best


def _replicated_horizon(base: Horizon, k: int) -> Horizon:
    wk = {d + 7 * w for w in range(k) for d in base.weekend_days}
    return Horizon(base.H * k, frozenset(wk))


def solve_multiweek(inputs: ScenarioInputs, params: ModelParams, base_week: Horizon | None = None,
                    *, delta=None, loc=None, location_policy: str = "single",
                    max_weeks: int = 8, workers: int = 1) -> SolveResult:
    """Extend the horizon week by week until the optimum is non-negative.

    With ``delta`` (and ``loc``) given, the weekly pattern is replicated and
    only durations are optimized; otherwise the full model is solved.
    """
    base = base_week or Horizon(inputs.H)
    if base.H != inputs.H:
        raise DomainError("base week and inputs disagree on H")
    last = None
    for k in range(1, max_weeks + 1):
        inp = inputs.replicate(k) if k > 1 else inputs
        h = _replicated_horizon(base, k)
        if delta is not None:
            prob = ConditionedProblem(np.tile(delta, k), np.tile(np.broadcast_to(loc, (base.H,)), k),
                                      inp, params, h)
            res = solve_conditioned(prob)
        else:
            res = solve_full(inp, params, h, location_policy, None if loc is None else np.tile(loc, k),
                             workers=workers)
        res = SolveResult(res.pattern, res.trajectory, res.objective, k, res.anchor, res.degenerate)
        if res.objective >= 0:
            return res
        last = res
    raise HorizonCapError(
        f"no non-negative horizon found within {max_weeks} weeks (last objective {last.objective:.6g})")
