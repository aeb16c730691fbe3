"""Vectorized conditioned solves for weekly single-location patterns.

Covers the case used by the choice model: linear production, one location
for the whole week, free time and travel attributes constant by day type.
For an anchor day the optimal allocation fills active days in cyclic order
from the anchor up to their time caps, so each (pattern, anchor) reduces to
a short loop over positions. A compiled kernel does the work when numba
is importable; ``_evaluate_numpy`` is the array-only reference. Results match
``solver.solve_conditioned`` / ``solver.solve_multiweek`` exactly; the tests
check this.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

DEGENERATE_TOL = 1e-9   # hours; an active day at or below this is "unused"
FEAS_RTOL = 1e-10


def weekly_patterns() -> np.ndarray:
    """All 127 non-empty weekly participation vectors, lexicographic order."""
    return np.array([p for p in itertools.product((0, 1), repeat=7) if any(p)], dtype=np.int8)


@dataclass(frozen=True)
class _Group:
    """Precomputed orders for patterns sharing the same number of active days."""

    index: np.ndarray      # (G,) rows of the pattern matrix
    is_we: np.ndarray      # (G, m, M) position is a weekend day
    weight: np.ndarray     # (G, m, M) H-1-pos
    need: np.ndarray       # (G, m, M) consumption to cover through this position
    cal_day: np.ndarray    # (G, m, M) calendar day (0-based) of the position
    wlam: np.ndarray       # (G, m) sum_t w_t * lambda_t
    m: int


@lru_cache(maxsize=64)
def _plan(pattern_bytes: bytes, n_patterns: int, gamma: float, weeks: int):
    patterns = np.frombuffer(pattern_bytes, dtype=np.int8).reshape(n_patterns, 7)
    H = 7 * weeks
    day = np.arange(H)
    lam = np.where(day % 7 >= 5, gamma, 1.0)
    groups = []
    counts = patterns.sum(axis=1)
    for m in sorted(set(counts.tolist())):
        idx = np.flatnonzero(counts == m)
        M = m * weeks
        G = idx.size
        is_we = np.zeros((G, m, M), bool)
        weight = np.zeros((G, m, M))
        need = np.zeros((G, m, M))
        cal = np.zeros((G, m, M), np.int64)
        wlam = np.zeros((G, m))
        for g, pi in enumerate(idx):
            wk = np.flatnonzero(patterns[pi])
            act = np.concatenate([wk + 7 * w for w in range(weeks)])
            for a in range(m):
                k = wk[a]
                order = np.sort((act - k) % H)          # positions relative to anchor
                cal[g, a] = (order + k) % H
                is_we[g, a] = cal[g, a] % 7 >= 5
                weight[g, a] = H - 1 - order
                nxt = np.append(order[1:], H)
                cum = np.concatenate([[0.0], np.cumsum(lam[(k + np.arange(H)) % H])])
                need[g, a] = cum[nxt]
                w_all = H - 1 - (day - k) % H
                wlam[g, a] = np.sum(w_all * lam)
        groups.append(_Group(idx, is_we, weight, need, cal, wlam, m))
    return tuple(groups), float(lam.sum())


def _evaluate_numpy(c, cap_wd, cap_we, tt2, tc2, rho1, rho3, gamma, patterns=None,
                    weeks: int = 1, durations: bool = False):
    """Optimal conditioned objective for every scenario x pattern.

    All scenario arguments broadcast to shape (S,): ``c`` production per hour
    (C * p1), time caps on weekdays/weekends (free time minus two-way travel
    time, floored at 0), two-way travel time and cost, rho1, rho3.

    Returns ``V`` (S, P) with -inf for infeasible patterns, ``degenerate``
    (S, P) flagging patterns whose optimum leaves some active day of
    some week unused, and with ``durations`` the (S, P, 7*weeks) optima.
    """
    if patterns is None:
        patterns = weekly_patterns()
    patterns = np.ascontiguousarray(patterns, dtype=np.int8)
    c, cap_wd, cap_we, tt2, tc2, rho1, rho3 = np.broadcast_arrays(
        *[np.asarray(x, float) for x in (c, cap_wd, cap_we, tt2, tc2, rho1, rho3)])
    S = c.shape[0]
    P = patterns.shape[0]
    H = 7 * weeks
    groups, lam_total = _plan(patterns.tobytes(), P, float(gamma), int(weeks))
    V = np.full((S, P), -np.inf)
    degen = np.zeros((S, P), bool)
    D_out = np.zeros((S, P, H)) if durations else None
    D = lam_total / c                                   # hours needed in total
    for grp in groups:
        G, m, M = grp.is_we.shape
        bestV = np.full((S, G), -np.inf)
        bestD = np.zeros((S, G, M)) if durations else None
        bestA = np.zeros((S, G), np.int64)
        bestDeg = np.zeros((S, G), bool)
        n_act = M
        fixed = rho1 / H * n_act * tt2 + n_act * tc2 / H     # (S,)
        for a in range(m):
            cap = np.where(grp.is_we[None, :, a, :], cap_we[:, None, None], cap_wd[:, None, None])
            cum = np.cumsum(cap, axis=2)
            d = np.clip(D[:, None, None] - (cum - cap), 0.0, cap)
            prod_cum = c[:, None, None] * np.minimum(cum, D[:, None, None])
            ok = np.all(prod_cum >= grp.need[None, :, a, :] * (1 - FEAS_RTOL) - 1e-12, axis=2)
            val = (rho3[:, None] / H * (lam_total / 2 + c[:, None] * np.einsum("sgm,gm->sg", d, grp.weight[:, a, :])
                                         - grp.wlam[None, :, a])
                   - rho1[:, None] / H * d.sum(axis=2) - fixed[:, None])
            val = np.where(ok, val, -np.inf)
            dg = np.any(d <= DEGENERATE_TOL, axis=2)
            better = val > bestV
            bestV = np.where(better, val, bestV)
            bestDeg = np.where(better, dg, bestDeg)
            bestA = np.where(better, a, bestA)
            if durations:
                bestD = np.where(better[:, :, None], d, bestD)
        V[:, grp.index] = bestV
        degen[:, grp.index] = bestDeg & np.isfinite(bestV)
        if durations:
            cal = grp.cal_day[np.arange(G)[None, :], bestA]               # (S, G, M)
            out = np.zeros((S, G, H))
            np.put_along_axis(out, cal, bestD, axis=2)
            D_out[:, grp.index] = out
    if durations:
        return V, degen, D_out
    return V, degen


@lru_cache(maxsize=64)
def _flat_plan(pattern_bytes: bytes, n_patterns: int, gamma: float, weeks: int):
    """Same plan laid out as flat arrays, one entry per (pattern, anchor)."""
    groups, lam_total = _plan(pattern_bytes, n_patterns, gamma, weeks)
    combos = []
    for grp in groups:
        for g, pi in enumerate(grp.index):
            for a in range(grp.m):
                combos.append((pi, a, grp, g))
    combos.sort(key=lambda x: (x[0], x[1]))
    pat, mm, off, ln, wl = [], [], [], [], []
    is_we, weight, need, cal = [], [], [], []
    cursor = 0
    for pi, a, grp, g in combos:
        M = grp.is_we.shape[2]
        pat.append(pi); mm.append(grp.m); off.append(cursor); ln.append(M); wl.append(grp.wlam[g, a])
        is_we.append(grp.is_we[g, a]); weight.append(grp.weight[g, a]); need.append(grp.need[g, a])
        cal.append(grp.cal_day[g, a])
        cursor += M
    i64 = lambda x: np.ascontiguousarray(x, np.int64)
    return dict(pat=i64(pat), m=i64(mm), off=i64(off), len=i64(ln), wlam=np.array(wl),
                is_we=np.concatenate(is_we), weight=np.concatenate(weight), need=np.concatenate(need),
                cal=i64(np.concatenate(cal)), lam_total=lam_total)


try:
    import warnings
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*TBB.*")
        import numba
        from numba import njit, prange
    # the bundled TBB is often too old; prefer OpenMP and avoid the launch-time warning
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:      # pragma: no cover
    numba = None

if numba is not None:
    @njit(cache=True, parallel=True)
    def _kernel(c, cap_wd, cap_we, tt2, tc2, rho1, rho3, lam_total, H, n_pat,
                cpat, coff, clen, wlam, is_we, weight, need, mask, V, degen, best):
        S = c.shape[0]
        n_combo = cpat.shape[0]
        for s in prange(S):
            D = lam_total / c[s]
            for p in range(n_pat):
                V[s, p] = -np.inf
                degen[s, p] = False
                best[s, p] = -1
            for q in range(n_combo):
                p = cpat[q]
                if not mask[s, p]:
                    continue
                o = coff[q]
                M = clen[q]
                dg = False
                cum = 0.0
                wsum = 0.0
                dsum = 0.0
                ok = True
                for i in range(M):
                    cap = cap_we[s] if is_we[o + i] else cap_wd[s]
                    d = D - cum
                    if d > cap:
                        d = cap
                    if d < 0.0:
                        d = 0.0
                    cum += cap
                    prod = c[s] * (cum if cum < D else D)
                    if prod < need[o + i] * (1.0 - FEAS_RTOL) - 1e-12:
                        ok = False
                        break
                    wsum += weight[o + i] * d
                    dsum += d
                    if d <= DEGENERATE_TOL:
                        dg = True
                if not ok:
                    continue
                val = (rho3[s] / H * (lam_total / 2.0 + c[s] * wsum - wlam[q])
                       - rho1[s] / H * dsum - (rho1[s] / H * M * tt2[s] + M * tc2[s] / H))
                if val > V[s, p]:
                    V[s, p] = val
                    best[s, p] = q
                    degen[s, p] = dg

    @njit(cache=True)
    def _fill_durations(c, cap_wd, cap_we, lam_total, best, coff, clen, is_we, cal, out):
        S, P = best.shape
        for s in range(S):
            D = lam_total / c[s]
            for p in range(P):
                q = best[s, p]
                if q < 0:
                    continue
                o = coff[q]
                cum = 0.0
                for i in range(clen[q]):
                    cap = cap_we[s] if is_we[o + i] else cap_wd[s]
                    d = D - cum
                    if d > cap:
                        d = cap
                    if d < 0.0:
                        d = 0.0
                    cum += cap
                    out[s, p, cal[o + i]] = d


def set_threads(n: int | None):
    """Cap the worker threads of the compiled kernel (None leaves the default)."""
    if numba is not None and n:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def evaluate_patterns(c, cap_wd, cap_we, tt2, tc2, rho1, rho3, gamma, patterns=None,
                      weeks: int = 1, durations: bool = False, engine: str | None = None, mask=None):
    """Optimal conditioned objective for every scenario x pattern.

    All scenario arguments broadcast to shape (S,): ``c`` production per hour
    (C * p1), time caps on weekdays/weekends (free time minus two-way travel
    time, floored at 0), two-way travel time and cost, rho1, rho3.

    Returns ``V`` (S, P) with -inf for infeasible patterns, ``degenerate``
    (S, P) flagging patterns whose optimum leaves some active day of
    some week unused, and with ``durations`` the (S, P, 7*weeks) optima.
    ``engine`` is "numba" (default when available) or "numpy". An (S, P)
    boolean ``mask`` restricts the work to selected entries (others -inf).
    """
    engine = engine or ("numba" if numba is not None else "numpy")
    if engine == "numpy":
        out = _evaluate_numpy(c, cap_wd, cap_we, tt2, tc2, rho1, rho3, gamma, patterns, weeks, durations)
        if mask is not None:
            out[0][~np.asarray(mask, bool)] = -np.inf
            out[1][~np.asarray(mask, bool)] = False
        return out
    if patterns is None:
        patterns = weekly_patterns()
    patterns = np.ascontiguousarray(patterns, dtype=np.int8)
    arrs = [np.ascontiguousarray(x, dtype=float) for x in np.broadcast_arrays(
        *[np.asarray(x, float) for x in (c, cap_wd, cap_we, tt2, tc2, rho1, rho3)])]
    S, P = arrs[0].shape[0], patterns.shape[0]
    plan = _flat_plan(patterns.tobytes(), P, float(gamma), int(weeks))
    V = np.empty((S, P))
    degen = np.empty((S, P), np.bool_)
    best = np.empty((S, P), np.int64)
    mask = np.ones((S, P), np.bool_) if mask is None else np.ascontiguousarray(mask, np.bool_)
    _kernel(*arrs, plan["lam_total"], float(7 * weeks), P, plan["pat"], plan["off"],
            plan["len"], plan["wlam"], plan["is_we"], plan["weight"], plan["need"],
            mask, V, degen, best)
    if not durations:
        return V, degen
    out = np.zeros((S, P, 7 * weeks))
    _fill_durations(arrs[0], arrs[1], arrs[2], plan["lam_total"], best, plan["off"], plan["len"],
                    plan["is_we"], plan["cal"], out)
    return V, degen, out


def evaluate_multiweek(c, cap_wd, cap_we, tt2, tc2, rho1, rho3, gamma, patterns=None,
                       max_weeks: int = 8, engine: str | None = None):
    """Weekly-replicated conditioned solves, extended until V >= 0.

    Returns ``V`` (S, P) at the first non-negative horizon, ``weeks`` (S, P)
    and ``usable`` (S, P): feasible, non-degenerate and non-negative within
    ``max_weeks``.
    """
    if patterns is None:
        patterns = weekly_patterns()
    args = np.broadcast_arrays(*[np.asarray(x, float) for x in (c, cap_wd, cap_we, tt2, tc2, rho1, rho3)])
    V, degen = evaluate_patterns(*args, gamma, patterns, weeks=1, engine=engine)
    weeks = np.ones(V.shape, np.int64)
    pending = np.isfinite(V) & (V < 0)
    for k in range(2, max_weeks + 1):
        rows = np.flatnonzero(pending.any(axis=1))
        if rows.size == 0:
            break
        sub = [x[rows] for x in args]
        msk = pending[rows]
        v, dg = evaluate_patterns(*sub, gamma, patterns, weeks=k, engine=engine, mask=msk)
        r, p = np.nonzero(msk)
        V[rows[r], p] = v[r, p]
        degen[rows[r], p] = dg[r, p]
        weeks[rows[r], p] = k
        pending = np.isfinite(V) & (V < 0)
    usable = np.isfinite(V) & (V >= 0) & ~degen
    return V, weeks, usable


def solve_pattern_multiweek(c, cap_wd, cap_we, tt2, tc2, rho1, rho3, gamma, pattern, max_weeks: int = 8):
    """One weekly pattern per scenario row; durations padded with NaN.

    ``pattern`` is (7,) or (S, 7). Returns V (S,), weeks (S,), usable (S,)
    and durations (S, 7*max_weeks).
    """
    args = np.broadcast_arrays(*[np.asarray(x, float) for x in (c, cap_wd, cap_we, tt2, tc2, rho1, rho3)])
    S = args[0].shape[0]
    pat = np.broadcast_to(np.asarray(pattern, np.int8), (S, 7))
    V = np.full(S, -np.inf)
    weeks = np.ones(S, np.int64)
    degen = np.zeros(S, bool)
    dur = np.full((S, 7 * max_weeks), np.nan)
    uniq, inv = np.unique(pat, axis=0, return_inverse=True)
    inv = np.ravel(inv)
    for u in range(uniq.shape[0]):
        rows = np.flatnonzero(inv == u)
        for k in range(1, max_weeks + 1):
            if rows.size == 0:
                break
            sub = [x[rows] for x in args]
            v, dg, d = evaluate_patterns(*sub, gamma, uniq[u:u + 1], weeks=k, durations=True)
            V[rows] = v[:, 0]
            degen[rows] = dg[:, 0]
            weeks[rows] = k
            dur[rows, :7 * k] = d[:, 0]
            dur[rows, 7 * k:] = np.nan
            rows = rows[np.isfinite(v[:, 0]) & (v[:, 0] < 0)]
    usable = np.isfinite(V) & (V >= 0) & ~degen
    return V, weeks, usable, dur
