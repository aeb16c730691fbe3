"""Self-checks behind `needsbased verify`: solver vs oracles, slopes, invariants, densities."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .empirical import lognormal_density
from .errors import InfeasibleError
from .model import (ActivityPattern, CobbDouglas, InventoryTrajectory, Linear, ModelParams, Piecewise,
                    ScenarioInputs, consumption_vector, evaluate_objective)
from .oracle import grid_error_bound, grid_size, oracle_grid, oracle_gradient
from .pwl import fit_pwl_path
from .solver import ConditionedProblem, reformed_objective, slopes, solve_conditioned, solve_full

# base instance: weekday/weekend free time 2/6 hr, A = 100, one-way TT 0.5 hr and TC 5
BASE = dict(rho1=30.0, rho3=15.0, p1=0.5, A=100.0, tt1=0.5, tc1=5.0, ft_wd=2.0, ft_we=6.0)
GRID_STEPS = (1e-2, 2e-2, 5e-2, 0.1, 0.2, 0.5)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str
    timed: bool = False     # detail holds wall-clock numbers; kept out of the JSON report


    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def base_problem(delta, gamma=1.2, q0=0.0, q2=0.4, p1=None, **over) -> ConditionedProblem:
    b = dict(BASE, **over)
    params = ModelParams(gamma=gamma, rho1=b["rho1"], rho3=b["rho3"],
                         production=Linear(q0, b["p1"] if p1 is None else p1, q2))
    inp = ScenarioInputs.uniform(7, attractiveness=b["A"], travel_time_two_way=2 * b["tt1"],
                                 travel_cost_two_way=2 * b["tc1"], free_time_weekday=b["ft_wd"],
                                 free_time_weekend=b["ft_we"])
    return ConditionedProblem(np.asarray(delta), np.zeros(7, int), inp, params)


def random_instances(n: int, seed: int = 0, min_active: int = 1, accept=None):
    """Feasible random conditioned instances: gamma, q0, q2 over their swept ranges, random delta."""
    rng = np.random.default_rng([seed, 0x17])
    out = []
    while len(out) < n:
        delta = rng.integers(0, 2, 7)
        if delta.sum() < min_active:
            continue
        prob = base_problem(delta, gamma=rng.uniform(0.6, 1.4), q0=rng.uniform(-0.4, 0.4), q2=rng.uniform(0.2, 0.8))
        try:
            res = solve_conditioned(prob)
        except InfeasibleError:
            continue
        if accept is not None and not accept(prob):
            continue
        out.append((prob, res))
    return out


def pick_step(prob, max_points=2e5):
    """Finest grid step whose grid fits ``max_points``; None beyond 5 active days."""
    if int(prob.delta.sum()) > 5:
        return None
    for s in GRID_STEPS:
        if grid_size(prob, s) <= max_points:
            return s
    return None


def suite_solver(n: int = 200, seed: int = 0):
    """Solver against the gradient and grid oracles, plus the inventory invariants."""
    cases = random_instances(n, seed)
    t0 = time.perf_counter()
    worst_grad = 0.0
    grid_bad = 0
    grid_skipped = 0
    worst_imin = 0.0
    worst_bal = 0.0
    for prob, res in cases:
        ref = oracle_gradient(prob)
        worst_grad = max(worst_grad, abs(res.objective - ref.objective) / max(1.0, abs(ref.objective)))
        step = pick_step(prob)
        if step is None:
            grid_skipped += 1
        else:
            g = oracle_grid(prob, step=step, max_points=2e5)
            bound = grid_error_bound(prob, step)
            if g.objective > res.objective + 1e-9 or res.objective - g.objective > bound + 1e-9:
                grid_bad += 1
        lam = consumption_vector(prob.horizon, prob.params)
        worst_imin = max(worst_imin, abs(res.trajectory.I_min))
        worst_bal = max(worst_bal, abs(res.trajectory.Q.sum() - lam.sum()))
    dt = time.perf_counter() - t0
    return [
        Check("oracle_gradient agreement", worst_grad <= 1e-6, f"{len(cases)} instances, worst relative gap {worst_grad:.2e}"),
        Check("oracle_grid within bound", grid_bad == 0,
              f"{grid_bad} outside bound, {grid_skipped} skipped (grid too large)"),
        Check("safety stock is zero", worst_imin <= 1e-9, f"max |I_min| {worst_imin:.2e}"),
        Check("production balances consumption", worst_bal <= 1e-9, f"max |sum Q - sum lambda| {worst_bal:.2e}"),
        Check("runtime", dt < 30.0, f"{dt:.1f} s", timed=True),
    ]


def _interior(prob, res, rng):
    """An interior duration vector near the optimum (all active days strictly inside their caps)."""
    lam, C, cap, _, _ = prob.day_data()
    act = prob.delta == 1
    d = np.where(act, np.clip(res.pattern.d, 0.05 * cap, 0.95 * cap), 0.0)
    d = np.where(act, d * rng.uniform(0.9, 1.0, d.shape), 0.0)
    return d, C


def slope_checks(prob, res, rng, eps=1e-5):
    """Max gaps for one instance: FD of the reformed objective vs slope, balance-preserving
    pair FD vs slope difference, single-day FD of evaluate_objective vs slope + rho3*C*p1/H
    (the day's own production enters I + Q once more), and the raw single-day gap."""
    lam, C, cap, tt, tc = prob.day_data()
    p1 = prob.params.production.p1
    k = res.anchor
    h = prob.horizon
    H = h.H
    S = slopes(k, C, p1, prob.params, h)
    d, _ = _interior(prob, res, rng)
    act = np.flatnonzero(prob.delta == 1)

    def ref(dv):
        return reformed_objective(dv, C * p1 * dv, prob.delta, k, 0.0, lam, tt, tc, prob.params)

    def forward(dv):
        Q = C * p1 * dv
        order = (np.arange(H) + k - 1) % H
        I = np.zeros(H)
        run = 0.0
        for t in order:
            I[t] = run
            run += Q[t] - lam[t]
        pat = ActivityPattern(prob.delta, dv, prob.loc)
        return evaluate_objective(pat, InventoryTrajectory(I, Q), prob.inputs, prob.params, h)

    gap_ref = gap_pair = gap_off = gap_lit = 0.0
    own = prob.params.rho3 * C * p1 / H
    for t in act:
        e = np.zeros(H)
        e[t] = eps
        fd = (ref(d + e) - ref(d - e)) / (2 * eps)
        gap_ref = max(gap_ref, abs(fd - S[t]))
        fd_lit = (forward(d + e) - forward(d - e)) / (2 * eps)
        gap_lit = max(gap_lit, abs(fd_lit - S[t]))
        gap_off = max(gap_off, abs(fd_lit - S[t] - own[t]))
    for t in act:
        for s in act:
            if s == t:
                continue
            e = np.zeros(H)
            e[t] = eps
            e[s] = -eps * C[t] / C[s]
            fd = (forward(d + e) - forward(d - e)) / (2 * eps)
            gap_pair = max(gap_pair, abs(fd - (S[t] - S[s] * C[t] / C[s])))
    return gap_ref, gap_pair, gap_off, gap_lit


def suite_slopes(n: int = 50, seed: int = 0):
    rng = np.random.default_rng([seed, 0x510])
    cases = random_instances(n, seed + 1)
    g = np.array([slope_checks(p, r, rng) for p, r in cases])
    return [
        Check("slope = FD of reformed objective", g[:, 0].max() <= 1e-6, f"max gap {g[:, 0].max():.2e}"),
        Check("slope differences = balance-preserving FD", g[:, 1].max() <= 1e-6, f"max gap {g[:, 1].max():.2e}"),
        Check("slope + own-day term = FD of evaluate_objective", g[:, 2].max() <= 1e-6,
              f"max gap {g[:, 2].max():.2e} (raw slope gap {g[:, 3].max():.2e})"),
    ]


def suite_density(n: int = 20, seed: int = 0):
    rng = np.random.default_rng([seed, 0xDE])
    worst = 0.0
    for _ in range(n):
        dstar = rng.uniform(0.05, 8.0)
        sigma = rng.uniform(0.05, 1.0)
        # integrate in log space where the density is a plain normal
        val, _ = integrate.quad(lambda u: lognormal_density(np.exp(u), dstar, sigma) * np.exp(u),
                                np.log(dstar) - 40 * sigma, np.log(dstar) + 40 * sigma,
                                points=[np.log(dstar)], epsabs=1e-13, epsrel=1e-12, limit=200)
        worst = max(worst, abs(val - 1.0))
    return [Check("duration density integrates to 1", worst <= 1e-6, f"{n} cases, max |integral - 1| {worst:.2e}")]


def suite_speed(n: int = 50, seed: int = 0, repeat: int = 20):
    # the full 1e-2 grid must fit in memory-sized chunks; larger instances are skipped
    cases = random_instances(n, seed + 2, min_active=3, accept=lambda p: grid_size(p, 1e-2) <= 4e6)
    ratios = []
    for prob, _ in cases:
        t0 = time.perf_counter()
        for _ in range(repeat):
            solve_conditioned(prob)
        ts = (time.perf_counter() - t0) / repeat
        t0 = time.perf_counter()
        oracle_grid(prob, step=1e-2)
        tg = time.perf_counter() - t0
        ratios.append(tg / ts)
    med = float(np.median(ratios))
    return [Check("solver >= 100x faster than grid oracle", med >= 100, f"median speedup {med:.0f}x over {n}",
                  timed=True)]


SWEEP_GAMMA = (0.6, 0.8, 1.0, 1.2, 1.4)
SWEEP_Q0 = (-0.4, -0.2, 0.0, 0.2, 0.4)
SWEEP_Q2 = (0.2, 0.4, 0.6, 0.8)


def _weekly_metrics(res):
    act = res.pattern.delta == 1
    return np.array([res.pattern.d[act].mean(), act.sum(), res.objective])


def linearization_sweep(segments=(1, 3), q1=0.5, combos=None):
    """Piecewise/Cobb-Douglas ratios of (mean duration, participation days, objective).

    Base weekly instance, full solve over all patterns, one location. Returns
    {n_segments: (n_combos, 3) ratio array}. The fit depends only on q1, so
    one fit per segment count serves every combination.
    """
    inp = ScenarioInputs.uniform(7, attractiveness=BASE["A"], travel_time_two_way=2 * BASE["tt1"],
                                 travel_cost_two_way=2 * BASE["tc1"], free_time_weekday=BASE["ft_wd"],
                                 free_time_weekend=BASE["ft_we"])
    fits = {n: f for n, (f, _) in enumerate(fit_pwl_path(CobbDouglas(0.0, q1, 0.4), BASE["A"], max(segments)), 1)}
    if combos is None:
        combos = [(g, a, b) for g in SWEEP_GAMMA for a in SWEEP_Q0 for b in SWEEP_Q2]
    out = {n: [] for n in segments}
    for g, q0, q2 in combos:
        def solve(spec):
            return solve_full(inp, ModelParams(gamma=g, rho1=BASE["rho1"], rho3=BASE["rho3"], production=spec))
        ref = _weekly_metrics(solve(CobbDouglas(q0, q1, q2)))
        for n in segments:
            f = fits[n]
            out[n].append(_weekly_metrics(solve(Piecewise(q0, q2, f.slopes, f.breakpoints))) / ref)
    return {n: np.array(v) for n, v in out.items()}


def suite_pwl(seed: int = 0, combos=None):
    t0 = time.perf_counter()
    r = linearization_sweep((1, 3), combos=combos)
    dt = time.perf_counter() - t0
    m1, m3 = r[1].mean(axis=0), r[3].mean(axis=0)
    names = ("duration", "participation", "objective")
    checks = [Check(f"3-segment mean {k} ratio within 5%", abs(m3[i] - 1) <= 0.05,
                    f"{m3[i]:.4f} over {len(r[3])} combos (1 segment: {m1[i]:.4f})") for i, k in enumerate(names)]
    checks.append(Check("1 segment worse than 3 on objective", abs(m1[2] - 1) > abs(m3[2] - 1),
                        f"|1 - ratio| {abs(m1[2] - 1):.4f} vs {abs(m3[2] - 1):.4f}"))
    checks.append(Check("runtime", dt < 600, f"{dt:.0f} s", timed=True))
    return checks


SUITES = {"solver": suite_solver, "slopes": suite_slopes, "density": suite_density, "speed": suite_speed,
          "pwl": suite_pwl}


def run_suite(name: str, seed: int = 0):
    if name == "all":
        return [c for k in ("solver", "slopes", "density") for c in SUITES[k](seed=seed)]
    return SUITES[name](seed=seed)
