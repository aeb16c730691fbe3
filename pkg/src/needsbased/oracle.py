"""Slow reference solvers for verification.

Nothing here is used on the likelihood path. ``oracle_grid`` enumerates
durations on a grid, ``oracle_gradient`` runs projected-gradient ascent per
anchor with an exact Euclidean projection, ``oracle_full_tiny`` brute-forces
whole patterns on toy instances.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .errors import DomainError, InfeasibleError
from .model import (
    ActivityPattern,
    CobbDouglas,
    Horizon,
    InventoryTrajectory,
    Piecewise,
    SolveResult,
    _day_attr,
    consumption_vector,
    evaluate_objective,
)
from .solver import ConditionedProblem, _candidates


class OracleScaleError(DomainError):
    """Problem too large for an exhaustive oracle."""


# ------------------------------------------------------------ projection

def _ldp(G, hp):
    """min |z| s.t. G z >= hp via NNLS; None if infeasible."""
    scale = np.max(np.abs(hp))
    n = G.shape[1]
    E = np.vstack([G.T, hp[None, :] / scale])
    f = np.zeros(n + 1)
    f[-1] = 1.0
    u, _ = nnls(E, f, maxiter=50 * E.shape[1])
    r = E @ u - f
    if np.linalg.norm(r) < 1e-12 or abs(r[-1]) < 1e-14:
        return None
    return -r[:n] / r[-1] * scale


def _polish(y, x, G, h, tol):
    """Re-solve the projection exactly on the active set found by LDP."""
    act = np.flatnonzero(G @ x - h <= tol)
    if act.size == 0:
        return x
    A = G[act]
    # KKT: x = y + A^T mu, A x = h_act
    mu, *_ = np.linalg.lstsq(A @ A.T, h[act] - A @ y, rcond=None)
    xp = y + A.T @ mu
    if np.min(G @ xp - h) >= -tol and np.linalg.norm(xp - y) <= np.linalg.norm(x - y) + tol:
        return xp
    return x


def project_polytope(y, G, h, tol=1e-11):
    """Euclidean projection of y onto {x : G x >= h}.

    Least-distance programming through NNLS (Lawson and Hanson): with
    z = x - y the problem is min |z| s.t. G z >= h - G y. The answer is then
    refined on its active set. Returns None when the polytope is empty.
    """
    hp = h - G @ y
    if np.all(hp <= 0):
        return y.copy()
    z = _ldp(G, hp)
    if z is None:
        return None
    scale = max(1.0, np.max(np.abs(h)), np.max(np.abs(y)))
    return _polish(y, y + z, G, h, 1e-9 * scale)


@dataclass
class _AnchorProgram:
    """max f(z) over {0 <= z <= u, sum z = total, prefix sums >= L}."""

    G: np.ndarray
    h: np.ndarray
    value: callable
    grad: callable
    n: int

    def project(self, y):
        return project_polytope(y, self.G, self.h)

    def residual(self, x):
        p = self.project(x + self.grad(x))
        return np.inf if p is None else float(np.linalg.norm(x - p))


def _build_program(prob: ConditionedProblem, k0: int):
    """Anchor-k0 program in lifted variables (slot production or Q)."""
    lam, C, cap, tt, tc = prob.day_data()
    H = prob.H
    params = prob.params
    spec = params.production
    act = np.flatnonzero(prob.delta)
    order = (k0 + np.arange(H)) % H
    pos = np.empty(H, dtype=int)
    pos[order] = np.arange(H)
    # trajectory operator: I = M (Q - lam) in rotated order, I at anchor = 0
    M = np.tril(np.ones((H, H)), -1)
    Mcal = np.zeros((H, H))
    Mcal[np.ix_(order, order)] = M
    benefit_grad_Q = params.rho3 / H * (Mcal.sum(axis=0) + 1.0)
    fixed_cost = params.rho1 / H * np.sum(prob.delta * tt) + np.sum(prob.delta * tc) / H

    if isinstance(spec, Piecewise):
        lo, hi = spec.segment_bounds()
        slots = []   # (day, segment, capacity in production units, production per hour)
        for t in act:
            for s, p in enumerate(spec.slopes):
                w = min(hi[s], cap[t]) - lo[s]
                if w > 0:
                    slots.append((t, s, w * C[t] * p, C[t] * p))
        n = len(slots)
        day_of = np.array([s[0] for s in slots], dtype=int)
        ucap = np.array([s[2] for s in slots])
        rate = np.array([s[3] for s in slots])
        S = np.zeros((H, n))
        S[day_of, np.arange(n)] = 1.0

        def to_Q(z):
            return S @ z

        def to_d(z):
            return S @ (z / rate)

        def value(z):
            Q = to_Q(z)
            I = Mcal @ (Q - lam)
            return params.rho3 / H * np.sum(I + Q - lam / 2) - params.rho1 / H * np.sum(to_d(z)) - fixed_cost

        def grad(z):
            return S.T @ benefit_grad_Q - params.rho1 / H / rate
    else:
        n = act.size
        day_of = act
        rate = C[act]
        ucap = rate * np.power(cap[act], spec.q1)
        inv = 1.0 / spec.q1
        S = np.zeros((H, n))
        S[day_of, np.arange(n)] = 1.0

        def to_Q(z):
            return S @ z

        def to_d(z):
            return S @ np.power(np.maximum(z, 0.0) / rate, inv)

        def value(z):
            Q = to_Q(z)
            I = Mcal @ (Q - lam)
            return params.rho3 / H * np.sum(I + Q - lam / 2) - params.rho1 / H * np.sum(to_d(z)) - fixed_cost

        def grad(z):
            dd = inv * np.power(np.maximum(z, 0.0) / rate, inv - 1.0) / rate
            return S.T @ benefit_grad_Q - params.rho1 / H * dd

    total = lam.sum()
    rows, rhs = [], []
    rows.append(np.eye(n)); rhs.append(np.zeros(n))
    rows.append(-np.eye(n)); rhs.append(-ucap)
    rows.append(np.ones((1, n))); rhs.append([total])
    rows.append(-np.ones((1, n))); rhs.append([-total])
    Lcum = np.cumsum(lam[order])
    slot_pos = pos[day_of]
    for j in np.unique(slot_pos):
        # production up to and including position j covers consumption up to
        # the day before the next production position
        nxt = slot_pos[slot_pos > j]
        last = (nxt.min() - 1) if nxt.size else H - 1
        if last == H - 1:
            continue
        rows.append((slot_pos <= j).astype(float)[None, :]); rhs.append([Lcum[last]])
    G = np.vstack(rows)
    h = np.concatenate([np.ravel(r) for r in rhs])
    prog = _AnchorProgram(G, h, value, grad, n)
    prog.to_Q = to_Q
    prog.to_d = to_d
    prog.ucap = ucap
    prog.total = total
    return prog


def _ascend(prog: _AnchorProgram, tol: float, max_iter: int):
    x = prog.project(np.full(prog.n, prog.total / max(prog.n, 1)))
    if x is None:
        return None, np.inf
    fx = prog.value(x)
    step = 1.0
    flat = 0
    for _ in range(max_iter):
        g = prog.grad(x)
        p = prog.project(x + g)
        if p is not None and np.linalg.norm(x - p) < tol:
            break
        accepted = False
        while step > 1e-14:
            y = prog.project(x + step * g)
            if y is None:
                # NNLS can break down on a badly scaled trial point; shrink and retry
                step *= 0.5
                continue
            fy = prog.value(y)
            # Armijo on the gradient mapping
            if fy >= fx + 1e-4 * np.dot(g, y - x) - 1e-15 * abs(fx):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        moved = np.linalg.norm(y - x)
        # long runs of negligible gains happen when the optimum sits on a d = 0 face
        flat = flat + 1 if fy - fx <= 1e-14 * max(1.0, abs(fx)) else 0
        x, fx = y, fy
        step *= 2.0
        if moved < 1e-15 or flat >= 200:
            break
    return x, prog.residual(x)


def oracle_gradient(prob: ConditionedProblem, tol: float = 1e-8, max_iter: int = 20000,
                    return_residual: bool = False):
    """Projected-gradient maximization of the conditioned problem.

    Runs one concave program per anchor day; returns the best. With
    ``return_residual`` also returns the gradient-mapping norm at the optimum.
    """
    spec = prob.params.production
    if isinstance(spec, CobbDouglas):
        if not 0 < spec.q1 < 1:
            raise DomainError("production must be concave")
    elif not isinstance(spec, Piecewise):
        raise DomainError("unsupported production spec")
    if not np.any(prob.delta):
        raise InfeasibleError("no participation day")
    lam = consumption_vector(prob.horizon, prob.params)
    best, best_res = None, np.inf
    for k0 in np.flatnonzero(prob.delta):
        prog = _build_program(prob, int(k0))
        if prog.ucap.sum() < prog.total * (1 - 1e-12):
            continue
        x, res = _ascend(prog, tol, max_iter)
        if x is None:
            continue
        x = np.clip(x, 0.0, prog.ucap)
        d = prog.to_d(x)
        Q = prog.to_Q(x)
        order = (k0 + np.arange(prob.H)) % prob.H
        I = np.empty(prob.H)
        I[order] = np.concatenate([[0.0], np.cumsum(Q[order] - lam[order])[:-1]])
        if I.min() < -1e-7 * lam.sum():
            continue
        pat = ActivityPattern(prob.delta, d, np.where(prob.delta == 1, prob.loc, 0))
        traj = InventoryTrajectory(I - min(I.min(), 0.0), Q)
        V = evaluate_objective(pat, traj, prob.inputs, prob.params, prob.horizon)
        if best is None or V > best.objective:
            best = SolveResult(pat, traj, V, prob.horizon.n_weeks, int(k0) + 1,
                               bool(np.any((prob.delta == 1) & (d <= 1e-12))))
            best_res = res
    if best is None:
        raise InfeasibleError("no feasible anchor")
    return (best, best_res) if return_residual else best


# ------------------------------------------------------------------ grid

def grid_error_bound(prob: ConditionedProblem, step: float) -> float:
    """Objective error bound of oracle_grid: step * (rho1 + rho3 * max C * p1)."""
    spec = prob.params.production
    C = spec.constant(_day_attr(prob.inputs.attractiveness, prob.loc))
    p1 = spec.p1 if isinstance(spec, Piecewise) else 1.0
    return step * (prob.params.rho1 + prob.params.rho3 * float(C.max()) * p1)


def _axis(cap_t, step):
    g = np.arange(0.0, cap_t + 1e-12, step)
    if g.size == 0 or cap_t - g[-1] > 1e-12:
        g = np.append(g, cap_t)
    return g


def grid_size(prob: ConditionedProblem, step: float) -> int:
    """Number of grid points summed over the choice of balance-pinned day."""
    _, _, cap, _, _ = prob.day_data()
    act = np.flatnonzero(prob.delta)
    sizes = [np.floor(cap[t] / step) + 2 for t in act]
    return int(sum(np.prod(sizes[:i] + sizes[i + 1:]) for i in range(len(act))))


def oracle_grid(prob: ConditionedProblem, step: float = 1e-2, max_points: float = 4e6,
                chunk: int = 200_000) -> SolveResult:
    """Exhaustive duration grid with one balance-pinned day.

    All active days but one run over {0, step, ..., cap} (cap included);
    the remaining day takes whatever production total balance requires.
    Every active day takes a turn as the pinned one. The trajectory of each
    candidate is anchored at its minimum.
    """
    if step <= 0:
        raise DomainError("step must be positive")
    act = np.flatnonzero(prob.delta)
    if act.size == 0:
        raise InfeasibleError("no participation day")
    if act.size > 5:
        raise OracleScaleError("oracle_grid handles at most 5 active days")
    n_points = grid_size(prob, step)
    if n_points > max_points:
        raise OracleScaleError(f"grid of {n_points} points exceeds max_points={max_points:g}")
    lam, C, cap, tt, tc = prob.day_data()
    spec = prob.params.production
    params = prob.params
    H = prob.H
    total = lam.sum()
    fixed = params.rho1 / H * np.sum(prob.delta * tt) + np.sum(prob.delta * tc) / H
    best_v, best_d, best_q = -np.inf, None, None
    for pin in act:
        free = [t for t in act if t != pin]
        axes = [_axis(cap[t], step) for t in free]
        if free:
            mesh = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(free))
        else:
            mesh = np.zeros((1, 0))
        for s in range(0, mesh.shape[0], chunk):
            D = np.zeros((min(chunk, mesh.shape[0] - s), H))
            D[:, free] = mesh[s:s + chunk]
            Qf = C[free] * spec.shape(D[:, free])
            need = total - Qf.sum(axis=1)
            dpin = spec.inverse_shape(np.maximum(need, 0.0) / C[pin])
            ok = (need >= -1e-12) & (dpin <= cap[pin] + 1e-12)
            if not np.any(ok):
                continue
            D = D[ok]
            D[:, pin] = np.minimum(dpin[ok], cap[pin])
            Q = np.zeros_like(D)
            Q[:, free] = Qf[ok]
            Q[:, pin] = need[ok]
            Sx = np.concatenate([np.zeros((D.shape[0], 1)), np.cumsum(Q - lam, axis=1)[:, :-1]], axis=1)
            I = Sx - Sx.min(axis=1, keepdims=True)
            V = params.rho3 / H * np.sum(I + Q - lam / 2, axis=1) - params.rho1 / H * D.sum(axis=1) - fixed
            i = int(np.argmax(V))
            if V[i] > best_v:
                best_v, best_d, best_q = V[i], D[i].copy(), Q[i].copy()
    if best_d is None:
        raise InfeasibleError("no grid point satisfies total balance within the time caps")
    Sx = np.concatenate([[0.0], np.cumsum(best_q - lam)[:-1]])
    traj = InventoryTrajectory(Sx - Sx.min(), best_q)
    pat = ActivityPattern(prob.delta, best_d, np.where(prob.delta == 1, prob.loc, 0))
    V = evaluate_objective(pat, traj, prob.inputs, params, prob.horizon)
    return SolveResult(pat, traj, V, prob.horizon.n_weeks, int(np.argmin(Sx)) + 1,
                       bool(np.any((prob.delta == 1) & (best_d <= 1e-12))))


def oracle_full_tiny(inputs, params, h: Horizon | None = None, location_policy: str = "any",
                     step: float = 1e-2) -> SolveResult:
    """Brute force over every pattern and location vector, grid durations."""
    h = h or Horizon(inputs.H)
    if h.H > 4 or inputs.n_locations > 3:
        raise OracleScaleError("oracle_full_tiny needs H <= 4 and at most 3 locations")
    best = None
    for delta, loc in _candidates(inputs, h.H, location_policy, None):
        try:
            res = oracle_grid(ConditionedProblem(delta, loc, inputs, params, h), step)
        except InfeasibleError:
            continue
        if best is None or res.objective > best.objective:
            best = res
    if best is None:
        raise InfeasibleError("every pattern is infeasible")
    return best
