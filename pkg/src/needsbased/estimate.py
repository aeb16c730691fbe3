"""Simulated maximum likelihood with Nelder-Mead, plus grid scans of the surface."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .empirical import PARAM_NAMES, Observations, PopulationParams, SimulatedLikelihood
from .errors import ConfigError, DomainError
from .zones import ZoneScenario

# transform kind per parameter: "log" for positive, "logit" for (0, 1), "id" otherwise
TRANSFORMS = {
    "p1": "log", "q1": "logit", "q2": "id", "gamma": "log", "mu": "log",
    "beta_RE": "log", "beta_Area": "log", "sigma_nest": "log", "sigma_dur": "log",
    "mu_rho1": "id", "mu_kappa": "id", "mu_q0": "id",
    "omega_rho1": "log", "omega_kappa": "log", "omega_q0": "log",
}


def to_internal(name: str, v: float) -> float:
    kind = TRANSFORMS[name]
    if kind == "log":
        if v <= 0:
            raise DomainError(f"{name} must be positive")
        return math.log(v)
    if kind == "logit":
        if not 0 < v < 1:
            raise DomainError(f"{name} must lie in (0, 1)")
        return math.log(v / (1 - v))
    return float(v)


def to_natural(name: str, x: float) -> float:
    kind = TRANSFORMS[name]
    if kind == "log":
        return math.exp(x)
    if kind == "logit":
        return 1.0 / (1.0 + math.exp(-x))
    return float(x)


def _check_free(free):
    free = list(free)
    bad = [n for n in free if n not in PARAM_NAMES]
    if bad:
        raise ConfigError(f"unknown parameter(s): {bad}; choose from {list(PARAM_NAMES)}")
    if len(set(free)) != len(free):
        raise ConfigError("duplicate free parameters")
    return free


@dataclass
class EstimationResult:
    estimates: PopulationParams
    loglik: float
    trace: list            # dicts: iteration, parameter values, loglik
    n_evals: int
    converged: bool


def maximize(data: Observations, init: PopulationParams, free_params, budget: int, R: int, seed: int,
             scenario: ZoneScenario, init_step: float = 0.1, likelihood: SimulatedLikelihood | None = None,
             **lik_kw) -> EstimationResult:
    """Nelder-Mead on transformed coordinates; ``budget`` caps simplex iterations.

    The starting simplex moves each free coordinate by ``init_step`` in the
    transformed space (10% for log-transformed parameters). One trace row per
    iteration records the best vertex.
    """
    free = _check_free(free_params)
    L = likelihood or SimulatedLikelihood(data, scenario, R, seed, **lik_kw)
    cache = {}

    def natural(x):
        return init.with_values(**{n: to_natural(n, v) for n, v in zip(free, x)})

    def loglik(x):
        key = tuple(np.asarray(x, float).tolist())
        if key not in cache:
            cache[key] = L(natural(x))
        return cache[key]

    x0 = np.array([to_internal(n, init.get(n)) for n in free])
    ll0 = loglik(x0)
    if not np.isfinite(ll0):
        per = L.raw_person_loglik(natural(x0))
        bad = np.flatnonzero(~np.isfinite(per))
        raise DomainError(f"log-likelihood at the initial point is not finite; "
                          f"persons {data.person_id[bad][:10].tolist()} have zero simulated probability")
    if not free:
        return EstimationResult(init, ll0, [], 1, True)

    trace = []

    def record(xk, *_):
        row = {"iteration": len(trace) + 1}
        row.update({n: to_natural(n, v) for n, v in zip(free, xk)})
        row["loglik"] = loglik(xk)
        trace.append(row)

    def objective(x):
        v = loglik(x)
        return -v if np.isfinite(v) else np.inf

    simplex = np.vstack([x0] + [x0 + init_step * e for e in np.eye(len(free))])
    # scipy counts the initial simplex as iteration 1, hence budget + 1
    res = minimize(objective, x0, method="Nelder-Mead", callback=record,
                   options={"maxiter": int(budget) + 1, "initial_simplex": simplex, "xatol": 1e-4, "fatol": 1e-6})
    best = res.x if np.isfinite(res.fun) else x0
    return EstimationResult(natural(best), loglik(best), trace, len(cache), bool(res.success))


@dataclass
class Surface:
    names: tuple
    grid1: np.ndarray
    grid2: np.ndarray
    values: np.ndarray       # (len(grid1), len(grid2))

    @property
    def argmax(self):
        v = np.where(np.isfinite(self.values), self.values, -np.inf)
        i, j = np.unravel_index(np.argmax(v), v.shape)
        return int(i), int(j)

    @property
    def argmax_point(self):
        i, j = self.argmax
        return float(self.grid1[i]), float(self.grid2[j])


def loglik_surface(data: Observations, base: PopulationParams, axis1, axis2, R: int, seed: int,
                   scenario: ZoneScenario, likelihood: SimulatedLikelihood | None = None, **lik_kw) -> Surface:
    """Log-likelihood over a 2-D grid with the same draws at every cell."""
    (n1, g1), (n2, g2) = axis1, axis2
    _check_free([n1, n2])
    g1 = np.asarray(g1, float)
    g2 = np.asarray(g2, float)
    if not (np.all(np.isfinite(g1)) and np.all(np.isfinite(g2))):
        raise DomainError("grid values must be finite")
    L = likelihood or SimulatedLikelihood(data, scenario, R, seed, **lik_kw)
    out = np.empty((g1.size, g2.size))
    for i, a in enumerate(g1):
        for j, b in enumerate(g2):
            out[i, j] = L(base.with_values(**{n1: a, n2: b}))
    return Surface((n1, n2), g1, g2, out)
