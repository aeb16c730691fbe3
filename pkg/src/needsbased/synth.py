"""Monte Carlo zones, persons and observed weekly activity patterns."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .batch import DEGENERATE_TOL
from .empirical import (N_PATTERNS, PATTERNS, Observations, PopulationParams, alternative_values,
                        observed_optima, transform_random)
from .errors import DomainError
from .zones import ZoneScenario

TC_PER_HOUR = 12.8


def travel_time_steps(rng, n_zones: int):
    """The three travel-time steps: raw draws, symmetrized, perturbed."""
    raw = rng.uniform(5 / 60, 1.0, (n_zones, n_zones))
    sym = np.triu(raw) + np.triu(raw, 1).T
    final = sym * rng.uniform(0.9, 1.1, (n_zones, n_zones))
    return raw, sym, final


def generate_scenario(n_zones: int = 10, seed: int = 0) -> ZoneScenario:
    if n_zones < 1:
        raise DomainError("need at least one zone")
    rng = np.random.default_rng([int(seed), 0x2C])
    retail = rng.uniform(50, 100, n_zones)
    area = rng.uniform(0.1, 2.0, n_zones)
    _, _, TT = travel_time_steps(rng, n_zones)
    TC = TT * rng.uniform(0.9, 1.1, (n_zones, n_zones)) * TC_PER_HOUR
    return ZoneScenario(tuple(f"z{j}" for j in range(n_zones)), retail / area, TT, TC,
                        np.column_stack([retail, area]), ("RE", "Area"))


@dataclass(frozen=True)
class Population:
    person_id: np.ndarray
    home: np.ndarray
    ft_wd: np.ndarray
    ft_we: np.ndarray

    def __len__(self):
        return int(self.person_id.shape[0])


def generate_population(n_persons: int, scenario: ZoneScenario, seed: int = 0) -> Population:
    """Free time by day type from logistic transforms; uniform home zone."""
    rng = np.random.default_rng([int(seed), 0xF7])
    ft_wd = 8.0 / (1 + np.exp(rng.normal(1.0, 0.5, n_persons)))
    ft_we = 16.0 / (1 + np.exp(rng.normal(0.8, 0.4, n_persons)))
    home = rng.integers(0, scenario.n_zones, n_persons)
    return Population(np.arange(n_persons, dtype=np.int64), home, ft_wd, ft_we)


@dataclass(frozen=True)
class SynthResult:
    observations: Observations
    population: Population
    chosen: np.ndarray        # chosen universe alternative per included person
    weeks: np.ndarray         # K* of the chosen alternative
    excluded: np.ndarray      # person ids dropped (no feasible alternative / empty observed week)


def simulate_patterns(population: Population, scenario: ZoneScenario, pop: PopulationParams,
                      seed: int = 0, max_weeks: int = 8, chunk: int = 2000) -> SynthResult:
    """Gumbel-max choice per person, then one observed week with noisy durations.

    Every random quantity of person n comes from its own generator keyed by
    (seed, person id), so output does not depend on chunking or threads.
    """
    xi = pop.xi
    J = scenario.n_zones
    N = len(population)
    U_size = J * N_PATTERNS
    z = np.empty((N, 3 + J))
    gum = np.empty((N, U_size))
    u_week = np.empty(N)
    nu = np.empty((N, 7))
    for i, pid in enumerate(population.person_id):
        rng = np.random.default_rng([int(seed), int(pid), 0x51])
        z[i] = rng.standard_normal(3 + J)
        gum[i] = rng.gumbel(0.0, 1.0, U_size)
        u_week[i] = rng.random()
        nu[i] = rng.standard_normal(7)
    zeta = np.asarray(pop.mu_D) + np.sqrt(np.asarray(pop.omega_D)) * z[:, :3]
    rho1, rho3, q0 = transform_random(zeta, population.ft_wd, population.ft_we)
    eta = xi.sigma_nest * z[:, 3:]
    lnM = scenario.log_size(xi.beta) if xi.use_size else np.zeros(J)

    chosen = np.full(N, -1, np.int64)
    for a in range(0, N, chunk):
        s = slice(a, min(N, a + chunk))
        V, usable = alternative_values(xi, scenario, population.home[s], population.ft_wd[s],
                                       population.ft_we[s], rho1[s], rho3[s], q0[s], max_weeks)
        U = np.where(usable, V, -np.inf) + lnM[None, :, None] + eta[s][:, :, None]
        # argmax of U + Gumbel(0, 1/mu) == argmax of mu*U + Gumbel(0, 1)
        score = xi.mu * U.reshape(-1, U_size) + gum[s]
        ok = np.isfinite(score).any(axis=1)
        chosen[s] = np.where(ok, np.argmax(np.where(np.isfinite(score), score, -np.inf), axis=1), -1)

    has = chosen >= 0
    loc = np.where(has, chosen // N_PATTERNS, 0)
    pat = PATTERNS[np.where(has, chosen % N_PATTERNS, 0)]
    dur, weeks, okd = observed_optima(xi, scenario, population.home, loc, pat, population.ft_wd,
                                      population.ft_we, rho1, rho3, q0, max_weeks)
    weeks = np.where(has, weeks, 1)
    wk = np.minimum((u_week * weeks).astype(np.int64), weeks - 1)
    dstar = np.take_along_axis(dur.reshape(N, max_weeks, 7), wk[:, None, None], axis=1)[:, 0]
    dstar = np.nan_to_num(dstar, nan=0.0)
    delta = ((dstar > DEGENERATE_TOL) & has[:, None]).astype(np.int8)
    d = np.where(delta == 1, dstar * np.exp(xi.sigma_dur * nu), 0.0)
    keep = has & okd & delta.any(axis=1)
    if not np.all(keep):
        n_inf = int(np.sum(~has))
        n_empty = int(np.sum(has & ~keep))
        warnings.warn(f"excluded {n_inf} persons without a feasible alternative and "
                      f"{n_empty} with an empty observed week", RuntimeWarning, stacklevel=2)
    locs = np.where(delta == 1, loc[:, None], -1)
    obs = Observations(population.person_id[keep], population.home[keep], population.ft_wd[keep],
                       population.ft_we[keep], delta[keep], d[keep], locs[keep])
    return SynthResult(obs, population, chosen[keep], weeks[keep], population.person_id[~keep])


# ---------------------------------------------------------------- presets

def grocery_preset(n_zones: int = 10, seed: int = 0):
    return generate_scenario(n_zones, seed), PopulationParams()


def ecommerce_preset():
    """One travel-free online zone; weekend consumption 1.4, logit scale 0.1."""
    scen = ZoneScenario(("online",), [100.0], [[0.0]], [[0.0]])
    base = PopulationParams()
    return scen, replace(base, xi=replace(base.xi, gamma=1.4, mu=0.1, use_size=False))


# ------------------------------------------------------------ statistics

def summary_stats(obs: Observations, scenario: ZoneScenario, dur_bin: float = 0.25, tt_bin_min: float = 5.0):
    """Plot-ready series: participation by day, durations, travel times, trips per week."""
    delta = obs.delta.astype(bool)
    by_day = delta.sum(axis=0)
    trips = delta.sum(axis=1)
    d = obs.d[delta]
    home = np.broadcast_to(obs.home[:, None], delta.shape)[delta]
    tt_min = 60.0 * scenario.travel_time[home, obs.loc[delta]]
    d_edges = np.arange(0.0, max(dur_bin, np.ceil((d.max() if d.size else 0) / dur_bin) * dur_bin) + dur_bin, dur_bin)
    t_edges = np.arange(0.0, max(tt_bin_min, np.ceil((tt_min.max() if tt_min.size else 0) / tt_bin_min)
                                 * tt_bin_min) + tt_bin_min, tt_bin_min)
    we = np.array([5, 6])
    mean_dur = [float(obs.d[delta[:, t], t].mean()) if delta[:, t].any() else 0.0 for t in range(7)]
    return {
        "n_persons": int(len(obs)),
        "participation_by_day": by_day.tolist(),
        "mean_weekly_participation": float(trips.mean()) if len(obs) else 0.0,
        "participations_per_week": np.bincount(trips, minlength=8)[:8].tolist(),
        "weekday_mean_participation": float(by_day[:5].mean()),
        "weekend_mean_participation": float(by_day[we].mean()),
        "mean_duration_by_day_hr": mean_dur,
        "duration_hist": {"edges_hr": d_edges.tolist(), "counts": np.histogram(d, d_edges)[0].tolist()},
        "mean_one_way_tt_min": float(tt_min.mean()) if tt_min.size else 0.0,
        "tt_hist": {"edges_min": t_edges.tolist(), "counts": np.histogram(tt_min, t_edges)[0].tolist()},
    }
