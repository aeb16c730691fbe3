"""Logit-mixture choice of (location, weekly pattern) with duration measurement error.

Alternatives are single-location weekly patterns: index ``j * 127 + p`` for
zone j and pattern row p of ``batch.weekly_patterns()``. Each person gets a
fixed block of standard-normal draws keyed by (seed, person id); rows are
draws, the first three columns feed the random coefficients and the rest the
per-zone nest errors. Changing parameters never changes the draws.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit, logsumexp

from . import batch
from .batch import DEGENERATE_TOL, weekly_patterns
from .errors import DegenerateChoiceError, DomainError, HorizonCapError, InfeasibleError
from .model import CobbDouglas, ModelParams, Piecewise
from .solver import solve_multiweek
from .zones import ZoneScenario

PATTERNS = weekly_patterns()
N_PATTERNS = PATTERNS.shape[0]
LOG_2PI_HALF = 0.5 * math.log(2 * math.pi)


def pattern_index(delta) -> int:
    """Row of ``weekly_patterns()`` for a weekly 0/1 vector."""
    bits = [int(x) for x in np.asarray(delta).ravel()]
    if len(bits) != 7 or not any(bits):
        raise DomainError("weekly pattern must have 7 entries and at least one active day")
    return int("".join(map(str, bits)), 2) - 1


# ------------------------------------------------------------ parameters

@dataclass(frozen=True)
class FixedParams:
    gamma: float = 1.2
    p_slopes: tuple = (0.8,)
    breakpoints: tuple = ()
    q1: float | None = None       # set for Cobb-Douglas production instead of slopes
    q2: float = 0.5
    mu: float = 0.2
    beta: tuple = (0.5, 1.0)
    sigma_nest: float = 5.0
    sigma_dur: float = 0.2
    lam: float = 1.0
    use_size: bool = True

    def __post_init__(self):
        object.__setattr__(self, "p_slopes", tuple(float(x) for x in self.p_slopes))
        object.__setattr__(self, "breakpoints", tuple(float(x) for x in self.breakpoints))
        object.__setattr__(self, "beta", tuple(float(x) for x in self.beta))
        if self.lam != 1.0:
            raise DomainError("weekday consumption is normalized to 1")
        if not self.mu > 0:
            raise DomainError("mu must be positive")
        # sigma_dur = 0 is allowed for synthesis (noise-free durations); the likelihood rejects it
        if self.sigma_nest < 0 or self.sigma_dur < 0:
            raise DomainError("sigma_nest and sigma_dur must be non-negative")
        if self.gamma <= 0:
            raise DomainError("gamma must be positive")
        self.production(0.0)    # validates slopes / q1

    @property
    def p1(self) -> float:
        return self.p_slopes[0]

    @property
    def is_linear(self) -> bool:
        return self.q1 is None and len(self.p_slopes) == 1

    def production(self, q0: float):
        if self.q1 is not None:
            return CobbDouglas(q0, self.q1, self.q2)
        return Piecewise(q0, self.q2, self.p_slopes, self.breakpoints)


@dataclass(frozen=True)
class RandomParams:
    r_rho1: float
    r_kappa: float
    q0: float

    def as_array(self):
        return np.array([self.r_rho1, self.r_kappa, self.q0])


@dataclass(frozen=True)
class PopulationParams:
    mu_D: tuple = (3.0, 1.0, -0.5)
    omega_D: tuple = (1.0, 0.25, 0.25)     # diagonal variances
    xi: FixedParams = field(default_factory=FixedParams)

    def __post_init__(self):
        mu = tuple(float(x) for x in self.mu_D)
        om = np.asarray(self.omega_D, dtype=float)
        if om.ndim == 2:
            if np.any(om - np.diag(np.diag(om))):
                raise DomainError("omega_D must be diagonal")
            om = np.diag(om)
        if len(mu) != 3 or om.shape != (3,):
            raise DomainError("mu_D and omega_D need 3 entries")
        if np.any(om < 0):
            raise DomainError("omega_D diagonal must be non-negative")
        object.__setattr__(self, "mu_D", mu)
        object.__setattr__(self, "omega_D", tuple(float(x) for x in om))

    def get(self, name: str) -> float:
        kind, key = _PARAM_SLOTS[name]
        if kind == "xi":
            return _xi_get(self.xi, key)
        return float((self.mu_D if kind == "mu" else self.omega_D)[key])

    def with_values(self, **vals) -> "PopulationParams":
        mu, om, xi = list(self.mu_D), list(self.omega_D), self.xi
        for name, v in vals.items():
            kind, key = _PARAM_SLOTS[name]
            if kind == "mu":
                mu[key] = float(v)
            elif kind == "omega":
                om[key] = float(v)
            else:
                xi = _xi_set(xi, key, float(v))
        return PopulationParams(tuple(mu), tuple(om), xi)

    def to_dict(self):
        xi = self.xi
        return {"mu_D": list(self.mu_D), "omega_D_diag": list(self.omega_D),
                "xi": {"gamma": xi.gamma, "p_slopes": list(xi.p_slopes), "breakpoints": list(xi.breakpoints),
                       "q1": xi.q1, "q2": xi.q2, "mu": xi.mu, "beta": list(xi.beta),
                       "sigma_nest": xi.sigma_nest, "sigma_dur": xi.sigma_dur, "lambda": xi.lam,
                       "use_size": xi.use_size}}


_PARAM_SLOTS = {
    "mu_rho1": ("mu", 0), "mu_kappa": ("mu", 1), "mu_q0": ("mu", 2),
    "omega_rho1": ("omega", 0), "omega_kappa": ("omega", 1), "omega_q0": ("omega", 2),
    "p1": ("xi", "p1"), "q1": ("xi", "q1"), "q2": ("xi", "q2"), "gamma": ("xi", "gamma"),
    "mu": ("xi", "mu"), "beta_RE": ("xi", ("beta", 0)), "beta_Area": ("xi", ("beta", 1)),
    "sigma_nest": ("xi", "sigma_nest"), "sigma_dur": ("xi", "sigma_dur"),
}
PARAM_NAMES = tuple(_PARAM_SLOTS)


def _xi_get(xi, key):
    if key == "p1":
        return xi.p1
    if isinstance(key, tuple):
        return xi.beta[key[1]]
    v = getattr(xi, key)
    if v is None:
        raise DomainError(f"parameter {key} is not set")
    return float(v)


def _xi_set(xi, key, v):
    if key == "p1":
        return replace(xi, p_slopes=(v,) + xi.p_slopes[1:])
    if isinstance(key, tuple):
        b = list(xi.beta)
        b[key[1]] = v
        return replace(xi, beta=tuple(b))
    return replace(xi, **{key: v})


def transform_random(zeta, ft_wd, ft_we):
    """(r_rho1, r_kappa, q0) -> (rho1, rho3, q0); rho2 is tied to 2*rho3 elsewhere."""
    z = zeta.as_array() if isinstance(zeta, RandomParams) else np.asarray(zeta, float)
    ft_wd = np.asarray(ft_wd, float)
    ft_we = np.asarray(ft_we, float)
    if np.any(ft_wd <= 0) or np.any(ft_we <= 0):
        raise DomainError("free time must be positive")
    rho1 = np.exp(z[..., 0])
    rho3 = rho1 * np.minimum(ft_wd, ft_we) * expit(-z[..., 1])
    return rho1, rho3, z[..., 2]


# ---------------------------------------------------------- observations

@dataclass(frozen=True)
class Observation:
    person_id: int
    home: int
    ft_wd: float
    ft_we: float
    delta: np.ndarray
    d: np.ndarray
    loc: np.ndarray

    @property
    def location(self) -> int:
        """The single zone visited during the week."""
        locs = set(int(x) for x in self.loc[self.delta == 1])
        if len(locs) != 1:
            raise DomainError(f"person {self.person_id}: expected one location, got {sorted(locs)}")
        return locs.pop()

    @property
    def alternative(self) -> int:
        return self.location * N_PATTERNS + pattern_index(self.delta)


@dataclass(frozen=True)
class Observations:
    person_id: np.ndarray   # (N,)
    home: np.ndarray        # (N,)
    ft_wd: np.ndarray       # (N,)
    ft_we: np.ndarray       # (N,)
    delta: np.ndarray       # (N, 7)
    d: np.ndarray           # (N, 7)
    loc: np.ndarray         # (N, 7), -1 where delta == 0

    def __post_init__(self):
        delta = np.asarray(self.delta, np.int8).reshape(-1, 7)
        d = np.asarray(self.d, float).reshape(-1, 7)
        loc = np.asarray(self.loc, np.int64).reshape(-1, 7)
        if np.any((delta == 1) & (d <= 0)):
            raise DomainError("observed duration must be positive on active days")
        if np.any((delta == 0) & (d != 0)):
            raise DomainError("duration reported on a non-participation day")
        if np.any(~delta.any(axis=1)):
            raise DomainError("every observation needs at least one active day")
        object.__setattr__(self, "person_id", np.asarray(self.person_id, np.int64))
        object.__setattr__(self, "home", np.asarray(self.home, np.int64))
        object.__setattr__(self, "ft_wd", np.asarray(self.ft_wd, float))
        object.__setattr__(self, "ft_we", np.asarray(self.ft_we, float))
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "loc", np.where(delta == 1, loc, -1))
        if len(set(self.person_id.tolist())) != len(self.person_id):
            raise DomainError("person ids must be unique")

    def __len__(self):
        return int(self.person_id.shape[0])

    def __getitem__(self, i) -> Observation:
        return Observation(int(self.person_id[i]), int(self.home[i]), float(self.ft_wd[i]),
                           float(self.ft_we[i]), self.delta[i], self.d[i], self.loc[i])

    def subset(self, idx) -> "Observations":
        idx = np.asarray(idx)
        return Observations(self.person_id[idx], self.home[idx], self.ft_wd[idx], self.ft_we[idx],
                            self.delta[idx], self.d[idx], self.loc[idx])

    def alternatives(self) -> np.ndarray:
        return np.array([self[i].alternative for i in range(len(self))], dtype=np.int64)


# ----------------------------------------------------------- choice sets

@dataclass(frozen=True)
class ChoiceSet:
    alternatives: np.ndarray     # universe indices, chosen first
    universe_size: int
    sampled: bool

    @property
    def size(self) -> int:
        return int(self.alternatives.shape[0])

    def mask(self) -> np.ndarray:
        m = np.zeros(self.universe_size, bool)
        m[self.alternatives] = True
        return m


def full_choice_set(n_zones: int, chosen: int | None = None) -> ChoiceSet:
    U = n_zones * N_PATTERNS
    alts = np.arange(U)
    if chosen is not None:
        alts = np.concatenate([[chosen], np.delete(alts, chosen)])
    return ChoiceSet(alts, U, False)


def sample_choice_set(chosen: int, universe_size: int, R: int = 128, seed: int = 0,
                      person_id: int = 0) -> ChoiceSet:
    """Chosen alternative plus R-1 others drawn uniformly without replacement."""
    if R >= universe_size:
        return ChoiceSet(np.concatenate([[chosen], np.delete(np.arange(universe_size), chosen)]),
                         universe_size, False)
    rng = np.random.default_rng([seed, person_id, 0xC5])
    others = rng.choice(universe_size - 1, R - 1, replace=False)
    others = others + (others >= chosen)
    return ChoiceSet(np.concatenate([[chosen], others]).astype(np.int64), universe_size, True)


# ------------------------------------------------------ basic densities

def logit_probabilities(U, mu: float) -> np.ndarray:
    """Softmax of mu*U over finite entries; -inf entries get probability 0."""
    U = np.asarray(U, float)
    if not np.any(np.isfinite(U)):
        raise DegenerateChoiceError("every alternative has -inf utility")
    x = mu * U
    return np.exp(x - logsumexp(x))


def log_lognormal(d, dstar, sigma):
    """log of (1/(d sigma)) phi((ln d - ln d*)/sigma); -inf where d* = 0."""
    d = np.asarray(d, float)
    dstar = np.asarray(dstar, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (np.log(d) - np.log(dstar)) / sigma
        out = -0.5 * z * z - LOG_2PI_HALF - np.log(d * sigma)
    return np.where(dstar > 0, out, -np.inf)


def lognormal_density(d, dstar, sigma):
    return np.exp(log_lognormal(d, dstar, sigma))


def duration_log_density(d_obs, delta_obs, dstar_weeks, sigma) -> float:
    """log f with f = mean over weeks of the product over observed active days."""
    if not sigma > 0:
        raise DomainError("the duration density needs sigma_dur > 0")
    dstar_weeks = np.asarray(dstar_weeks, float).reshape(-1, 7)
    act = np.asarray(delta_obs) == 1
    if np.any(np.asarray(d_obs)[act] <= 0):
        raise DomainError("observed duration must be positive on active days")
    per_week = np.array([np.sum(log_lognormal(np.asarray(d_obs)[act], w[act], sigma)) for w in dstar_weeks])
    return float(logsumexp(per_week) - math.log(len(per_week)))


# ------------------------------------------------ single-person reference

def _person_params(obs: Observation, zeta, xi: FixedParams):
    rho1, rho3, q0 = transform_random(zeta, obs.ft_wd, obs.ft_we)
    return ModelParams(gamma=xi.gamma, rho1=float(rho1), rho3=float(rho3),
                       production=xi.production(float(q0)), lambda_weekday=xi.lam)


def alternative_solution(alt: int, obs: Observation, zeta, xi: FixedParams, scenario: ZoneScenario,
                         max_weeks: int = 8):
    """Conditioned multi-week solve of one alternative, or None if excluded.

    Excluded: infeasible, no non-negative horizon within ``max_weeks``, or an
    optimum that leaves an active day of some week unused.
    """
    j, p = divmod(int(alt), N_PATTERNS)
    params = _person_params(obs, zeta, xi)
    inputs = scenario.inputs_for(obs.home, obs.ft_wd, obs.ft_we)
    try:
        res = solve_multiweek(inputs, params, delta=PATTERNS[p], loc=j, max_weeks=max_weeks)
    except (InfeasibleError, HorizonCapError):
        return None
    if np.any(res.pattern.d[res.pattern.delta == 1] <= DEGENERATE_TOL):
        return None
    return res


def systematic_utility(alt: int, obs: Observation, zeta, xi: FixedParams, scenario: ZoneScenario,
                       max_weeks: int = 8):
    """(V~ + ln M, nest id); the nest error is added by the caller per draw."""
    j = int(alt) // N_PATTERNS
    res = alternative_solution(alt, obs, zeta, xi, scenario, max_weeks)
    lnM = scenario.log_size(xi.beta)[j] if xi.use_size else 0.0
    if res is None:
        return -np.inf, j
    return res.objective + lnM, j


def choice_probability(obs: Observation, choice_set: ChoiceSet, zeta, nest_draws, xi: FixedParams,
                       scenario: ZoneScenario) -> float:
    """Probability of the observed alternative within ``choice_set``."""
    chosen = obs.alternative
    if chosen not in set(choice_set.alternatives.tolist()):
        raise DomainError("observed alternative missing from the choice set")
    eta = np.asarray(nest_draws, float)
    U = np.empty(choice_set.size)
    for i, a in enumerate(choice_set.alternatives):
        u, nest = systematic_utility(a, obs, zeta, xi, scenario)
        U[i] = u + eta[nest]
    P = logit_probabilities(U, xi.mu)
    return float(P[list(choice_set.alternatives).index(chosen)])


def duration_density(obs: Observation, zeta, xi: FixedParams, scenario: ZoneScenario) -> float:
    res = alternative_solution(obs.alternative, obs, zeta, xi, scenario)
    if res is None:
        raise InfeasibleError("observed alternative is excluded under these parameters")
    return math.exp(duration_log_density(obs.d, obs.delta, res.pattern.d, xi.sigma_dur))


def joint_probability(obs: Observation, choice_set: ChoiceSet, zeta, nest_draws, xi: FixedParams,
                      scenario: ZoneScenario) -> float:
    return (choice_probability(obs, choice_set, zeta, nest_draws, xi, scenario)
            * duration_density(obs, zeta, xi, scenario))


# ------------------------------------------------------ vectorized path

def person_draws(seed: int, person_id: int, R: int, n_zones: int) -> np.ndarray:
    """(R, 3 + J) standard normals; row r is draw r for every R."""
    return np.random.default_rng([int(seed), int(person_id), 0xD7]).standard_normal((R, 3 + n_zones))


def _zone_terms(xi: FixedParams, scenario: ZoneScenario):
    lnM = scenario.log_size(xi.beta) if xi.use_size else np.zeros(scenario.n_zones)
    return lnM


def alternative_values(xi: FixedParams, scenario: ZoneScenario, home, ft_wd, ft_we, rho1, rho3, q0,
                       max_weeks: int = 8, engine=None):
    """Per-day objective V (S, J, P) and usable mask for every alternative.

    Scenario rows are given by the broadcastable person arrays.
    """
    home, ft_wd, ft_we, rho1, rho3, q0 = np.broadcast_arrays(
        np.asarray(home), *[np.asarray(x, float) for x in (ft_wd, ft_we, rho1, rho3, q0)])
    shape = home.shape
    J = scenario.n_zones
    tt = 2 * scenario.travel_time[home.ravel()]          # (S, J)
    tc = 2 * scenario.travel_cost[home.ravel()]
    if xi.is_linear:
        c = np.exp(q0.ravel())[:, None] * scenario.attractiveness[None, :] ** xi.q2 * xi.p1
        cap_wd = np.maximum(ft_wd.ravel()[:, None] - tt, 0.0)
        cap_we = np.maximum(ft_we.ravel()[:, None] - tt, 0.0)
        rep = lambda x: np.repeat(x.ravel(), J)
        V, _, usable = batch.evaluate_multiweek(c.ravel(), cap_wd.ravel(), cap_we.ravel(), tt.ravel(),
                                                tc.ravel(), rep(rho1), rep(rho3), xi.gamma,
                                                max_weeks=max_weeks, engine=engine)
        return V.reshape(shape + (J, N_PATTERNS)), usable.reshape(shape + (J, N_PATTERNS))
    # generic production: one conditioned solve per alternative
    S = home.size
    V = np.full((S, J, N_PATTERNS), -np.inf)
    for s in range(S):
        obs = Observation(0, int(home.ravel()[s]), float(ft_wd.ravel()[s]), float(ft_we.ravel()[s]),
                          np.zeros(7), np.zeros(7), np.zeros(7))
        zeta = np.array([np.log(rho1.ravel()[s]), 0.0, q0.ravel()[s]])
        zeta[1] = np.log(rho1.ravel()[s] * min(obs.ft_wd, obs.ft_we) / rho3.ravel()[s] - 1.0)
        for j in range(J):
            for p in range(N_PATTERNS):
                res = alternative_solution(j * N_PATTERNS + p, obs, zeta, xi, scenario, max_weeks)
                if res is not None:
                    V[s, j, p] = res.objective
    return V.reshape(shape + (J, N_PATTERNS)), np.isfinite(V).reshape(shape + (J, N_PATTERNS))


def observed_optima(xi: FixedParams, scenario: ZoneScenario, home, loc, pattern, ft_wd, ft_we,
                    rho1, rho3, q0, max_weeks: int = 8, engine=None):
    """Optimal durations (S, 7*max_weeks, NaN padded), weeks and usable flag
    for one (location, pattern) per scenario row."""
    home, loc, ft_wd, ft_we, rho1, rho3, q0 = [np.ravel(x) for x in np.broadcast_arrays(
        np.asarray(home), np.asarray(loc), *[np.asarray(x, float) for x in (ft_wd, ft_we, rho1, rho3, q0)])]
    S = home.size
    pattern = np.broadcast_to(np.asarray(pattern, np.int8), (S, 7))
    tt = 2 * scenario.travel_time[home, loc]
    tc = 2 * scenario.travel_cost[home, loc]
    if xi.is_linear:
        c = np.exp(q0) * scenario.attractiveness[loc] ** xi.q2 * xi.p1
        _, weeks, usable, dur = batch.solve_pattern_multiweek(
            c, np.maximum(ft_wd - tt, 0.0), np.maximum(ft_we - tt, 0.0), tt, tc, rho1, rho3, xi.gamma,
            pattern, max_weeks)
        return dur, weeks, usable
    dur = np.full((S, 7 * max_weeks), np.nan)
    weeks = np.ones(S, np.int64)
    usable = np.zeros(S, bool)
    for s in range(S):
        obs = Observation(0, int(home[s]), float(ft_wd[s]), float(ft_we[s]), np.zeros(7), np.zeros(7), np.zeros(7))
        zeta = np.array([np.log(rho1[s]), np.log(rho1[s] * min(ft_wd[s], ft_we[s]) / rho3[s] - 1.0), q0[s]])
        res = alternative_solution(int(loc[s]) * N_PATTERNS + pattern_index(pattern[s]), obs, zeta, xi,
                                   scenario, max_weeks)
        if res is not None:
            usable[s] = True
            weeks[s] = res.weeks
            dur[s, :7 * res.weeks] = res.pattern.d
    return dur, weeks, usable


class SimulatedLikelihood:
    """Simulated log-likelihood with draws fixed at construction.

    ``choice_sets``: None for the full universe, or an int R for naive
    sampling of R alternatives per person (fixed across evaluations).

    ``min_prob`` floors each person's simulated probability. A person whose
    observed pattern is unusable under every draw otherwise sends the total
    to -inf; with the floor such persons add the same constant wherever they
    are impossible. ``zero_persons`` lists them after each call. Pass 0 to
    disable.
    """

    def __init__(self, data: Observations, scenario: ZoneScenario, R: int, seed: int = 0,
                 choice_sets: int | None = None, max_weeks: int = 8, chunk_rows: int = 24_000,
                 threads: int | None = None, engine=None, min_prob: float = 1e-300):
        if R < 1:
            raise DomainError("need at least one draw")
        self.data = data
        self.scenario = scenario
        self.R = int(R)
        self.seed = int(seed)
        self.max_weeks = max_weeks
        self.engine = engine
        self.log_floor = math.log(min_prob) if min_prob > 0 else -np.inf
        self.zero_persons = np.zeros(0, np.int64)
        J = scenario.n_zones
        self.z = np.stack([person_draws(seed, pid, R, J) for pid in data.person_id]) if len(data) else \
            np.zeros((0, R, 3 + J))
        self.chosen = data.alternatives()
        self.loc = self.chosen // N_PATTERNS
        if np.any(data.home >= J) or np.any(self.loc >= J):
            raise DomainError("zone index out of range")
        self.mask = None
        if choice_sets is not None:
            U = J * N_PATTERNS
            self.mask = np.stack([sample_choice_set(int(a), U, int(choice_sets), seed, int(pid)).mask()
                                  for a, pid in zip(self.chosen, data.person_id)])
        self.chunk = max(1, chunk_rows // (R * J))
        batch.set_threads(threads)

    def raw_person_loglik(self, pop: PopulationParams) -> np.ndarray:
        """Per-person simulated log-likelihood without the floor."""
        xi = pop.xi
        if not xi.sigma_dur > 0:
            raise DomainError("the duration density needs sigma_dur > 0")
        N = len(self.data)
        out = np.empty(N)
        mu_D = np.asarray(pop.mu_D)
        sd = np.sqrt(np.asarray(pop.omega_D))
        lnM = _zone_terms(xi, self.scenario)
        J = self.scenario.n_zones
        for a in range(0, N, self.chunk):
            idx = np.arange(a, min(N, a + self.chunk))
            n = idx.size
            z = self.z[idx]
            zeta = mu_D + sd * z[..., :3]
            ftwd = self.data.ft_wd[idx][:, None]
            ftwe = self.data.ft_we[idx][:, None]
            rho1, rho3, q0 = transform_random(zeta, ftwd, ftwe)
            eta = xi.sigma_nest * z[..., 3:3 + J]
            home = np.broadcast_to(self.data.home[idx][:, None], (n, self.R))
            V, usable = alternative_values(xi, self.scenario, home, ftwd, ftwe, rho1, rho3, q0,
                                           self.max_weeks, self.engine)
            U = np.where(usable, V, -np.inf) + lnM[None, None, :, None] + eta[..., None]
            U = xi.mu * U.reshape(n, self.R, J * N_PATTERNS)
            if self.mask is not None:
                U = np.where(self.mask[idx][:, None, :], U, -np.inf)
            with np.errstate(invalid="ignore"):
                lse = logsumexp(U, axis=2)
            ch = self.chosen[idx]
            Uc = np.take_along_axis(U, np.broadcast_to(ch[:, None, None], (n, self.R, 1)), axis=2)[..., 0]
            fin = np.isfinite(lse)
            logP = np.where(fin, Uc - np.where(fin, lse, 0.0), -np.inf)
            # duration density of the observed week
            pat = PATTERNS[ch % N_PATTERNS]
            dur, weeks, ok = observed_optima(xi, self.scenario, home, self.loc[idx][:, None],
                                             np.repeat(pat, self.R, axis=0), ftwd, ftwe, rho1, rho3, q0,
                                             self.max_weeks, self.engine)
            K = self.max_weeks
            dstar = dur.reshape(n, self.R, K, 7)
            act = (self.data.delta[idx] == 1)[:, None, None, :]
            dobs = np.where(act, self.data.d[idx][:, None, None, :], 1.0)
            with np.errstate(invalid="ignore"):
                lg = np.where(act, log_lognormal(dobs, np.nan_to_num(dstar, nan=0.0), xi.sigma_dur), 0.0)
            per_week = lg.sum(axis=3)
            valid_week = np.arange(K)[None, None, :] < weeks.reshape(n, self.R)[..., None]
            per_week = np.where(valid_week, per_week, -np.inf)
            with np.errstate(invalid="ignore"):
                logf = logsumexp(per_week, axis=2) - np.log(weeks.reshape(n, self.R))
            logf = np.where(ok.reshape(n, self.R), logf, -np.inf)
            lj = logP + logf
            with np.errstate(invalid="ignore"):
                out[idx] = logsumexp(lj, axis=1) - math.log(self.R)
        return out

    def person_loglik(self, pop: PopulationParams) -> np.ndarray:
        ll = self.raw_person_loglik(pop)
        zero = ~(ll > self.log_floor)
        self.zero_persons = self.data.person_id[zero]
        return np.where(zero, self.log_floor, ll)

    def __call__(self, pop: PopulationParams) -> float:
        ll = self.person_loglik(pop)
        return float(ll.sum()) if np.all(np.isfinite(ll)) else -np.inf


def simulated_loglik(data: Observations, pop: PopulationParams, R: int, seed: int,
                     scenario: ZoneScenario, **kw) -> float:
    """Sum over persons of log mean_r [P(choice | draw r) * f(durations | draw r)]."""
    return SimulatedLikelihood(data, scenario, R, seed, **kw)(pop)
