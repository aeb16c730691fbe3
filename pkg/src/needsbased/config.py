"""TOML run configuration with [model], [scenario], [population] and [estimation] tables."""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:      # pragma: no cover
    import tomli as tomllib

from .empirical import FixedParams, PopulationParams
from .errors import ConfigError, DomainError
from .model import Horizon, ModelParams, ScenarioInputs, production_from_dict

SECTIONS = {"model", "scenario", "population", "estimation", "synth"}

MODEL_KEYS = {"gamma", "lambda_weekday", "rho1", "rho2", "rho3", "production", "H", "weekend_days"}
SCENARIO_KEYS = {"file", "n_locations", "attractiveness", "travel_time_one_way_hr", "travel_cost_one_way",
                 "free_time_weekday_hr", "free_time_weekend_hr"}
POP_KEYS = {"mu_rho1", "mu_kappa", "mu_q0", "omega_rho1", "omega_kappa", "omega_q0", "gamma", "p1",
            "p_slopes", "breakpoints", "q1", "q2", "mu", "beta_RE", "beta_Area", "sigma_nest", "sigma_dur",
            "lambda", "use_size"}
EST_KEYS = {"draws", "seed", "free", "budget", "init", "choice_set_size", "surface", "max_weeks",
            "data", "scenario"}
SYNTH_KEYS = {"preset", "n_persons", "n_zones", "seed", "max_weeks"}


@dataclass
class RunConfig:
    raw: dict
    base_dir: Path = field(default_factory=Path)

    def section(self, name) -> dict:
        return self.raw.get(name, {})

    def has(self, name) -> bool:
        return name in self.raw


def _check_keys(doc, allowed, where):
    extra = set(doc) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) in [{where}]: {sorted(extra)}")


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        raw = tomllib.loads(p.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {p}: {exc}") from None
    return parse_config(raw, p.parent)


def parse_config(raw: dict, base_dir=Path(".")) -> RunConfig:
    extra = set(raw) - SECTIONS
    if extra:
        raise ConfigError(f"unknown section(s): {sorted(extra)}")
    for name, keys in (("model", MODEL_KEYS), ("scenario", SCENARIO_KEYS), ("population", POP_KEYS),
                       ("estimation", EST_KEYS), ("synth", SYNTH_KEYS)):
        if name in raw:
            if not isinstance(raw[name], dict):
                raise ConfigError(f"[{name}] must be a table")
            _check_keys(raw[name], keys, name)
    return RunConfig(raw, Path(base_dir))


def _num(doc, key, where, default=None):
    v = doc.get(key, default)
    if v is None:
        raise ConfigError(f"[{where}] missing {key}")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"[{where}] {key} must be a number")
    return float(v)


def model_params(cfg: RunConfig) -> ModelParams:
    m = cfg.section("model")
    if not m:
        raise ConfigError("config has no [model] section")
    prod = m.get("production")
    if not isinstance(prod, dict):
        raise ConfigError("[model] production must be a table, e.g. {type = \"linear\", q0 = 0, p1 = 0.5, q2 = 0.5}")
    try:
        return ModelParams(gamma=_num(m, "gamma", "model"), rho1=_num(m, "rho1", "model"),
                           rho3=_num(m, "rho3", "model"),
                           rho2=None if "rho2" not in m else _num(m, "rho2", "model"),
                           lambda_weekday=_num(m, "lambda_weekday", "model", 1.0),
                           production=production_from_dict(prod))
    except DomainError as exc:
        raise ConfigError(f"[model] {exc}") from None


def horizon(cfg: RunConfig) -> Horizon:
    m = cfg.section("model")
    H = int(m.get("H", 7))
    wk = m.get("weekend_days")
    try:
        return Horizon(H, frozenset(int(x) for x in wk)) if wk is not None else Horizon(H)
    except DomainError as exc:
        raise ConfigError(f"[model] {exc}") from None


def scenario_inputs(cfg: RunConfig, override_file=None) -> ScenarioInputs:
    from .io import read_json, scenario_inputs_from_dict
    s = cfg.section("scenario")
    f = override_file or s.get("file")
    if f is not None:
        path = Path(f) if override_file else cfg.base_dir / f
        try:
            return scenario_inputs_from_dict(read_json(path))
        except DomainError as exc:
            raise ConfigError(f"scenario file {path}: {exc}") from None
    if not s:
        raise ConfigError("config has no [scenario] section and no scenario file was given")
    h = horizon(cfg)
    try:
        return ScenarioInputs.uniform(
            h.H, attractiveness=_num(s, "attractiveness", "scenario"),
            travel_time_two_way=2 * _num(s, "travel_time_one_way_hr", "scenario"),
            travel_cost_two_way=2 * _num(s, "travel_cost_one_way", "scenario"),
            free_time_weekday=_num(s, "free_time_weekday_hr", "scenario"),
            free_time_weekend=_num(s, "free_time_weekend_hr", "scenario"),
            n_locations=int(s.get("n_locations", 1)), horizon=h)
    except DomainError as exc:
        raise ConfigError(f"[scenario] {exc}") from None


def population_params(cfg: RunConfig, base: PopulationParams | None = None) -> PopulationParams:
    p = dict(cfg.section("population"))
    base = base or PopulationParams()
    xi = base.xi
    kw = {}
    try:
        for k in ("gamma", "q2", "mu", "sigma_nest", "sigma_dur"):
            if k in p:
                kw[k] = _num(p, k, "population")
        if "lambda" in p:
            kw["lam"] = _num(p, "lambda", "population")
        if "q1" in p:
            kw["q1"] = _num(p, "q1", "population")
        if "p_slopes" in p:
            kw["p_slopes"] = tuple(float(x) for x in p["p_slopes"])
            kw["breakpoints"] = tuple(float(x) for x in p.get("breakpoints", ()))
        if "p1" in p:
            kw["p_slopes"] = (_num(p, "p1", "population"),) + tuple(kw.get("p_slopes", xi.p_slopes)[1:])
        if "beta_RE" in p or "beta_Area" in p:
            kw["beta"] = (_num(p, "beta_RE", "population", xi.beta[0]),
                          _num(p, "beta_Area", "population", xi.beta[1]))
        if "use_size" in p:
            kw["use_size"] = bool(p["use_size"])
        from dataclasses import replace
        xi = replace(xi, **kw)
        mu = [_num(p, k, "population", base.mu_D[i]) for i, k in enumerate(("mu_rho1", "mu_kappa", "mu_q0"))]
        om = [_num(p, k, "population", base.omega_D[i])
              for i, k in enumerate(("omega_rho1", "omega_kappa", "omega_q0"))]
        return PopulationParams(tuple(mu), tuple(om), xi)
    except DomainError as exc:
        raise ConfigError(f"[population] {exc}") from None


def _est_defaults():
    return {"draws": 200, "seed": 0, "free": ["p1", "q2"], "budget": 40, "init": {},
            "choice_set_size": None, "surface": {}, "max_weeks": 8}


def estimation_options(cfg: RunConfig) -> dict:
    e = _est_defaults()
    e.update(cfg.section("estimation"))
    if int(e["draws"]) < 1:
        raise ConfigError("[estimation] draws must be >= 1")
    if int(e["budget"]) < 0:
        raise ConfigError("[estimation] budget must be >= 0")
    if not isinstance(e["free"], list):
        raise ConfigError("[estimation] free must be a list of parameter names")
    return e


def synth_options(cfg: RunConfig) -> dict:
    s = {"preset": "grocery", "n_persons": 1500, "n_zones": 10, "seed": 0, "max_weeks": 8}
    s.update(cfg.section("synth"))
    if s["preset"] not in ("grocery", "ecommerce"):
        raise ConfigError(f"[synth] unknown preset {s['preset']!r}")
    return s
