"""JSON / CSV readers and writers. Floats are written with repr so files round-trip exactly."""
from __future__ import annotations

import csv
import io
import json
from importlib import resources
from pathlib import Path

import numpy as np

from .empirical import Observations
from .errors import ConfigError
from .model import ScenarioInputs, production_from_dict
from .zones import ZoneScenario, ordered_size_names

OBS_COLUMNS = ("person_id", "home", "ft_wd", "ft_we", "day", "delta", "d", "loc")


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_default, allow_nan=False) + "\n"


def write_json(path, doc):
    Path(path).write_text(dumps(doc))


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read JSON {path}: {exc}") from None


def load_schema(name: str) -> dict:
    return json.loads(resources.files("needsbased").joinpath("schemas", f"{name}.json").read_text())


def validate(doc, name: str):
    import jsonschema
    try:
        jsonschema.validate(doc, load_schema(name))
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"{name} document invalid: {exc.message}") from None


def _f(x) -> str:
    return repr(float(x))


# ------------------------------------------------------------ scenarios

def scenario_inputs_to_dict(inp: ScenarioInputs) -> dict:
    doc = {"locations": list(inp.locations), "attractiveness": inp.attractiveness.tolist(),
           "travel_time_two_way_hr": inp.travel_time.tolist(), "travel_cost_two_way": inp.travel_cost.tolist(),
           "free_time_hr": inp.free_time.tolist()}
    if inp.size_measures is not None:
        doc["size_measures"] = {n: inp.size_measures[:, k].tolist() for k, n in enumerate(inp.size_measure_names)}
    return doc


def scenario_inputs_from_dict(doc) -> ScenarioInputs:
    validate(doc, "scenario_inputs")
    sm = doc.get("size_measures")
    names = ordered_size_names(sm) if sm else ()
    X = np.column_stack([sm[n] for n in names]) if sm else None
    return ScenarioInputs(tuple(doc["locations"]), doc["attractiveness"], doc["travel_time_two_way_hr"],
                          doc["travel_cost_two_way"], doc["free_time_hr"], X, names)


def zone_scenario_from_dict(doc) -> ZoneScenario:
    validate(doc, "zone_scenario")
    return ZoneScenario.from_dict(doc)


def production_to_dict(spec) -> dict:
    return spec.to_dict()


def production_from_json(doc):
    return production_from_dict(doc)


# --------------------------------------------------------- observations

def observations_to_csv(obs: Observations) -> str:
    """One row per person-day."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(OBS_COLUMNS)
    for i in range(len(obs)):
        for t in range(7):
            w.writerow([int(obs.person_id[i]), int(obs.home[i]), _f(obs.ft_wd[i]), _f(obs.ft_we[i]), t + 1,
                        int(obs.delta[i, t]), _f(obs.d[i, t]), int(obs.loc[i, t])])
    return buf.getvalue()


def observations_from_csv(text: str) -> Observations:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ConfigError("observation CSV has no rows")
    if set(OBS_COLUMNS) - set(rows[0]):
        raise ConfigError(f"observation CSV needs columns {OBS_COLUMNS}")
    people = {}
    try:
        for r in rows:
            pid = int(r["person_id"])
            p = people.setdefault(pid, {"home": int(r["home"]), "ft_wd": float(r["ft_wd"]),
                                        "ft_we": float(r["ft_we"]), "delta": [0] * 7, "d": [0.0] * 7,
                                        "loc": [-1] * 7, "seen": set()})
            t = int(r["day"]) - 1
            if not 0 <= t < 7 or t in p["seen"]:
                raise ConfigError(f"person {pid}: bad or repeated day {r['day']}")
            p["seen"].add(t)
            p["delta"][t] = int(r["delta"])
            p["d"][t] = float(r["d"])
            p["loc"][t] = int(r["loc"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"malformed observation CSV: {exc}") from None
    ids = list(people)
    col = lambda k: [people[i][k] for i in ids]
    return Observations(ids, col("home"), col("ft_wd"), col("ft_we"), col("delta"), col("d"), col("loc"))


def write_observations(path, obs: Observations):
    Path(path).write_text(observations_to_csv(obs))


def read_observations(path) -> Observations:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return observations_from_csv(text)


def observations_to_dict(obs: Observations) -> dict:
    return {"persons": [{"person_id": int(obs.person_id[i]), "home": int(obs.home[i]),
                         "ft_wd": float(obs.ft_wd[i]), "ft_we": float(obs.ft_we[i]),
                         "delta": obs.delta[i].astype(int).tolist(), "d": obs.d[i].tolist(),
                         "loc": obs.loc[i].astype(int).tolist()} for i in range(len(obs))]}


def observations_from_dict(doc) -> Observations:
    P = doc["persons"]
    col = lambda k: [p[k] for p in P]
    return Observations(col("person_id"), col("home"), col("ft_wd"), col("ft_we"), col("delta"), col("d"),
                        col("loc"))


# ------------------------------------------------------------ tables

def table_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_f(x) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()
