"""Zone system shared by the population, choice model and synthesizer."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .model import Horizon, ScenarioInputs

# beta is applied by position, so size-measure columns keep this order whatever
# order the keys arrive in (JSON output sorts keys)
SIZE_ORDER = ("RE", "Area")


def ordered_size_names(names) -> tuple:
    names = list(names)
    known = [n for n in SIZE_ORDER if n in names]
    return tuple(known + sorted(n for n in names if n not in SIZE_ORDER))


@dataclass(frozen=True)
class ZoneScenario:
    """Zones with attributes and one-way home-to-zone travel matrices.

    ``travel_time`` is in hours and ``travel_cost`` in money, both (J, J)
    indexed [home, destination]. The activity model charges the two-way
    values, i.e. twice these.
    """

    zone_ids: tuple
    attractiveness: np.ndarray      # (J,)
    travel_time: np.ndarray         # (J, J) one-way hours
    travel_cost: np.ndarray         # (J, J) one-way money
    size_measures: np.ndarray | None = None    # (J, K)
    size_measure_names: tuple = ()

    def __post_init__(self):
        ids = tuple(str(z) for z in self.zone_ids)
        J = len(ids)
        A = np.array(self.attractiveness, dtype=float).reshape(J)
        TT = np.array(self.travel_time, dtype=float).reshape(J, J)
        TC = np.array(self.travel_cost, dtype=float).reshape(J, J)
        if np.any(A <= 0):
            raise DomainError("attractiveness must be positive")
        if np.any(TT < 0) or np.any(TC < 0):
            raise DomainError("travel time and cost must be non-negative")
        object.__setattr__(self, "zone_ids", ids)
        object.__setattr__(self, "attractiveness", A)
        object.__setattr__(self, "travel_time", TT)
        object.__setattr__(self, "travel_cost", TC)
        if self.size_measures is not None:
            X = np.array(self.size_measures, dtype=float).reshape(J, -1)
            names = tuple(self.size_measure_names) or tuple(f"x{k}" for k in range(X.shape[1]))
            if len(names) != X.shape[1]:
                raise DomainError("size_measure_names length mismatch")
            object.__setattr__(self, "size_measures", X)
            object.__setattr__(self, "size_measure_names", names)

    @property
    def n_zones(self) -> int:
        return len(self.zone_ids)

    def log_size(self, beta) -> np.ndarray:
        """ln M_j with M_j = sum_k beta_k x_jk; zeros without size measures."""
        if self.size_measures is None or beta is None or len(beta) == 0:
            return np.zeros(self.n_zones)
        M = self.size_measures @ np.asarray(beta, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(M > 0, np.log(np.where(M > 0, M, 1.0)), -np.inf)

    def inputs_for(self, home: int, ft_wd: float, ft_we: float, weeks: int = 1) -> ScenarioInputs:
        """Per-person model inputs (two-way travel, free time by day type)."""
        h = Horizon.weeks(weeks)
        H = h.H
        ft = np.where(h.weekend_mask, ft_we, ft_wd).astype(float)
        rep = lambda v: np.repeat(np.asarray(v, float)[:, None], H, axis=1)
        return ScenarioInputs(self.zone_ids, rep(self.attractiveness), rep(2 * self.travel_time[home]),
                              rep(2 * self.travel_cost[home]), ft, self.size_measures,
                              self.size_measure_names)

    def to_dict(self):
        doc = {"zone_ids": list(self.zone_ids),
               "attractiveness": self.attractiveness.tolist(),
               "travel_time_one_way_hr": self.travel_time.tolist(),
               "travel_cost_one_way": self.travel_cost.tolist()}
        if self.size_measures is not None:
            doc["size_measures"] = {n: self.size_measures[:, k].tolist()
                                    for k, n in enumerate(self.size_measure_names)}
        return doc

    @classmethod
    def from_dict(cls, doc):
        sm = doc.get("size_measures")
        names = ordered_size_names(sm) if sm else ()
        X = np.column_stack([sm[n] for n in names]) if sm else None
        return cls(tuple(doc["zone_ids"]), doc["attractiveness"], doc["travel_time_one_way_hr"],
                   doc["travel_cost_one_way"], X, names)
