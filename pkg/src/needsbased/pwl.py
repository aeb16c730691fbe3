"""Least-squares piecewise-linear fits of the Cobb-Douglas duration curve."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, nnls

from .errors import ConfigError, DomainError
from .model import CobbDouglas, Piecewise


@dataclass(frozen=True)
class PwlFitConfig:
    n_segments: int = 3
    grid_lo: float = 0.01
    grid_hi: float = 8.0
    grid_points: int = 800
    n_starts: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.n_segments < 1:
            raise ConfigError("n_segments must be >= 1")
        if not 0 < self.grid_lo < self.grid_hi:
            raise ConfigError("need 0 < grid_lo < grid_hi")
        if self.grid_points < 2 * self.n_segments:
            raise ConfigError(f"grid_points={self.grid_points} too small for {self.n_segments} segments")

    def grid(self):
        return np.linspace(self.grid_lo, self.grid_hi, self.grid_points)


def _basis(d, breaks):
    """Columns min(d, b_j) plus d itself; slopes are suffix sums of the weights."""
    return np.column_stack([np.minimum(d, b) for b in breaks] + [d])


def _profile(d, y, breaks):
    """Best concave slopes for fixed breakpoints (NNLS on slope decrements)."""
    c, rnorm = nnls(_basis(d, breaks), y)
    return np.cumsum(c[::-1])[::-1], rnorm ** 2


def _breaks_from(theta):
    return np.cumsum(np.exp(np.clip(theta, -30.0, 30.0)))


def _curve(d, slopes, breaks):
    c = np.append(-np.diff(slopes), slopes[-1])
    return _basis(d, breaks) @ c


def fit_error(slopes, breaks, q1, cfg: PwlFitConfig) -> float:
    d = cfg.grid()
    return float(np.sum((d ** q1 - _curve(d, np.asarray(slopes, float), np.asarray(breaks, float))) ** 2))


def _repair(slopes):
    """Force strictly decreasing slopes when NNLS zeroes a decrement."""
    s = np.array(slopes, float)
    for i in range(len(s) - 2, -1, -1):
        if s[i] <= s[i + 1]:
            s[i] = s[i + 1] * (1 + 1e-9)
    return s


def _fit_shape(q1, cfg: PwlFitConfig, warm=None):
    d = cfg.grid()
    y = d ** q1
    n = cfg.n_segments
    if n == 1:
        p = np.sum(d ** (q1 + 1)) / np.sum(d * d)
        return np.array([p]), np.array([]), float(np.sum((y - p * d) ** 2))

    def sse(theta):
        return _profile(d, y, _breaks_from(theta))[1]

    rng = np.random.default_rng(cfg.seed)
    starts = []
    if warm is not None:
        starts.append(np.log(np.diff(np.concatenate([[0.0], warm]))))
    for _ in range(cfg.n_starts):
        b = np.sort(rng.uniform(cfg.grid_lo, cfg.grid_hi, n - 1))
        starts.append(np.log(np.diff(np.concatenate([[0.0], b])) + 1e-6))
    opts = dict(xatol=1e-10, fatol=1e-14, maxiter=4000 * n, maxfev=6000 * n)
    best = None
    for th in starts:
        res = minimize(sse, th, method="Nelder-Mead", options=opts)
        if best is None or res.fun < best.fun:
            best = res
    b = _breaks_from(best.x)
    s, err = _profile(d, y, b)
    return _repair(s), b, float(err)


def fit_pwl_path(target: CobbDouglas, A: float, max_segments: int = 7, cfg: PwlFitConfig | None = None):
    """Fits for 1..max_segments segments, each warm-started from the previous.

    The warm start places the new breakpoint past the grid end, which
    reproduces the previous fit, so the squared error never increases with
    the segment count.
    """
    if not isinstance(target, CobbDouglas):
        raise DomainError("target must be CobbDouglas")
    if A <= 0:
        raise DomainError("attractiveness must be positive")
    base = cfg or PwlFitConfig()
    out = []
    warm = None
    for n in range(1, max_segments + 1):
        c = PwlFitConfig(n, base.grid_lo, base.grid_hi, base.grid_points, base.n_starts, base.seed)
        s, b, err = _fit_shape(target.q1, c, warm)
        out.append((Piecewise(target.q0, target.q2, tuple(s), tuple(b)), err))
        extra = base.grid_hi * 1.5 if not len(b) else max(b[-1], base.grid_hi) * 1.5
        warm = np.append(b, extra)
    return out


def fit_pwl(target: CobbDouglas, A: float, cfg: PwlFitConfig | None = None) -> Piecewise:
    """Concave piecewise-linear fit of d**q1 on the grid; C is reapplied via q0, q2.

    The result is independent of ``A`` and ``q0`` apart from the shared
    constant C = exp(q0) * A**q2.
    """
    cfg = cfg or PwlFitConfig()
    return fit_pwl_path(target, A, cfg.n_segments, cfg)[-1][0]
