import numpy as np
import pytest

from needsbased import CobbDouglas, ConfigError, DomainError, PwlFitConfig, fit_pwl, fit_pwl_path
from needsbased.pwl import fit_error

CD = CobbDouglas(0.0, 0.5, 0.4)


def test_one_segment_closed_form():
    cfg = PwlFitConfig(n_segments=1)
    d = cfg.grid()
    p = np.sum(d ** 1.5) / np.sum(d * d)
    fit = fit_pwl(CD, 100.0, cfg)
    assert fit.slopes == pytest.approx((p,), rel=1e-14)
    assert fit.slopes[0] == pytest.approx(0.42413160886676393, rel=1e-12)


def test_three_segments_frozen():
    fit = fit_pwl(CD, 100.0)
    assert fit.slopes == pytest.approx((2.138267529197316, 0.4334351115137192, 0.2207692691470015), rel=1e-6)
    assert fit.breakpoints == pytest.approx((0.3155567193104172, 2.6743551215722414), rel=1e-6)
    assert fit.q0 == CD.q0 and fit.q2 == CD.q2


def test_error_decreases_with_segments():
    errs = [e for _, e in fit_pwl_path(CD, 100.0, 5)]
    assert errs[2] < errs[0]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(errs, errs[1:]))
    f3 = fit_pwl(CD, 100.0)
    assert fit_error(f3.slopes, f3.breakpoints, 0.5, PwlFitConfig()) == pytest.approx(errs[2], rel=1e-9)


def test_fit_is_concave_and_positive():
    for n in (2, 3, 4):
        f = fit_pwl(CobbDouglas(0.2, 0.3, 0.6), 50.0, PwlFitConfig(n_segments=n))
        assert all(a > b > 0 for a, b in zip(f.slopes, f.slopes[1:]))
        assert len(f.breakpoints) == n - 1


def test_fit_independent_of_attractiveness():
    a = fit_pwl(CD, 100.0)
    b = fit_pwl(CD, 7.0)
    assert a.slopes == b.slopes and a.breakpoints == b.breakpoints


def test_config_errors():
    with pytest.raises(ConfigError):
        PwlFitConfig(n_segments=0)
    with pytest.raises(ConfigError):
        PwlFitConfig(n_segments=5, grid_points=8)
    with pytest.raises(DomainError):
        fit_pwl(CD, -1.0)
