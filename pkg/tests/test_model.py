import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from lcwave.model import (ConfigError, MaterialParams, SolverConfig, director_deriv_bound,
                          load_config, speed_bounds, speed_derivative_planar, wave_speed,
                          wave_speed_deriv, wave_speed_planar)


def test_wave_speed_endpoints(params):
    assert wave_speed(params, 0.0) == pytest.approx(math.sqrt(2.0))
    assert wave_speed(params, 1.0) == pytest.approx(1.0)
    assert wave_speed(params, -1.0) == pytest.approx(1.0)


def test_wave_speed_rejects_non_unit(params):
    with pytest.raises(ValueError):
        wave_speed(params, 1.01)


def test_planar_speed_matches_director_speed(params):
    u = np.linspace(-3, 3, 101)
    np.testing.assert_allclose(wave_speed_planar(params, u), wave_speed(params, np.cos(u)), rtol=1e-14)


def test_planar_derivative_matches_finite_difference(params):
    u = np.linspace(-2, 2, 41)
    h = 1e-6
    fd = (wave_speed_planar(params, u + h) - wave_speed_planar(params, u - h)) / (2 * h)
    np.testing.assert_allclose(speed_derivative_planar(params, u), fd, atol=1e-8)


def test_director_derivative_matches_finite_difference(params):
    n1 = np.linspace(-0.9, 0.9, 19)
    h = 1e-6
    fd = (wave_speed(params, n1 + h) - wave_speed(params, n1 - h)) / (2 * h)
    np.testing.assert_allclose(wave_speed_deriv(params, n1), fd, atol=1e-8)


def test_speed_bounds_against_optimizer(params):
    c_lo, c_hi, c_d = speed_bounds(params)
    assert c_lo == pytest.approx(1.0)
    assert c_hi == pytest.approx(math.sqrt(2.0))
    res = minimize_scalar(lambda u: -abs(speed_derivative_planar(params, u)), bounds=(0, math.pi / 2),
                          method="bounded", options={"xatol": 1e-12})
    assert c_d == pytest.approx(-res.fun, rel=1e-7)
    assert c_d <= abs(params.alpha - params.gamma) / (2 * c_lo)


def test_director_deriv_bound_value(params):
    assert director_deriv_bound(params) == pytest.approx(1.0)
    n1 = np.linspace(-1, 1, 2001)
    assert np.max(np.abs(wave_speed_deriv(params, n1))) == pytest.approx(1.0)


@pytest.mark.parametrize("kwargs", [dict(alpha=0.0), dict(gamma=-1.0), dict(mu=-0.1),
                                    dict(alpha=float("nan"))])
def test_material_validation(kwargs):
    with pytest.raises(ConfigError):
        MaterialParams(**kwargs)


@pytest.mark.parametrize("kwargs", [dict(grid_step=0.0), dict(picard_tol=-1.0), dict(h_floor=1.0),
                                    dict(picard_max_iters=0)])
def test_solver_validation(kwargs):
    with pytest.raises(ConfigError):
        SolverConfig(**kwargs)


def test_load_config_splits_keys(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"alpha": 3.0, "mu": 0.5, "grid_step": 0.02, "profile": "smooth"}))
    material, solver, extra = load_config(path)
    assert material == MaterialParams(alpha=3.0, mu=0.5)
    assert solver.grid_step == 0.02
    assert extra == {"profile": "smooth"}


def test_load_config_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "alpha": 2.0,\n  "mu": ,\n}\n')
    with pytest.raises(ConfigError, match="line 3"):
        load_config(path)


def test_load_config_rejects_non_numeric():
    with pytest.raises(ConfigError):
        load_config({"mu": "fast"})


@settings(max_examples=200, deadline=None)
@given(alpha=st.floats(0.1, 10), gamma=st.floats(0.1, 10), n1=st.floats(-1, 1))
def test_speed_within_bounds(alpha, gamma, n1):
    p = MaterialParams(alpha=alpha, gamma=gamma)
    c = wave_speed(p, n1)
    assert p.c_lower * (1 - 1e-12) <= c <= p.c_upper * (1 + 1e-12)
    assert abs(wave_speed_deriv(p, n1)) <= director_deriv_bound(p) * (1 + 1e-12)
