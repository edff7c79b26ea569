import math

import numpy as np
import pytest

from lcwave.energycoords import DirectorInitialData, forward_transform, solve_region
from lcwave.model import MaterialParams, SolverConfig
from lcwave.reconstruct import (SliceRangeError, characteristic_integral, contained_horizon,
                                data_support, extract_time_slice, first_crossing, hoelder_fit,
                                integrate_coordinates, jacobian_residual, l2_distance,
                                physical_fields, slice_energy, time_span)

from conftest import blowup_case, blowup_energy_grid, smooth_curve, smooth_grid


@pytest.fixture(scope="module")
def vacuum_grid():
    params = MaterialParams(alpha=1.5, gamma=1.5)
    x = np.linspace(-3, 3, 601)
    z = np.zeros_like(x)
    data = DirectorInitialData.from_planar(x, z + 0.3, z, z)
    grid = solve_region(forward_transform(data, params), params, SolverConfig(grid_step=0.05))
    return integrate_coordinates(grid)


def test_vacuum_coordinates_are_linear(vacuum_grid):
    # p = q = h1 = h2 = 1: t = (X + Y) / (2c), x = (X - Y) / 2
    g = vacuum_grid
    c = math.sqrt(1.5)
    XX, YY = np.meshgrid(g.X, g.Y, indexing="ij")
    m = g.computed
    np.testing.assert_allclose(g.T[m], ((XX + YY) / (2 * c))[m], atol=1e-12)
    np.testing.assert_allclose(g.Xp[m], ((XX - YY) / 2)[m], atol=1e-12)


def test_vacuum_slices(vacuum_grid):
    sl = extract_time_slice(vacuum_grid, 0.5)
    assert sl.energy == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(sl.n[:, 0], math.cos(0.3), atol=1e-13)
    assert not sl.singular.any()
    # the determinacy interval shrinks at speed c from both ends
    c = math.sqrt(1.5)
    assert sl.x[0] == pytest.approx(-2.0 + c * 0.5, abs=1e-9)
    assert sl.x[-1] == pytest.approx(2.0 - c * 0.5, abs=0.05)


def test_slice_range_errors(vacuum_grid):
    with pytest.raises(SliceRangeError):
        extract_time_slice(vacuum_grid, -0.1)
    with pytest.raises(SliceRangeError):
        extract_time_slice(vacuum_grid, time_span(vacuum_grid) + 0.1)


def test_jacobian_residual_second_order():
    coarse = jacobian_residual(smooth_grid(0.5, step=0.02))
    fine = jacobian_residual(smooth_grid(0.5, step=0.01))
    assert 3.0 < coarse / fine < 5.0


def test_slice_at_zero_reproduces_initial_data():
    grid = smooth_grid(0.5, step=0.01)
    data, _ = smooth_curve(0.5)
    sl = extract_time_slice(grid, 0.0)
    # two different trapezoid rules on a 1e-3 grid
    assert sl.energy == pytest.approx(data.energy(MaterialParams(mu=0.5)), rel=1e-5)
    idx = np.searchsorted(data.x, sl.x)
    np.testing.assert_allclose(sl.n, data.n[idx], atol=1e-12)


def test_slice_fields_consistent_with_finite_difference():
    grid = smooth_grid(0.0, step=0.005)
    sl = extract_time_slice(grid, 0.3)
    assert sl.unit_defect() < 1e-5
    inner = slice(50, -50)
    fd = np.gradient(sl.n, sl.x, axis=0)
    assert np.max(np.abs(fd[inner] - sl.nx[inner])) < 0.02


def test_energy_constant_without_damping():
    grid = smooth_grid(0.0, step=0.01)
    data, _ = smooth_curve(0.0)
    horizon = contained_horizon(grid, data_support(data.x, data.n, data.nt))
    energies = [slice_energy(grid, t) for t in np.linspace(0, horizon, 6)]
    assert np.ptp(energies) < 1e-4


def test_energy_decreases_with_damping():
    grid = smooth_grid(0.5, step=0.01)
    energies = [slice_energy(grid, t) for t in np.linspace(0, 0.6, 6)]
    assert all(b <= a + 1e-4 for a, b in zip(energies, energies[1:]))
    assert energies[-1] < energies[0] - 1e-3


def test_l2_distance_basics():
    grid = smooth_grid(0.5, step=0.01)
    a = extract_time_slice(grid, 0.2)
    b = extract_time_slice(grid, 0.3)
    assert l2_distance(a, a) == 0.0
    assert l2_distance(a, b) == pytest.approx(l2_distance(b, a))
    assert l2_distance(a, b) <= 0.1 * math.sqrt(2 * grid.curve.E0) * 1.05


def test_hoelder_fit_validates():
    fit = hoelder_fit(extract_time_slice(smooth_grid(0.5, step=0.01), 0.4))
    assert fit.H > 0
    assert fit.ok


def test_characteristic_integral_routes_agree():
    grid = smooth_grid(0.5, step=0.01)
    j = grid.Y.size // 2
    in_t, in_X, bound = characteristic_integral(grid, j)
    assert in_t == pytest.approx(in_X, rel=1e-2)
    assert in_X <= bound


def test_physical_fields_flags_singular_nodes(params):
    v = np.zeros(13)
    v[0] = 1.0
    v[9], v[10], v[11], v[12] = 1.0, 1e-9, 1.0, 1.0
    n, nt, nx, sing = physical_fields(v[None, :], params)
    assert sing[0]
    assert np.all(np.isnan(nt[0])) and np.all(np.isnan(nx[0]))
    np.testing.assert_allclose(n[0], [1.0, 0, 0])


def test_smooth_run_has_no_singularity():
    grid = smooth_grid(0.5, step=0.01)
    assert first_crossing(grid) == (None, None)
    assert grid.min_h > 1e-3


def test_singular_points_sit_at_planar_blowup():
    """Slices at and after the planar blowup time flag points next to x_star."""
    _, _, _, _, report, _ = blowup_case(0.0)
    grid = blowup_energy_grid(0.0, 0.01, 0.01)
    for dt in (0.0, 0.01):
        sl = extract_time_slice(grid, report.t_star + dt)
        xs = sl.x[sl.singular]
        assert xs.size >= 1
        c = math.sqrt(1.5)
        assert np.min(np.abs(xs - report.x_star - c * dt)) <= 3 * 0.01
