import functools
import math

import numpy as np
import pytest

from lcwave.cli import _planar_to_director
from lcwave.energycoords import forward_transform, smooth_director_data, solve_region
from lcwave.model import MaterialParams, SolverConfig
from lcwave.planar import (BlowupProfileSpec, TrapezoidMonitor, blowup_grid, blowup_initial_data,
                           blowup_time_bound, detect_blowup, initial_s00, run_planar,
                           sized_amplitude)
from lcwave.reconstruct import integrate_coordinates

U0 = math.pi / 4
EPS = 0.01


@functools.lru_cache(maxsize=None)
def smooth_curve(mu, energy=0.1, x_half=3.0, planar=False):
    params = MaterialParams(mu=mu)
    data = smooth_director_data(params, energy=energy, x_range=(-x_half, x_half), planar=planar)
    return data, forward_transform(data, params)


@functools.lru_cache(maxsize=None)
def smooth_grid(mu, step=0.01, energy=0.1, radius=None, planar=False):
    """Lattice solution for the smooth pulse, with t and x integrated."""
    params = MaterialParams(mu=mu)
    _, curve = smooth_curve(mu, energy, 3.0 if radius is None else radius + 0.7, planar)
    r = 4.0 * energy + 2.0 if radius is None else radius
    grid = solve_region(curve, params, SolverConfig(grid_step=step, domain_radius=r))
    integrate_coordinates(grid)
    return grid


def blowup_amplitude(mu):
    # mu = 0 has no amplitude condition; A = 4 keeps the run short
    return sized_amplitude(MaterialParams(mu=mu), U0, floor=4.0)


@functools.lru_cache(maxsize=None)
def blowup_case(mu):
    """Planar run on the blowup data, with its report and sign monitor."""
    params = MaterialParams(mu=mu)
    spec = BlowupProfileSpec(u0=U0, eps=EPS, amplitude=blowup_amplitude(mu))
    state = blowup_initial_data(params, spec, blowup_grid(spec, params))
    s00 = initial_s00(state)
    bound = blowup_time_bound(params, U0, s00)
    monitor = TrapezoidMonitor(state, params, spec)
    run = run_planar(state, params, 1.05 * bound, callback=monitor)
    report = detect_blowup(run.states, params=params, u0=U0, s00=s00)
    return params, spec, state, run, report, monitor


@functools.lru_cache(maxsize=None)
def blowup_energy_grid(mu, step, step_y):
    """Energy-coordinate lattice over the determinacy interval of the blowup point."""
    params, _, state, _, report, _ = blowup_case(mu)
    curve = forward_transform(_planar_to_director(state, params), params)
    reach = params.c_upper * report.t_star + 0.05
    lo, hi = report.x_star - reach, report.x_star + reach
    X_range = tuple(float(v) for v in np.interp([lo, hi], curve.x, curve.X))
    grid = solve_region(curve, params, SolverConfig(grid_step=step, grid_step_y=step_y), X_range)
    integrate_coordinates(grid, check=False)
    return grid


@pytest.fixture
def params():
    return MaterialParams()
