import math

import numpy as np
import pytest

from lcwave.energycoords import DirectorInitialData
from lcwave.model import MaterialParams
from lcwave.refsolver import (ConsistencyError, NearBlowupError, compare_runs, fd_solve_director,
                              fd_solve_planar, self_convergence)


def bump(x, x0=0.0, w=0.5):
    return np.exp(-((x - x0) / w) ** 2)


def bump_deriv(x, x0=0.0, w=0.5):
    return -2.0 * (x - x0) / w ** 2 * bump(x, x0, w)


def grid(dx, half=6.0):
    return np.linspace(-half, half, int(round(2 * half / dx)) + 1)


def test_constant_planar_state_is_stationary(params):
    x = grid(0.1)
    run = fd_solve_planar(np.full_like(x, 0.4), np.zeros_like(x), x, params, 1.0, times=[0.5, 1.0])
    for s in run.states:
        np.testing.assert_array_equal(s.u, 0.4)
        np.testing.assert_array_equal(s.ut, 0.0)


def test_constant_director_is_stationary(params):
    x = grid(0.1)
    n = np.tile([0.6, 0.8, 0.0], (x.size, 1))
    data = DirectorInitialData(x, n, np.zeros_like(n), np.zeros_like(n))
    run = fd_solve_director(data, params, 1.0)
    np.testing.assert_allclose(run.states[-1].n, n, atol=1e-15)
    np.testing.assert_allclose(run.states[-1].nt, 0.0, atol=1e-15)


def _traveling_error(dx):
    params = MaterialParams(alpha=1.5, gamma=1.5)
    c = math.sqrt(1.5)
    x = grid(dx, half=5.0)
    u0 = 0.3 + 0.2 * bump(x, -1.0)
    ut0 = -c * 0.2 * bump_deriv(x, -1.0)
    run = fd_solve_planar(u0, ut0, x, params, 1.0)
    exact = 0.3 + 0.2 * bump(x, -1.0 + c)
    return float(np.max(np.abs(run.states[-1].u - exact)))


def test_traveling_wave_second_order():
    coarse, fine = _traveling_error(0.02), _traveling_error(0.01)
    assert coarse < 1e-3
    assert 3.4 < coarse / fine < 4.6


def test_uniform_velocity_decays_exponentially():
    params = MaterialParams(alpha=1.5, gamma=1.5, mu=1.0)
    x = grid(0.05)
    run = fd_solve_planar(np.full_like(x, 0.2), np.full_like(x, 0.3), x, params, 1.0,
                          times=[0.5, 1.0])
    for s in run.states[1:]:
        np.testing.assert_allclose(s.ut, 0.3 * math.exp(-s.time), rtol=1e-4)
        np.testing.assert_allclose(s.u, 0.2 + 0.3 * (1 - math.exp(-s.time)), rtol=1e-4)


def test_director_embedding_matches_planar_run():
    params = MaterialParams(mu=0.5)
    errs = []
    for dx in (0.02, 0.01):
        x = grid(dx)
        u0 = 0.5 + 0.3 * bump(x)
        ut0 = 0.2 * bump(x, 0.3)
        ux0 = 0.3 * bump_deriv(x)
        planar = fd_solve_planar(u0, ut0, x, params, 1.0)
        data = DirectorInitialData.from_planar(x, u0, ut0, ux0)
        director = fd_solve_director(data, params, 1.0)
        s = director.states[-1]
        assert np.max(np.abs(s.n[:, 2])) <= 1e-10
        u_dir = np.arctan2(s.n[:, 1], s.n[:, 0])
        errs.append(float(np.max(np.abs(u_dir - planar.states[-1].u))))
    assert errs[0] < 1e-4
    assert errs[0] / errs[1] > 3.0


def test_director_energy_non_increasing():
    params = MaterialParams(mu=0.5)
    x = grid(0.01)
    u0 = 0.5 + 0.3 * bump(x)
    data = DirectorInitialData.from_planar(x, u0, 0.2 * bump(x, 0.3), 0.3 * bump_deriv(x))
    run = fd_solve_director(data, params, 1.0, times=np.linspace(0.1, 1.0, 10))
    e = np.asarray(run.energies)
    assert np.all(np.diff(e) <= 1e-5)
    assert e[-1] < e[0]
    assert run.max_correction <= 0.01 ** 2


def test_padding_is_enforced(params):
    x = grid(0.05, half=2.5)
    with pytest.raises(ValueError, match="too small"):
        fd_solve_planar(0.3 + bump(x), np.zeros_like(x), x, params, 1.0)


def test_nonuniform_grid_rejected(params):
    x = np.sort(np.concatenate([grid(0.1), [0.05]]))
    with pytest.raises(ValueError, match="uniform"):
        fd_solve_planar(np.zeros_like(x), np.zeros_like(x), x, params, 0.1)


def test_gradient_guard_trips(params):
    x = grid(0.02)
    u0 = 0.3 + 1e-9 * bump(x)
    ut0 = 0.5 * bump(x, 0.0, 0.2)
    with pytest.raises(NearBlowupError) as info:
        fd_solve_planar(u0, ut0, x, params, 1.0)
    assert 0.0 <= info.value.last_time < 1.0


def test_non_tangent_velocity_fails_renormalization(params):
    x = grid(0.02)
    n = np.tile([1.0, 0.0, 0.0], (x.size, 1))
    nt = np.zeros_like(n)
    nt[:, 0] = 0.5 * bump(x)   # radial velocity stretches |n| at first order
    data = DirectorInitialData(x, n, nt, np.zeros_like(n))
    with pytest.raises(ConsistencyError):
        fd_solve_director(data, params, 0.5)


def test_compare_identical_runs_is_zero(params):
    x = grid(0.05)
    run = fd_solve_planar(0.3 + 0.2 * bump(x), np.zeros_like(x), x, params, 1.0, times=[0.5, 1.0])
    rep = compare_runs(run.states, run.states)
    assert rep.times == [0.5, 1.0]
    assert rep.max_linf == 0.0 and max(rep.l2) == 0.0
    rep_u = compare_runs(run.states, run.states, field_name="u")
    assert rep_u.max_linf == 0.0


def test_compare_requires_overlap(params):
    a = fd_solve_planar(np.zeros(11), np.zeros(11), np.linspace(0, 1, 11), params, 0.1).states
    b = fd_solve_planar(np.zeros(11), np.zeros(11), np.linspace(2, 3, 11), params, 0.1).states
    with pytest.raises(ValueError, match="overlap"):
        compare_runs(a, b)


def test_director_self_convergence_second_order():
    params = MaterialParams(mu=1.0)
    x = grid(0.0025)
    u0 = 0.5 + 0.3 * bump(x)
    data = DirectorInitialData.from_planar(x, u0, 0.2 * bump(x, 0.3), 0.3 * bump_deriv(x))

    def solve(dx):
        return fd_solve_director(data, params, 1.0, dx=dx, times=[0.5, 1.0])

    r1, r2 = self_convergence(solve, 0.04, [0.5, 1.0])
    assert 3.4 < r1.max_linf / r2.max_linf < 4.6
