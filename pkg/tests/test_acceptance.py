"""Acceptance criteria, one test each, at their stated tolerances.

Every test prints a single ``CRITERION k ...: PASS/FAIL`` line with the
measured numbers before asserting.
"""

import csv
import json
import math
import time

import numpy as np
import pytest

from lcwave.cli import main
from lcwave.energycoords import solve_region
from lcwave.model import MaterialParams, SolverConfig
from lcwave.planar import (BlowupProfileSpec, blowup_grid, blowup_initial_data, planar_energy)
from lcwave.reconstruct import (contained_horizon, data_support, extract_time_slice,
                                first_crossing, l2_distance)

from conftest import EPS, U0, blowup_amplitude, blowup_case, blowup_energy_grid, smooth_curve, smooth_grid

# lattice steps for the energy-coordinate runs on the blowup data (X, Y)
BLOWUP_STEPS = {0.0: (0.01, 0.01), 1.0: (0.005, 0.05)}


@pytest.fixture
def verdict(capsys):
    def report(k, title, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {k} {title}: {'PASS' if ok else 'FAIL'} ({detail})")
        return ok
    return report


def _smooth_slices(mu, count=10):
    grid = smooth_grid(mu, step=0.01)
    data, _ = smooth_curve(mu)
    horizon = contained_horizon(grid, data_support(data.x, data.n, data.nt))
    taus = np.linspace(0.0, horizon, count)
    return grid, [extract_time_slice(grid, t) for t in taus]


def test_criterion_1_conserved_quantities(verdict):
    _, curve = smooth_curve(0.5)
    params = MaterialParams(mu=0.5)
    r = 4.0 * curve.E0 + 2.0
    start = time.perf_counter()
    coarse = solve_region(curve, params, SolverConfig(grid_step=0.01, domain_radius=r))
    elapsed = time.perf_counter() - start
    fine = solve_region(curve, params, SolverConfig(grid_step=0.005, domain_radius=r))
    rc, rf = coarse.max_residual(), fine.max_residual()
    ok = rc <= 1e-4 and 3.4 <= rc / rf <= 4.6 and elapsed < 60.0
    verdict(1, "conserved quantities", ok,
            f"E0={curve.E0:.4g} residual(0.01)={rc:.3e} residual(0.005)={rf:.3e} "
            f"ratio={rc / rf:.3f} runtime={elapsed:.1f}s")
    assert ok


def test_criterion_2_energy_monotonicity(verdict):
    _, damped = _smooth_slices(0.5)
    _, free = _smooth_slices(0.0)
    e_d = np.array([s.energy for s in damped])
    e_f = np.array([s.energy for s in free])
    rise = float(np.max(np.diff(e_d)))
    spread = float(np.ptp(e_f))
    ok = rise <= 1e-4 and spread <= 1e-4
    verdict(2, "energy monotonicity", ok,
            f"mu=0.5 energies {e_d[0]:.6f}->{e_d[-1]:.6f} max rise={rise:.2e}; "
            f"mu=0 spread={spread:.2e} over tau<={damped[-1].tau:.3f}")
    assert ok


@pytest.mark.parametrize("mu", [0.0, 1.0])
def test_criterion_3_blowup_reproduction(verdict, mu):
    _, spec, _, _, report, _ = blowup_case(mu)
    grid = blowup_energy_grid(mu, *BLOWUP_STEPS[mu])
    t_h, x_h = first_crossing(grid, 1e-6, "h2")
    planar_ok = report.blew_up and report.t_star <= report.theoretical_bound
    offset = math.inf if t_h is None else abs(t_h - report.t_star) / report.t_star
    ok = planar_ok and offset <= 0.10
    verdict(3, f"blowup reproduction mu={mu:g}", ok,
            f"A={spec.amplitude:.4g} t_star={report.t_star:.4f} bound={report.theoretical_bound:.4f} "
            f"h2<1e-6 at t={t_h if t_h is None else round(t_h, 4)} offset={offset:.1%}")
    assert ok


@pytest.mark.parametrize("mu", [0.0, 1.0])
def test_criterion_4_small_initial_energy(verdict, mu):
    params = MaterialParams(mu=mu)
    A = blowup_amplitude(mu)
    eps = np.array([1e-1, 1e-2, 1e-3])
    energies = []
    for e in eps:
        spec = BlowupProfileSpec(u0=U0, eps=float(e), amplitude=A)
        state = blowup_initial_data(params, spec, blowup_grid(spec, params, nodes_per_eps=200))
        energies.append(planar_energy(state))
    slope = float(np.polyfit(np.log(eps), np.log(energies), 1)[0])
    ok = abs(slope - 1.0) <= 0.15
    verdict(4, f"small initial energy mu={mu:g}", ok,
            f"A={A:.4g} E(0)={', '.join(f'{v:.4g}' for v in energies)} exponent={slope:.4f}")
    assert ok


@pytest.mark.parametrize("mu", [0.0, 1.0])
def test_criterion_5_oracle_equivalence(verdict, mu, tmp_path):
    code = main(["compare-fd", "--mu", str(mu), "--out", str(tmp_path)])
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    with (tmp_path / "compare_fd.csv").open() as fh:
        linf = [float(row["linf_error"]) for row in csv.DictReader(fh)]
    self_err = manifest["self_convergence"]
    gate = 3.0 * max(self_err.values())
    worst = max(linf)
    ok = code == 0 and worst <= gate
    verdict(5, f"oracle equivalence mu={mu:g}", ok,
            f"E0={manifest['E0']:.4g} max Linf={worst:.3e} self-conv fd={self_err['fd']:.3e} "
            f"ec={self_err['energy_coordinates']:.3e} gate={gate:.3e}")
    assert ok


def test_criterion_6_lipschitz_bound(verdict):
    grid, slices = _smooth_slices(0.5)
    E0 = grid.curve.E0
    ratios = [l2_distance(a, b) / ((b.tau - a.tau) * math.sqrt(2.0 * E0))
              for a, b in zip(slices, slices[1:])]
    ok = max(ratios) <= 1.05
    verdict(6, "Lipschitz bound", ok, f"max ratio to dt*sqrt(2 E0)={max(ratios):.4f}")
    assert ok


@pytest.mark.parametrize("mu", [0.0, 1.0])
def test_criterion_7_sign_structure(verdict, mu):
    params, spec, state, _, report, monitor = blowup_case(mu)
    sel = (state.x >= 0) & (state.x < EPS ** (-2.0 / 3.0))
    _, ux = state.derivatives(params)
    initial_ok = bool(np.all(ux[sel] < 0) and np.all(state.R[sel] < 0) and np.all(state.S[sel] > 0))
    ok = initial_ok and monitor.ok and report.blew_up
    verdict(7, f"sign structure mu={mu:g}", ok,
            f"t=0 signs {'hold' if initial_ok else 'violated'} on {int(sel.sum())} nodes; "
            f"{monitor.nodes_checked} tracked node checks over {monitor.steps} steps, "
            f"{len(monitor.violations)} violations")
    assert ok


def test_criterion_8_positivity_and_growth(verdict):
    grids = {
        "smooth mu=0.5 h=0.01": smooth_grid(0.5, step=0.01),
        "smooth mu=0.5 h=0.005": smooth_grid(0.5, step=0.005),
        "smooth mu=0 h=0.01": smooth_grid(0.0, step=0.01),
        "blowup mu=0": blowup_energy_grid(0.0, *BLOWUP_STEPS[0.0]),
        "blowup mu=1": blowup_energy_grid(1.0, *BLOWUP_STEPS[1.0]),
    }
    parts, ok = [], True
    for name, g in grids.items():
        comp = g.computed
        positive = bool(np.all(g.U[comp, 11] > 0) and np.all(g.U[comp, 12] > 0))
        ratio = g.pq_integral_ratio()
        ok &= positive and ratio <= 1.05
        parts.append(f"{name}: p,q>0={positive} ratio={ratio:.3f}")
    verdict(8, "positivity and growth bounds", ok, "; ".join(parts))
    assert ok
