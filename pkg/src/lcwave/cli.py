"""Command-line entry point: ``lcwave {simulate,blowup-demo,verify,compare-fd}``.

Exit codes: 0 pass, 1 verification gate failed, 2 invalid configuration or
input, 3 solver error.  Every run writes ``manifest.json`` next to its CSV and
JSON artifacts.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .energycoords import (DirectorInitialData, SolverError, forward_transform, smooth_director_data,
                           solve_region)
from .model import ConfigError, MaterialParams, SolverConfig, load_config, wave_speed_planar
from .planar import (BlowupProfileSpec, GradientBlowup, TrapezoidMonitor, blowup_grid,
                     blowup_initial_data, blowup_time_bound, detect_blowup, initial_s00,
                     planar_energy, run_planar, sized_amplitude)
from .reconstruct import (SliceRangeError, contained_horizon, data_support, dissipation_residual,
                          extract_time_slice, first_crossing, hoelder_fit, integrate_coordinates,
                          l2_distance, time_span)
from .refsolver import ConsistencyError as FDConsistencyError
from .refsolver import NearBlowupError, compare_runs, fd_solve_director

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
EXPERIMENTS = ("simulate", "blowup-demo", "verify", "compare-fd")
PROFILES = ("vacuum", "smooth", "blowup")
THREADS_ENV = "LCWAVE_THREADS"

# blowup-demo never uses an amplitude below this, so mu = 0 blows up early
DEMO_MIN_AMPLITUDE = 4.0
SINGULAR_LEVEL = 1e-6
ENERGY_TOL = 1e-4
LIPSCHITZ_SLACK = 1.05
PQ_SLACK = 1.05
RESIDUAL_GATE = 1e-4
DEFAULT_FD_TIMES = (0.25, 0.5, 0.75, 1.0)


class InputError(ConfigError):
    """Malformed initial-data file; the message names the row."""


@dataclass
class RunConfig:
    material: MaterialParams
    solver: SolverConfig
    experiment: str
    profile: dict = field(default_factory=lambda: {"name": "smooth"})
    initial_csv: str | None = None
    out: Path = Path("lcwave-out")
    times: list[float] | None = None
    gate: float | None = None
    solver_explicit: set = field(default_factory=set)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.times is not None:
            if any(not math.isfinite(t) or t < 0 for t in self.times):
                raise ConfigError("requested times must be non-negative")
            if list(self.times) != sorted(self.times):
                raise ConfigError("requested times must be sorted")
        name = self.profile.get("name")
        if self.initial_csv is None and name not in PROFILES:
            raise ConfigError(f"unknown profile {name!r}; choose from {', '.join(PROFILES)}")
        if self.gate is not None and not self.gate > 0:
            raise ConfigError("gate must be positive")

    def echo(self) -> dict:
        return {
            "experiment": self.experiment,
            "material": asdict(self.material),
            "solver": asdict(self.solver),
            "profile": self.profile,
            "initial_csv": self.initial_csv,
            "times": self.times,
            "gate": self.gate,
        }


# ---------------------------------------------------------------- input files

def load_initial_csv(path) -> DirectorInitialData:
    """Read ``x,n1,n2,n3,nt1,nt2,nt3`` or planar ``x,u,ut`` samples.

    ``n_x`` is obtained by second-order differencing and projected onto the
    tangent plane of ``n``.  Raises :class:`InputError` naming the offending
    line for malformed rows, |n| off by more than 1e-6 or n . n_t != 0.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        director = ["x", "n1", "n2", "n3", "nt1", "nt2", "nt3"]
        planar = ["x", "u", "ut"]
        if header == director:
            width = 7
        elif header == planar:
            width = 3
        else:
            raise InputError(f"{path}: line 1: expected header {','.join(director)} or {','.join(planar)}")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width:
                raise InputError(f"{path}: line {line_no}: expected {width} columns, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise InputError(f"{path}: line {line_no}: non-numeric entry") from None
            if not all(math.isfinite(v) for v in vals):
                raise InputError(f"{path}: line {line_no}: non-finite entry")
            rows.append((line_no, vals))
    if len(rows) < 2:
        raise InputError(f"{path}: need at least two data rows")
    lines = [r[0] for r in rows]
    data = np.array([r[1] for r in rows])
    x = data[:, 0]
    order = 2 if x.size > 2 else 1
    bad = np.flatnonzero(np.diff(x) <= 0)
    if bad.size:
        raise InputError(f"{path}: line {lines[bad[0] + 1]}: x must be strictly increasing")
    if width == 3:
        u, ut = data[:, 1], data[:, 2]
        return DirectorInitialData.from_planar(x, u, ut, np.gradient(u, x, edge_order=order))
    n, nt = data[:, 1:4], data[:, 4:7]
    dev = np.abs(np.linalg.norm(n, axis=1) - 1.0)
    if dev.max() > 1e-6:
        k = int(np.argmax(dev > 1e-6))
        raise InputError(f"{path}: line {lines[k]}: |n| deviates from 1 by {dev[k]:.3g}")
    dots = np.abs(np.einsum("ij,ij->i", n, nt)) / (1.0 + np.linalg.norm(nt, axis=1))
    if dots.max() > 1e-6:
        k = int(np.argmax(dots > 1e-6))
        raise InputError(f"{path}: line {lines[k]}: n . nt = {dots[k]:.3g} is not zero")
    nx = np.gradient(n, x, axis=0, edge_order=order)
    nx -= np.einsum("ij,ij->i", nx, n)[:, None] * n
    return DirectorInitialData(x, n, nt, nx)


def export_initial_csv(data: DirectorInitialData, path) -> None:
    """Write ``x,n1,n2,n3,nt1,nt2,nt3`` with round-trip precision."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "n1", "n2", "n3", "nt1", "nt2", "nt3"])
        for k in range(data.x.size):
            w.writerow([repr(float(v)) for v in (data.x[k], *data.n[k], *data.nt[k])])


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return repr(float(v))


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


# ------------------------------------------------------------ initial data

def _smooth_profile(cfg: RunConfig, energy_default: float, x_half: float) -> DirectorInitialData:
    prof = cfg.profile
    return smooth_director_data(
        cfg.material,
        energy=float(prof.get("energy", energy_default)),
        x_range=tuple(prof.get("x_range", (-x_half, x_half))),
        spacing=float(prof.get("spacing", 1e-3)),
        width=float(prof.get("width", 0.5)),
        u0=float(prof.get("u0", math.pi / 4)),
        planar=bool(prof.get("planar", False)),
    )


def _blowup_spec(cfg: RunConfig) -> BlowupProfileSpec:
    prof = cfg.profile
    u0 = float(prof.get("u0", math.pi / 4))
    amp = prof.get("amplitude")
    if amp is None:
        amp = sized_amplitude(cfg.material, u0, floor=DEMO_MIN_AMPLITUDE)
    spec = BlowupProfileSpec(u0=u0, eps=float(prof.get("eps", 0.01)), amplitude=float(amp),
                             skew=float(prof.get("skew", 0.5)))
    spec.validate(cfg.material)
    return spec


def _planar_to_director(state, params) -> DirectorInitialData:
    c = wave_speed_planar(params, state.u)
    return DirectorInitialData.from_planar(state.x, state.u, 0.5 * (state.R + state.S),
                                           (state.R - state.S) / (2.0 * c))


def initial_data(cfg: RunConfig, energy_default: float = 0.1, x_half: float = 3.0) -> DirectorInitialData:
    if cfg.initial_csv is not None:
        return load_initial_csv(cfg.initial_csv)
    name = cfg.profile["name"]
    if name == "vacuum":
        lo, hi = cfg.profile.get("x_range", (-x_half, x_half))
        x = np.linspace(lo, hi, int(round((hi - lo) / float(cfg.profile.get("spacing", 1e-2)))) + 1)
        u0 = float(cfg.profile.get("u0", math.pi / 4))
        z = np.zeros_like(x)
        return DirectorInitialData.from_planar(x, u0 + z, z, z)
    if name == "smooth":
        return _smooth_profile(cfg, energy_default, x_half)
    spec = _blowup_spec(cfg)
    return _planar_to_director(blowup_initial_data(cfg.material, spec, blowup_grid(spec, cfg.material)),
                               cfg.material)


# ---------------------------------------------------------------- pipelines

def _solver_for(cfg: RunConfig, energy: float) -> SolverConfig:
    if "domain_radius" in cfg.solver_explicit:
        return cfg.solver
    return cfg.solver.replace(domain_radius=4.0 * energy + 2.0)


def _solve_energy(initial, cfg: RunConfig, solver: SolverConfig, X_range=None):
    curve = forward_transform(initial, cfg.material)
    grid = solve_region(curve, cfg.material, solver, X_range)
    integrate_coordinates(grid, check=False)
    return grid


def _slices(grid, taus):
    span = time_span(grid)
    bad = [t for t in taus if t >= span]
    if bad:
        raise SliceRangeError(f"requested time {bad[0]:.6g} is beyond the span {span:.6g} of the lattice")
    return [extract_time_slice(grid, t) for t in taus]


def _slice_checks(grid, slices, E0):
    energies = [s.energy for s in slices]
    checks = {}
    checks["energy_non_increasing"] = all(b <= a + ENERGY_TOL for a, b in zip(energies, energies[1:]))
    checks["energy_bounded"] = all(e <= E0 + ENERGY_TOL for e in energies)
    lip = []
    for a, b in zip(slices, slices[1:]):
        lip.append(l2_distance(a, b) / ((b.tau - a.tau) * math.sqrt(2.0 * E0)) if E0 > 0 else 0.0)
    checks["lipschitz"] = all(r <= LIPSCHITZ_SLACK for r in lip)
    return checks, energies, lip


def _grid_checks(grid, gate):
    comp = grid.computed
    p, q = grid.U[comp, 11], grid.U[comp, 12]
    ratio = grid.pq_integral_ratio()
    return {
        "pq_positive": bool(np.all(p > 0) and np.all(q > 0)),
        "pq_integral_bound": ratio <= PQ_SLACK,
        "invariant_residual": grid.max_residual() <= gate,
        "dissipation_residual": dissipation_residual(grid) <= gate,
    }


def _grid_record(grid):
    s = grid.summary()
    s["pq_integral_ratio"] = grid.pq_integral_ratio()
    s["dissipation_residual"] = dissipation_residual(grid)
    s["span"] = time_span(grid)
    s["max_tx_mismatch"] = float(np.nanmax(grid.tx_mismatch))
    return s


def _default_taus(grid, initial, count=10):
    horizon = contained_horizon(grid, data_support(initial.x, initial.n, initial.nt))
    t_max = min(0.95 * time_span(grid), horizon)
    if t_max <= 0:
        t_max = 0.5 * time_span(grid)
    return [float(t) for t in np.linspace(0.0, t_max, count)]


def run_simulate(cfg: RunConfig, report: dict) -> int:
    initial = initial_data(cfg)
    E0 = initial.energy(cfg.material)
    solver = _solver_for(cfg, E0)
    grid = _solve_energy(initial, cfg, solver)
    taus = cfg.times if cfg.times is not None else _default_taus(grid, initial)
    slices = _slices(grid, taus)
    checks, energies, lip = _slice_checks(grid, slices, grid.curve.E0)
    checks.update(_grid_checks(grid, cfg.gate or RESIDUAL_GATE))
    for k, sl in enumerate(slices):
        rows = [(sl.x[i], *sl.n[i], *sl.nt[i], *sl.nx[i], sl.singular[i]) for i in range(sl.x.size)]
        _write_csv(cfg.out / f"slice_{k:03d}.csv",
                   ["x", "n1", "n2", "n3", "nt1", "nt2", "nt3", "nx1", "nx2", "nx3", "singular_flag"], rows)
    hoelder = [hoelder_fit(sl).H for sl in slices]
    run = {"taus": taus, "energies": energies, "min_h_per_tau": [sl.min_h for sl in slices],
           "hoelder_H": hoelder, "lipschitz_ratios": lip}
    _write_json(cfg.out / "run.json", run)
    report.update(E0=grid.curve.E0, min_h=grid.min_h, max_invariant_residual=grid.max_residual(),
                  energies=dict(zip(map(str, taus), energies)), checks=checks, grid=_grid_record(grid),
                  artifacts=[f"slice_{k:03d}.csv" for k in range(len(slices))] + ["run.json"])
    return EXIT_PASS


def run_verify(cfg: RunConfig, report: dict) -> int:
    code = run_simulate(cfg, report)
    return code if code != EXIT_PASS else (EXIT_PASS if all(report["checks"].values()) else EXIT_FAIL)


def _blowup_segment(params, t_star, x_star, margin=0.05):
    reach = params.c_upper * t_star
    return x_star - reach - margin, x_star + reach + margin


def run_blowup_demo(cfg: RunConfig, report: dict) -> int:
    params = cfg.material
    cfg.profile = {**cfg.profile, "name": "blowup"}
    spec = _blowup_spec(cfg)
    state = blowup_initial_data(params, spec, blowup_grid(spec, params))
    s00 = initial_s00(state)
    bound = blowup_time_bound(params, spec.u0, s00)
    monitor = TrapezoidMonitor(state, params, spec)
    run = run_planar(state, params, 1.05 * bound, callback=monitor)
    rep = detect_blowup(run.states, params=params, u0=spec.u0, s00=s00)
    _write_csv(cfg.out / "blowup_series.csv", ["t", "max_abs_R", "max_abs_S", "energy"], run.series)
    _write_json(cfg.out / "blowup_report.json", {**rep.as_dict(), "amplitude": spec.amplitude,
                                                 "eps": spec.eps, "S00": s00,
                                                 "sign_structure_ok": monitor.ok})
    checks = {"blew_up": rep.blew_up,
              "t_star_within_bound": bool(rep.blew_up and rep.t_star <= bound),
              "sign_structure": monitor.ok}
    extra = {}
    min_h = 1.0 / (1.0 + rep.max_gradient ** 2)
    if rep.blew_up:
        # energy coordinates on the determinacy interval of the blowup point
        lo, hi = _blowup_segment(params, rep.t_star, rep.x_star)
        initial = _planar_to_director(state, params)
        curve = forward_transform(initial, params)
        X_range = tuple(float(v) for v in np.interp([lo, hi], curve.x, curve.X))
        y_span = float(np.interp(lo, curve.x, curve.Y) - np.interp(hi, curve.x, curve.Y))
        solver = cfg.solver
        if "grid_step_y" not in cfg.solver_explicit:
            solver = solver.replace(grid_step_y=max(solver.step_x, y_span / 20000.0))
        grid = solve_region(curve, params, solver, X_range)
        integrate_coordinates(grid, check=False)
        t_h, x_h = first_crossing(grid, SINGULAR_LEVEL)
        extra = {"first_h2_below_level_t": t_h, "first_h2_below_level_x": x_h,
                 "relative_offset": None if t_h is None else abs(t_h - rep.t_star) / rep.t_star,
                 "x_segment": [lo, hi], "grid": _grid_record(grid)}
        checks["energy_coordinate_singularity"] = t_h is not None
        checks["singular_time_within_10pct"] = t_h is not None and abs(t_h - rep.t_star) <= 0.1 * rep.t_star
        checks.update(_grid_checks(grid, cfg.gate or RESIDUAL_GATE))
        checks.pop("invariant_residual")
        checks.pop("dissipation_residual")
        min_h = min(min_h, grid.min_h)
        report["max_invariant_residual"] = grid.max_residual()
        _write_json(cfg.out / "energy_coordinates.json", extra)
    report.update(E0=planar_energy(state), min_h=min_h,
                  energies={_fmt(t): e for t, _, _, e in run.series[:1] + run.series[-1:]},
                  checks=checks, blowup=rep.as_dict(),
                  artifacts=["blowup_series.csv", "blowup_report.json"]
                  + (["energy_coordinates.json"] if extra else []))
    core = checks["blew_up"] and checks["t_star_within_bound"]
    return EXIT_PASS if core else EXIT_FAIL


def run_compare_fd(cfg: RunConfig, report: dict) -> int:
    params = cfg.material
    times = list(cfg.times) if cfg.times is not None else list(DEFAULT_FD_TIMES)
    T = max(times)
    r = 4.0 * 0.01 + 2.0 + 2.0 * params.c_upper * T
    solver = cfg.solver if "domain_radius" in cfg.solver_explicit else cfg.solver.replace(domain_radius=r)
    # whole tenths keep x = 0 on every FD grid
    half = math.ceil(10.0 * max(solver.domain_radius + 0.6, 1.0 + params.c_upper * T + 0.6)) / 10.0

    def fd(dx):
        d = _fd_initial(cfg, dx, half)
        return fd_solve_director(d, params, T, times=times)

    def ec(step):
        s = solver.replace(grid_step=step, grid_step_y=None if solver.grid_step_y is None
                           else solver.grid_step_y * step / solver.grid_step)
        g = _solve_energy(initial_data(cfg, 0.01, half), cfg, s)
        return g, _slices(g, times)

    h = solver.step_x
    fd1 = fd(h)
    grid, sl1 = ec(h)
    rep = compare_runs(sl1, fd1.states, times)
    gate = cfg.gate
    self_err = {}
    if gate is None:
        fd2 = fd(h / 2)
        _, sl2 = ec(h / 2)
        self_err = {"fd": compare_runs(fd1.states, fd2.states, times).max_linf,
                    "energy_coordinates": compare_runs(sl1, sl2, times).max_linf}
        gate = 3.0 * max(self_err.values())
    _write_csv(cfg.out / "compare_fd.csv", ["time", "linf_error", "l2_error"], rep.rows())
    checks = {"errors_below_gate": all(e < gate for e in rep.linf)}
    report.update(E0=grid.curve.E0, min_h=grid.min_h, max_invariant_residual=grid.max_residual(),
                  energies={_fmt(t): s.energy for t, s in zip(times, sl1)},
                  fd_energies={_fmt(s.time): e for s, e in zip(fd1.states, fd1.energies)},
                  gate=gate, self_convergence=self_err, checks=checks, grid=_grid_record(grid),
                  artifacts=["compare_fd.csv"])
    return EXIT_PASS if checks["errors_below_gate"] else EXIT_FAIL


def _fd_initial(cfg: RunConfig, dx: float, half: float) -> DirectorInitialData:
    if cfg.initial_csv is not None:
        return load_initial_csv(cfg.initial_csv)
    if cfg.profile["name"] == "blowup":
        raise ConfigError("compare-fd needs smooth data; the blowup profile is out of scope")
    sub = RunConfig(cfg.material, cfg.solver, cfg.experiment, {**cfg.profile, "spacing": dx},
                    None, cfg.out, cfg.times, cfg.gate)
    return initial_data(sub, 0.01, half)


PIPELINES = {"simulate": run_simulate, "blowup-demo": run_blowup_demo,
             "verify": run_verify, "compare-fd": run_compare_fd}


# ---------------------------------------------------------------- front end

def _versions() -> dict:
    import numba
    import scipy
    return {"lcwave": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def run(cfg: RunConfig) -> int:
    """Execute one experiment, write artifacts and the manifest, return the exit code."""
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
        probe = cfg.out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory {cfg.out} is not writable: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report: dict = {}
    start = time.perf_counter()
    try:
        code = PIPELINES[cfg.experiment](cfg, report)
    except (ConfigError, SliceRangeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, GradientBlowup, NearBlowupError, FDConsistencyError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        report["error"] = str(exc)
        code = EXIT_SOLVER
    manifest = {
        "config": cfg.echo(),
        "versions": _versions(),
        "wall_time_s": round(time.perf_counter() - start, 3),
        "exit_code": code,
        **report,
    }
    _write_json(cfg.out / "manifest.json", manifest)
    status = {EXIT_PASS: "PASS", EXIT_FAIL: "FAIL", EXIT_SOLVER: "SOLVER ERROR"}[code]
    checks = report.get("checks", {})
    for name, ok in checks.items():
        print(f"{name}: {'ok' if ok else 'FAILED'}")
    print(f"{cfg.experiment}: {status} (artifacts in {cfg.out})")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lcwave", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", default=None, help="output directory (default lcwave-out/<experiment>)")
        p.add_argument("--times", help="comma-separated output times")
        p.add_argument("--grid-step", type=float, help="lattice / FD grid step")
        p.add_argument("--mu", type=float, help="damping coefficient")
        p.add_argument("--eps", type=float, help="eps of the blowup profile")
        p.add_argument("--project", action="store_true", help="project nodes onto the invariants")
        p.add_argument("--profile", choices=PROFILES, help="builtin initial data")
        p.add_argument("--initial", help="initial-data CSV (overrides --profile)")
        p.add_argument("--gate", type=float, help="verification threshold")
    return parser


def config_from_args(args) -> RunConfig:
    source = args.config if args.config else {}
    material, solver, extra = load_config(source)
    explicit = set()
    if args.config:
        data = json.loads(Path(args.config).read_text())
        explicit = {k for k in data if k in asdict(solver)}
    if args.mu is not None:
        material = material.replace(mu=args.mu)
    if args.grid_step is not None:
        solver = solver.replace(grid_step=args.grid_step)
        explicit.add("grid_step")
    if args.project:
        solver = solver.replace(project=True)
    profile = extra.pop("profile", None)
    if isinstance(profile, str):
        profile = {"name": profile}
    if profile is None:
        profile = {"name": "blowup" if args.experiment == "blowup-demo" else "smooth"}
    if not isinstance(profile, dict):
        raise ConfigError("profile must be a name or an object with a 'name' key")
    profile = dict(profile)
    if args.profile:
        profile["name"] = args.profile
    if args.eps is not None:
        profile["eps"] = args.eps
    times = extra.pop("times", None)
    if args.times:
        try:
            times = [float(t) for t in args.times.split(",") if t.strip()]
        except ValueError:
            raise ConfigError(f"--times: cannot parse {args.times!r}") from None
    gate = args.gate if args.gate is not None else extra.pop("gate", None)
    initial = args.initial or extra.pop("initial_csv", None)
    out = Path(args.out) if args.out else Path(extra.pop("out", f"lcwave-out/{args.experiment}"))
    return RunConfig(material, solver, args.experiment, profile, initial, out,
                     None if times is None else [float(t) for t in times],
                     None if gate is None else float(gate), explicit)


def _apply_threads() -> None:
    value = os.environ.get(THREADS_ENV)
    if not value:
        return
    import numba
    try:
        numba.set_num_threads(max(1, min(int(value), numba.config.NUMBA_NUM_THREADS)))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {value!r}") from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _apply_threads()
        cfg = config_from_args(args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
