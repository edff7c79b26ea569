"""Finite-difference reference solver in physical (t, x) coordinates.

Leapfrog in time with a centered, averaged damping term and a conservative
second-order stencil for ``(c^2 n_x)_x``.  Mirror ghost cells close the
grid; the data must be locally uniform near both ends for the whole run
(checked against the cone of influence).  Only meant for smooth solutions
before any gradient blowup.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .energycoords import DirectorInitialData
from .model import MaterialParams, wave_speed, wave_speed_planar

GUARD_FACTOR = 1e3
DEFAULT_CFL = 0.5
# tolerance deciding which samples count as "quiet" near the edges
QUIET_TOL = 1e-12
TIME_TOL = 1e-9


class NearBlowupError(RuntimeError):
    """The gradient guard tripped; ``last_time`` is the last trusted time."""

    def __init__(self, message, last_time, state=None):
        super().__init__(message)
        self.last_time = last_time
        self.state = state


class ConsistencyError(RuntimeError):
    """Renormalization moved |n| by more than dx^2 in a single step."""


@dataclass
class FDState:
    """Snapshot on a uniform grid.  Planar runs also carry ``u`` and ``ut``."""

    time: float
    x: np.ndarray
    n: np.ndarray
    nt: np.ndarray
    u: np.ndarray | None = None
    ut: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.n = np.asarray(self.n, dtype=float).reshape(-1, 3)
        self.nt = np.asarray(self.nt, dtype=float).reshape(-1, 3)
        if self.x.size < 3 or self.n.shape[0] != self.x.size or self.nt.shape[0] != self.x.size:
            raise ValueError("x, n and nt need matching lengths (at least 3 nodes)")
        if not np.all(np.diff(self.x) > 0):
            raise ValueError("x must be strictly increasing")

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    def nx(self) -> np.ndarray:
        return np.gradient(self.n, self.dx, axis=0)

    def energy(self, params: MaterialParams) -> float:
        """``1/2 int |n_t|^2 + c^2 |n_x|^2 dx`` (trapezoid rule)."""
        c = wave_speed(params, np.clip(self.n[:, 0], -1.0, 1.0))
        dens = np.sum(self.nt ** 2, axis=1) + c ** 2 * np.sum(self.nx() ** 2, axis=1)
        return float(0.5 * np.trapezoid(dens, self.x))


@dataclass
class FDRun:
    states: list[FDState]
    dt: float
    max_correction: float = 0.0
    steps: int = 0
    energies: list[float] = field(default_factory=list)

    def at(self, t: float) -> FDState:
        for s in self.states:
            if abs(s.time - t) <= TIME_TOL * max(1.0, abs(t)):
                return s
        raise KeyError(f"no state at t = {t}")


def _uniform_step(x) -> float:
    x = np.asarray(x, dtype=float)
    d = np.diff(x)
    if d.size < 2 or np.any(d <= 0):
        raise ValueError("grid must have at least 3 strictly increasing nodes")
    dx = float((x[-1] - x[0]) / (x.size - 1))
    if np.max(np.abs(d - dx)) > 1e-9 * max(1.0, dx):
        raise ValueError("grid spacing must be uniform")
    return dx


def _check_padding(x, fields_, speed: float, T: float) -> None:
    """Require that nothing non-uniform can reach an edge before ``T``."""
    active = np.zeros(x.size, dtype=bool)
    for f in fields_:
        f = f.reshape(x.size, -1)
        active |= np.any(np.abs(f - f[:1]) > QUIET_TOL, axis=1) & np.any(np.abs(f - f[-1:]) > QUIET_TOL, axis=1)
        active |= np.any(np.abs(np.diff(f, axis=0, prepend=f[:1])) > QUIET_TOL, axis=1)
    if not active.any():
        return
    reach = speed * T
    lo, hi = x[active][0] - reach, x[active][-1] + reach
    dx = x[1] - x[0]
    if lo < x[0] + 2 * dx or hi > x[-1] - 2 * dx:
        raise ValueError(
            f"domain [{x[0]:.4g}, {x[-1]:.4g}] too small: disturbances reach "
            f"[{lo:.4g}, {hi:.4g}] by T = {T:.4g}")


def _ghost(a):
    """Pad with mirror ghosts (zero normal derivative)."""
    return np.concatenate([a[1:2], a, a[-2:-1]], axis=0)


def _times(times, T) -> list[float]:
    out = sorted({float(t) for t in (times if times is not None else [T])} | {float(T)})
    if out[0] < 0:
        raise ValueError("output times must be non-negative")
    return out


def _leapfrog(y0, v0, x, T, times, dt_max, accel, mu, post=None, guard=None):
    """Shared time loop.

    ``accel(y, v)`` returns the undamped acceleration, ``post(y)`` may
    project ``y`` and return the size of the correction, and
    ``guard(y)`` returns the gradient measure checked against the guard.
    The run is split into segments between output times; each segment is
    restarted by a Taylor step so every output lands on a step.
    Returns a list of ``(t, y, v)`` and the extreme correction.
    """
    out = []
    t_now, y, v = 0.0, y0.copy(), v0.copy()
    max_corr = 0.0
    steps = 0
    g0 = guard(y) if guard else 0.0
    last_good = 0.0
    for t_out in times:
        span = t_out - t_now
        if span <= TIME_TOL:
            out.append((t_out, y.copy(), v.copy()))
            continue
        m = int(np.ceil(span / dt_max - 1e-12))
        dt = span / m
        a0 = accel(y, v) - mu * v
        prev = y
        cur = y + dt * v + 0.5 * dt * dt * a0
        if post:
            max_corr = max(max_corr, post(cur))
        hist = [prev, cur]
        vcur = (cur - prev) / dt + 0.5 * dt * a0  # O(dt^2) velocity at step 1
        lo, hi = 1.0 - 0.5 * mu * dt, 1.0 / (1.0 + 0.5 * mu * dt)
        for k in range(1, m + 1):
            if k >= 2:
                vcur = (3.0 * hist[-1] - 4.0 * hist[-2] + hist[-3]) / (2.0 * dt)
            nxt = (2.0 * hist[-1] - lo * hist[-2] + dt * dt * accel(hist[-1], vcur)) * hi
            if post:
                max_corr = max(max_corr, post(nxt))
            steps += 1
            if not np.all(np.isfinite(nxt)):
                raise NearBlowupError("non-finite values", last_good)
            if guard and g0 > 0 and guard(nxt) > GUARD_FACTOR * g0:
                raise NearBlowupError(
                    f"gradient exceeded {GUARD_FACTOR:g} times its initial size", last_good)
            last_good = t_now + (k + 1) * dt
            hist = hist[-2:] + [nxt]
        # hist[-2] sits at t_out, hist[-1] one step past it
        y = hist[-2]
        v = (hist[-1] - hist[-3]) / (2.0 * dt)
        t_now = t_out
        out.append((t_out, y.copy(), v.copy()))
    return out, max_corr, steps


def fd_solve_planar(u0, ut0, x, params: MaterialParams, T: float, *, cfl: float = DEFAULT_CFL,
                    times: Sequence[float] | None = None) -> FDRun:
    """Leapfrog for ``u_tt + mu u_t = c(u) (c(u) u_x)_x`` on a uniform grid.

    The half-point speed uses the average of neighbouring u values; the time
    step is ``cfl dx / C_U``.  Returns states at ``times`` (plus ``T``).

    Raises
    ------
    NearBlowupError
        If ``max |u_x|`` grows beyond 10^3 times its initial value.
    """
    x = np.asarray(x, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    ut0 = np.asarray(ut0, dtype=float)
    dx = _uniform_step(x)
    if u0.shape != x.shape or ut0.shape != x.shape:
        raise ValueError("u0 and ut0 must match x")
    if not 0 < cfl <= 1:
        raise ValueError("cfl must lie in (0, 1]")
    _check_padding(x, [u0, ut0], params.c_upper, T)
    out_times = _times(times, T)

    def accel(u, _v):
        g = _ghost(u)
        ch = wave_speed_planar(params, 0.5 * (g[1:] + g[:-1]))
        flux = ch * np.diff(g) / dx
        return wave_speed_planar(params, u) * np.diff(flux) / dx

    def grad(u):
        return float(np.max(np.abs(np.diff(u)))) / dx

    dt = cfl * dx / params.c_upper
    snaps, _, steps = _leapfrog(u0, ut0, x, T, out_times, dt, accel, params.mu, guard=grad)
    states = []
    for t, u, ut in snaps:
        z = np.zeros_like(u)
        n = np.stack([np.cos(u), np.sin(u), z], axis=1)
        nt = np.stack([-np.sin(u), np.cos(u), z], axis=1) * ut[:, None]
        states.append(FDState(t, x.copy(), n, nt, u.copy(), ut.copy()))
    run = FDRun(states, dt, 0.0, steps)
    run.energies = [planar_fd_energy(s, params) for s in states]
    return run


def planar_fd_energy(state: FDState, params: MaterialParams) -> float:
    ux = np.gradient(state.u, state.dx)
    c = wave_speed_planar(params, state.u)
    return float(0.5 * np.trapezoid(state.ut ** 2 + (c * ux) ** 2, state.x))


def _resample(initial: DirectorInitialData, dx: float | None):
    x = initial.x
    if dx is None:
        _uniform_step(x)
        return x, initial.n.copy(), initial.nt.copy()
    npts = int(round((x[-1] - x[0]) / dx)) + 1
    xs = np.linspace(x[0], x[-1], npts)
    n = CubicSpline(x, initial.n, axis=0)(xs)
    n /= np.linalg.norm(n, axis=1)[:, None]
    nt = CubicSpline(x, initial.nt, axis=0)(xs)
    nt -= np.einsum("ij,ij->i", nt, n)[:, None] * n
    return xs, n, nt


def fd_solve_director(initial: DirectorInitialData, params: MaterialParams, T: float, *,
                      dx: float | None = None, cfl: float = DEFAULT_CFL,
                      times: Sequence[float] | None = None) -> FDRun:
    """Leapfrog on all three director components with pointwise right sides.

    ``n_t`` inside the source is the second-order backward difference; after
    each step ``n`` is renormalized to the unit sphere.  With ``dx=None`` the
    samples of ``initial`` must already be uniform.

    Raises
    ------
    ConsistencyError
        If a renormalization changes |n| by more than dx^2.
    NearBlowupError
        If ``max |n_x|`` grows beyond 10^3 times its initial value.
    """
    x, n0, nt0 = _resample(initial, dx)
    h = _uniform_step(x)
    if not 0 < cfl <= 1:
        raise ValueError("cfl must lie in (0, 1]")
    _check_padding(x, [n0, nt0], params.c_upper, T)
    out_times = _times(times, T)
    g = np.array([params.gamma, params.alpha, params.alpha])

    def accel(n, v):
        gn = _ghost(n)
        n1h = np.clip(0.5 * (gn[1:, 0] + gn[:-1, 0]), -1.0, 1.0)
        c2h = params.alpha + (params.gamma - params.alpha) * n1h ** 2
        flux = c2h[:, None] * np.diff(gn, axis=0) / h
        div = np.diff(flux, axis=0) / h
        nx = (gn[2:] - gn[:-2]) / (2.0 * h)
        c2 = params.alpha + (params.gamma - params.alpha) * np.clip(n[:, 0], -1.0, 1.0) ** 2
        src = (-np.sum(v * v, axis=1)[:, None]
               + (2.0 * c2[:, None] - g[None, :]) * np.sum(nx * nx, axis=1)[:, None]) * n
        return div + src

    def project(n):
        norm = np.linalg.norm(n, axis=1)
        corr = float(np.max(np.abs(norm - 1.0)))
        n /= norm[:, None]
        if corr > h * h:
            raise ConsistencyError(f"renormalization correction {corr:.3g} exceeds dx^2 = {h * h:.3g}")
        return corr

    def grad(n):
        return float(np.max(np.linalg.norm(np.diff(n, axis=0), axis=1))) / h

    dt = cfl * h / params.c_upper
    snaps, corr, steps = _leapfrog(n0, nt0, x, T, out_times, dt, accel, params.mu,
                                   post=project, guard=grad)
    states = [FDState(t, x.copy(), n, nt) for t, n, nt in snaps]
    run = FDRun(states, dt, corr, steps)
    run.energies = [s.energy(params) for s in states]
    return run


def _field(state, name: str) -> np.ndarray:
    if name == "u":
        if getattr(state, "u", None) is None:
            raise ValueError("state carries no planar field u")
        return np.asarray(state.u, dtype=float)[:, None]
    return np.asarray(state.n, dtype=float)


def _state_time(state) -> float:
    return float(getattr(state, "time", getattr(state, "tau", np.nan)))


@dataclass
class ErrorReport:
    times: list[float]
    linf: list[float]
    l2: list[float]

    @property
    def max_linf(self) -> float:
        return max(self.linf) if self.linf else 0.0

    def rows(self):
        return list(zip(self.times, self.linf, self.l2))


def compare_runs(a, b, times: Sequence[float] | None = None, field_name: str = "n",
                 interval: tuple[float, float] | None = None) -> ErrorReport:
    """L-infinity and L2 differences between two series at common times.

    ``a`` and ``b`` are sequences of snapshots with ``time`` (or ``tau``),
    ``x`` and ``n`` (and ``u`` for ``field_name="u"``), e.g. :class:`FDRun`
    states or reconstructed time slices.  Differences are taken at the nodes
    of ``a`` inside the common x range (optionally clipped to ``interval``),
    with ``b`` evaluated there by cubic splines, so ``b`` should be the finer
    or the uniform series.
    """
    sa = {round(_state_time(s), 9): s for s in a}
    sb = {round(_state_time(s), 9): s for s in b}
    if times is None:
        times = sorted(set(sa) & set(sb))
    report = ErrorReport([], [], [])
    for t in times:
        key = round(float(t), 9)
        if key not in sa or key not in sb:
            raise KeyError(f"time {t} missing from one of the series")
        A, B = sa[key], sb[key]
        lo = max(A.x[0], B.x[0])
        hi = min(A.x[-1], B.x[-1])
        if interval is not None:
            lo, hi = max(lo, interval[0]), min(hi, interval[1])
        if not hi > lo:
            raise ValueError(f"no overlapping domain at t = {t}")
        sel = (A.x >= lo) & (A.x <= hi)
        xs = A.x[sel]
        if xs.size < 2:
            raise ValueError(f"overlap at t = {t} holds fewer than two nodes")
        fc = _field(A, field_name)[sel]
        fb = _field(B, field_name)
        ok = np.all(np.isfinite(fb), axis=1)
        ff = CubicSpline(B.x[ok], fb[ok], axis=0)(xs)
        d = np.linalg.norm(fc - ff, axis=1)
        report.times.append(float(t))
        report.linf.append(float(np.max(d)))
        report.l2.append(float(np.sqrt(np.trapezoid(d * d, xs))))
    return report


def self_convergence(solve: Callable[[float], FDRun], dx: float, times, field_name="n"):
    """Error estimate at spacing ``dx`` from the difference to ``dx / 2``.

    Returns ``(coarse-vs-half report, half-vs-quarter report)``; the ratio of
    their maxima is about 4 for a second-order scheme.
    """
    r1, r2, r4 = solve(dx), solve(dx / 2), solve(dx / 4)
    return (compare_runs(r1.states, r2.states, times, field_name),
            compare_runs(r2.states, r4.states, times, field_name))
