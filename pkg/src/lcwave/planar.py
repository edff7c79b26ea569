"""Planar reduction ``u_tt + mu u_t - c(u) (c(u) u_x)_x = 0`` in Riemann variables.

With ``R = u_t + c u_x`` and ``S = u_t - c u_x`` the equation becomes a pair of
transport equations with quadratic sources::

    R_t - c R_x = k(u) (R^2 - S^2) - mu/2 (R + S)
    S_t + c S_x = k(u) (S^2 - R^2) - mu/2 (R + S),    k = c'(u) / (4 c(u))

The solver keeps its nodes on forward characteristics (dx/dt = c), so S and
u (du/dt = R along a forward characteristic) are plain ODEs per node.  R is
recovered by tracing the backward characteristic through each new node back
to its foot and interpolating there (monotone cubic).  Because the nodes
converge exactly as the forward characteristics do, the steepening S spike
stays resolved up to the gradient blowup.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .model import MaterialParams, speed_bounds, speed_derivative_planar, wave_speed_planar

OVERFLOW_GUARD = 1e9
DEFAULT_CFL = 0.45
THRESHOLD_FACTOR = 1e3
MAX_STEP_GROWTH = 0.10


class GradientBlowup(RuntimeError):
    """Raised by :func:`evolve_planar` when the Riemann variables overflow
    or neighbouring forward characteristics cross.

    ``state`` is the last state that was still finite and ordered.
    """

    def __init__(self, message, state, time, x):
        super().__init__(message)
        self.state = state
        self.time = time
        self.x = x


@dataclass
class PlanarState:
    time: float
    x: np.ndarray
    u: np.ndarray
    R: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        self.S = np.asarray(self.S, dtype=float)
        if not (self.x.shape == self.u.shape == self.R.shape == self.S.shape):
            raise ValueError("x, u, R, S must have the same shape")
        if self.x.size < 2 or np.any(np.diff(self.x) <= 0):
            raise ValueError("node positions must be strictly increasing")

    @classmethod
    def from_derivatives(cls, params, x, u, ut, ux, time=0.0):
        c = wave_speed_planar(params, u)
        ut = np.asarray(ut, dtype=float)
        ux = np.asarray(ux, dtype=float)
        return cls(time, x, u, ut + c * ux, ut - c * ux)

    def derivatives(self, params):
        """Return ``(u_t, u_x)`` recovered from ``R`` and ``S``."""
        c = wave_speed_planar(params, self.u)
        return 0.5 * (self.R + self.S), (self.R - self.S) / (2.0 * c)

    @property
    def max_abs_R(self) -> float:
        return float(np.max(np.abs(self.R)))

    @property
    def max_abs_S(self) -> float:
        return float(np.max(np.abs(self.S)))

    @property
    def max_gradient(self) -> float:
        return max(self.max_abs_R, self.max_abs_S)


@dataclass(frozen=True)
class BlowupProfileSpec:
    """Initial-data family ``u0 + eps phi(x/eps) + eps^2 eta(eps^(2/3) x)``.

    ``phi`` and ``eta`` are both ``bump_profile(amplitude, skew, .)``.
    """

    u0: float = math.pi / 4
    eps: float = 0.01
    amplitude: float = 1.0
    skew: float = 0.5

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.amplitude > 0:
            raise ValueError("amplitude must be positive")
        if not 0 < self.skew <= 1:
            raise ValueError("skew must lie in (0, 1]")

    @property
    def half_width(self) -> float:
        """Half-width ``eps^(-2/3)`` of the support of the slow bump."""
        return self.eps ** (-2.0 / 3.0)

    def validate(self, params: MaterialParams) -> None:
        """Check the hypotheses of the blowup theorem for ``params``."""
        cp = speed_derivative_planar(params, self.u0)
        if cp <= 0:
            raise ValueError(f"c'(u0) = {cp:.4g} must be positive")
        needed = amplitude_threshold(params, self.u0)
        if params.mu > 0 and not self.amplitude / 2 > needed:
            raise ValueError(
                f"amplitude/2 = {self.amplitude / 2:.4g} must exceed {needed:.4g} for mu = {params.mu}"
            )


@dataclass
class BlowupReport:
    blew_up: bool
    t_star: float | None
    x_star: float | None
    max_gradient: float
    theoretical_bound: float | None
    threshold: float = 0.0

    def as_dict(self) -> dict:
        return {
            "blew_up": self.blew_up,
            "t_star": self.t_star,
            "x_star": self.x_star,
            "max_gradient": self.max_gradient,
            "theoretical_bound": self.theoretical_bound,
            "threshold": self.threshold,
        }


def bump_profile(A, s, a):
    """``A (1 - a^2)^2 (1 - s a)`` on (-1, 1), zero elsewhere (C^1)."""
    a = np.asarray(a, dtype=float)
    inside = np.abs(a) < 1.0
    w = 1.0 - a * a
    out = np.where(inside, A * w * w * (1.0 - s * a), 0.0)
    return float(out) if out.ndim == 0 else out


def bump_profile_deriv(A, s, a):
    a = np.asarray(a, dtype=float)
    inside = np.abs(a) < 1.0
    w = 1.0 - a * a
    out = np.where(inside, A * (-4.0 * a * w * (1.0 - s * a) - s * w * w), 0.0)
    return float(out) if out.ndim == 0 else out


def amplitude_threshold(params: MaterialParams, u0: float) -> float:
    """Right side ``8 mu C_U / (c'(u0) C_L)`` that ``-phi'(0)`` must beat."""
    c_lo, c_hi, _ = speed_bounds(params)
    return 8.0 * params.mu * c_hi / (speed_derivative_planar(params, u0) * c_lo)


def sized_amplitude(params: MaterialParams, u0: float, floor: float = 1.0, margin: float = 1.1) -> float:
    """Smallest convenient amplitude with ``A/2`` clearing the damping threshold."""
    return max(floor, 2.0 * margin * amplitude_threshold(params, u0))


def graded_grid(lo, hi, fine_lo, fine_hi, dx_fine, dx_coarse, growth=1.08):
    """Nodes on [lo, hi]: uniform ``dx_fine`` on [fine_lo, fine_hi], spacing
    growing geometrically outward up to ``dx_coarse``.  Contains 0 if the
    fine window does."""
    if not lo < fine_lo <= fine_hi < hi:
        raise ValueError("need lo < fine_lo <= fine_hi < hi")
    n_fine = max(1, int(round((fine_hi - fine_lo) / dx_fine)))
    if fine_lo < 0 < fine_hi:
        left = np.arange(0.0, fine_lo - 1e-12 * dx_fine, -dx_fine)[::-1]
        right = np.arange(dx_fine, fine_hi + 1e-12 * dx_fine, dx_fine)
        core = np.concatenate([left, right])
    else:
        core = np.linspace(fine_lo, fine_hi, n_fine + 1)

    def outward(start, stop, direction):
        pts, pos, dx = [], start, dx_fine
        while True:
            dx = min(dx * growth, dx_coarse)
            pos = pos + direction * dx
            if (pos - stop) * direction >= -0.5 * dx:
                pts.append(stop)
                return pts
            pts.append(pos)

    left = outward(core[0], lo, -1.0)[::-1]
    right = outward(core[-1], hi, 1.0)
    return np.concatenate([left, core, right])


def blowup_grid(spec: BlowupProfileSpec, params: MaterialParams, t_end: float = 0.0,
                nodes_per_eps: int = 20, dx_coarse: float | None = None) -> np.ndarray:
    """A node set suited to :func:`blowup_initial_data`.

    Fine spacing ``eps / nodes_per_eps`` over the fast bump, graded to
    ``dx_coarse`` across the slow bump, with room on the left for the grid to
    drift right at speed <= C_U for ``t_end`` without losing left-moving waves.
    """
    eps = spec.eps
    L = spec.half_width
    c_hi = params.c_upper
    dx_fine = eps / nodes_per_eps
    if dx_coarse is None:
        dx_coarse = min(0.05, L / 200)
    lo = -L - 1.0 - 2.0 * c_hi * t_end - 2 * dx_coarse
    hi = L + 1.0 + 2 * dx_coarse
    return graded_grid(lo, hi, -1.2 * eps, 1.2 * eps, dx_fine, dx_coarse)


def blowup_initial_data(params: MaterialParams, spec: BlowupProfileSpec, x_grid) -> PlanarState:
    """Sample the blowup data family on ``x_grid``.

    ``u_t = (-c(u) + eps) u_x``, hence ``R = eps u_x`` and
    ``S = (-2 c(u) + eps) u_x`` exactly.
    """
    x = np.asarray(x_grid, dtype=float)
    eps = spec.eps
    c_lo = params.c_lower
    if not eps < c_lo:
        raise ValueError(f"eps = {eps} must be below C_L = {c_lo}")
    L = spec.half_width
    if x.min() > -L - 1.0 or x.max() < L + 1.0:
        raise ValueError(f"grid must cover [{-L - 1.0:.6g}, {L + 1.0:.6g}]")
    A, s = spec.amplitude, spec.skew
    slow = eps ** (2.0 / 3.0) * x
    u = spec.u0 + eps * bump_profile(A, s, x / eps) + eps ** 2 * bump_profile(A, s, slow)
    ux = bump_profile_deriv(A, s, x / eps) + eps ** (8.0 / 3.0) * bump_profile_deriv(A, s, slow)
    c = wave_speed_planar(params, u)
    return PlanarState(0.0, x, u, eps * ux, (-2.0 * c + eps) * ux)


def planar_energy(state: PlanarState) -> float:
    """Trapezoidal ``1/2 int R^2 + S^2 dx`` over the nodes."""
    return float(0.5 * np.trapezoid(state.R ** 2 + state.S ** 2, state.x))


def riemann_sources(params: MaterialParams, u, R, S):
    """Right sides ``(F_R, F_S)`` of the R and S transport equations."""
    c = wave_speed_planar(params, u)
    k = speed_derivative_planar(params, u) / (4.0 * c)
    damp = 0.5 * params.mu * (R + S)
    quad = k * (R * R - S * S)
    return quad - damp, -quad - damp


class _Sampler:
    """Monotone cubic interpolation of (u, R, S); constant beyond the ends."""

    def __init__(self, state: PlanarState):
        self.lo, self.hi = state.x[0], state.x[-1]
        # slopes underflowing in flat regions make PCHIP's harmonic mean overflow harmlessly
        with np.errstate(over="ignore", divide="ignore"):
            self.interp = PchipInterpolator(state.x, np.stack([state.u, state.R, state.S], axis=1), axis=0)

    def __call__(self, xq):
        with np.errstate(over="ignore"):
            vals = self.interp(np.clip(xq, self.lo, self.hi))
        return vals[:, 0], vals[:, 1], vals[:, 2]


def _trace_back(sampler, params, x_arrive, c_arrive, dt, sweeps=3):
    """Foot at time t of the backward characteristic reaching ``x_arrive`` at t + dt."""
    foot = x_arrive + dt * c_arrive
    for _ in range(sweeps):
        uf, _, _ = sampler(foot)
        foot = x_arrive + 0.5 * dt * (c_arrive + wave_speed_planar(params, uf))
    return foot


def _spacing_rate(params, u, R, S):
    """Per-interval ``d ln(dx)/dt``: mean over both ends of ``c'(u) u_x``."""
    c = wave_speed_planar(params, u)
    rho = speed_derivative_planar(params, u) * (R - S) / (2.0 * c)
    return 0.5 * (rho[:-1] + rho[1:])


def _path_integral(params, x, u, R, S):
    """Cumulative ``int F_R / (2c) dx`` over the nodes of one snapshot.

    A backward characteristic sweeps the forward-moving nodes at relative
    speed 2c, so the source it collects while crossing an interval is
    ``F_R * gap / (2c)``.  Squares use neighbour products (``S_i S_{i+1}``),
    which are as accurate as the trapezoid on smooth data and stay bounded
    by the interval energy when the S spike collapses onto a single node.
    """
    um = 0.5 * (u[:-1] + u[1:])
    cm = wave_speed_planar(params, um)
    km = speed_derivative_planar(params, um) / (4.0 * cm)
    src = km * (R[:-1] * R[1:] - S[:-1] * S[1:]) - 0.25 * params.mu * (R[:-1] + R[1:] + S[:-1] + S[1:])
    out = np.zeros(x.size)
    np.cumsum(src * np.diff(x) / (2.0 * cm), out=out[1:])
    return out


def _positions(x_left, gaps):
    out = np.empty(gaps.size + 1)
    out[0] = x_left
    np.cumsum(gaps, out=out[1:])
    out[1:] += x_left
    return out


def evolve_planar(state: PlanarState, params: MaterialParams, dt: float,
                  overflow: float = OVERFLOW_GUARD) -> PlanarState:
    """Advance one step of size ``dt`` (Heun predictor-corrector).

    Callers should keep ``dt <= CFL * h / C_U`` with ``h`` the initial node
    spacing; the backward tracing itself is unconditionally stable.

    The R source is collected along the backward path interval by interval
    (see :func:`_path_integral`) instead of from its two end points, since one
    step may carry the path across the whole steepening S spike.

    Node spacings are advanced in log form with the compression rate
    ``c'(u) u_x`` of the forward characteristics rather than by differencing
    independently moved positions.  This keeps the spacing consistent with the
    S values carried by the nodes (spacing ~ S^-2 in a Riccati collapse), so
    nodes stay ordered right up to the blowup.

    Raises
    ------
    GradientBlowup
        If |R| or |S| exceeds ``overflow`` or a node spacing underflows.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    x, u, R, S = state.x, state.u, state.R, state.S
    sampler = _Sampler(state)
    c0 = wave_speed_planar(params, u)
    _, FS0 = riemann_sources(params, u, R, S)

    gap = np.diff(x)
    rate0 = _spacing_rate(params, u, R, S)
    I0 = _path_integral(params, x, u, R, S)
    labels = np.arange(x.size, dtype=float)

    # predictor
    x1 = _positions(x[0] + dt * c0[0], gap * np.exp(dt * rate0))
    u1 = u + dt * R
    S1 = S + dt * FS0
    c1 = wave_speed_planar(params, u1)
    foot = _trace_back(sampler, params, x1, c1, dt)
    lam = np.interp(foot, x, labels)
    _, Rf, _ = sampler(foot)
    R1 = Rf + (np.interp(lam, labels, I0) - I0)

    # corrector
    _, FS1 = riemann_sources(params, u1, R1, S1)
    rate1 = _spacing_rate(params, u1, R1, S1)
    x2 = _positions(x[0] + 0.5 * dt * (c0[0] + c1[0]), gap * np.exp(0.5 * dt * (rate0 + rate1)))
    u2 = u + 0.5 * dt * (R + R1)
    S2 = S + 0.5 * dt * (FS0 + FS1)
    c2 = wave_speed_planar(params, u2)
    foot = _trace_back(sampler, params, x2, c2, dt)
    lam = np.interp(foot, x, labels)
    _, Rf, _ = sampler(foot)
    I1 = _path_integral(params, x1, u1, R1, S1)
    R2 = Rf + 0.5 * ((np.interp(lam, labels, I0) - I0) + (np.interp(lam, labels, I1) - I1))

    t_new = state.time + dt
    bad = ~(np.isfinite(R2) & np.isfinite(S2)) | (np.abs(R2) > overflow) | (np.abs(S2) > overflow)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise GradientBlowup(f"gradient overflow at t={t_new:.6g}", state, t_new, float(x2[i]))
    if np.any(np.diff(x2) <= 0):
        i = int(np.argmax(np.diff(x2) <= 0))
        raise GradientBlowup(f"node spacing underflow at t={t_new:.6g}", state, t_new, float(x2[i]))
    return PlanarState(t_new, x2, u2, R2, S2)


@dataclass
class PlanarRun:
    """Recorded states plus a per-step time series."""

    states: list
    series: list = field(default_factory=list)  # (t, max|R|, max|S|, energy)
    overflowed: GradientBlowup | None = None

    def __iter__(self):
        return iter(self.states)

    def __len__(self):
        return len(self.states)

    def __getitem__(self, i):
        return self.states[i]


def base_time_step(state: PlanarState, params: MaterialParams, cfl: float = DEFAULT_CFL) -> float:
    return cfl * float(np.min(np.diff(state.x))) / params.c_upper


def run_planar(state: PlanarState, params: MaterialParams, t_end: float, *,
               cfl: float = DEFAULT_CFL, threshold: float | None = None,
               record_every: int = 50, max_growth: float = MAX_STEP_GROWTH,
               callback: Callable[[PlanarState, PlanarState], None] | None = None,
               overflow: float = OVERFLOW_GUARD, min_dt: float | None = None) -> PlanarRun:
    """March until ``t_end``, until max(|R|, |S|) passes ``threshold``, or
    until the gradient guard fires.

    The step is halved whenever max|S| would grow by more than ``max_growth``
    in one step, and relaxed back towards the CFL step afterwards.  If the
    overflow guard fires even at ``min_dt`` (default 1e-9 of the CFL step)
    the run stops and the exception is kept in ``overflowed``.
    """
    dt_base = base_time_step(state, params, cfl)
    if min_dt is None:
        min_dt = 1e-9 * dt_base
    if threshold is None:
        threshold = THRESHOLD_FACTOR * state.max_abs_S
    run = PlanarRun([state], [(state.time, state.max_abs_R, state.max_abs_S, planar_energy(state))])
    dt = dt_base
    steps = 0
    while state.time < t_end - 1e-14 * max(1.0, t_end):
        dt = min(dt, t_end - state.time)
        try:
            new = evolve_planar(state, params, dt, overflow=overflow)
        except GradientBlowup as exc:
            if dt > min_dt:
                dt *= 0.5
                continue
            run.overflowed = exc
            break
        grow_ref = max(state.max_abs_S, 1e-300)
        if new.max_abs_S > (1.0 + max_growth) * grow_ref and state.max_abs_S > 0 and dt > min_dt:
            dt *= 0.5
            continue
        if callback is not None:
            callback(state, new)
        state = new
        steps += 1
        run.series.append((state.time, state.max_abs_R, state.max_abs_S, planar_energy(state)))
        crossed = threshold > 0 and state.max_gradient > threshold
        if crossed or steps % record_every == 0:
            run.states.append(state)
        if crossed:
            break
        if new.max_abs_S < (1.0 + 0.5 * max_growth) * grow_ref or state.max_abs_S == 0:
            dt = min(1.25 * dt, dt_base)
    if run.states[-1] is not state:
        run.states.append(state)
    return run


def blowup_time_bound(params: MaterialParams, u0: float, S00: float) -> float:
    """Upper bound ``16 C_U / (c'(u0) S(0,0))`` on the blowup time."""
    cp = speed_derivative_planar(params, u0)
    if cp <= 0:
        raise ValueError("c'(u0) must be positive")
    if not S00 > 0:
        raise ValueError("S(0,0) must be positive")
    return 16.0 * params.c_upper / (cp * S00)


def initial_s00(state: PlanarState) -> float:
    """S at x = 0 of an initial state (linear interpolation between nodes)."""
    return float(np.interp(0.0, state.x, state.S))


def detect_blowup(run: Sequence[PlanarState], threshold: float | None = None, *,
                  params: MaterialParams | None = None, u0: float | None = None,
                  s00: float | None = None) -> BlowupReport:
    """First recorded time at which max(|R|, |S|) exceeds ``threshold``.

    ``threshold`` defaults to 10^3 times the initial max |S|.  When ``params``
    and ``u0`` are given the theoretical bound is filled in, using the exact
    S(0, 0) of the first state unless ``s00`` overrides it.
    """
    states = list(run)
    if not states:
        raise ValueError("empty run")
    first = states[0]
    if threshold is None:
        threshold = THRESHOLD_FACTOR * first.max_abs_S
    bound = None
    if params is not None and u0 is not None:
        s00 = initial_s00(first) if s00 is None else s00
        try:
            bound = blowup_time_bound(params, u0, s00)
        except ValueError:
            bound = None
    peak = max(s.max_abs_S for s in states)
    for st in states:
        if st.max_gradient > threshold:
            i = int(np.argmax(np.maximum(np.abs(st.R), np.abs(st.S))))
            return BlowupReport(True, st.time, float(st.x[i]), peak, bound, threshold)
    return BlowupReport(False, None, None, peak, bound, threshold)


class TrapezoidMonitor:
    """Sign check R <= 0, S >= 0 inside the characteristic trapezoid.

    The region is bounded on the left by the forward characteristic from the
    origin (the node starting at x = 0) and on the right by the backward
    characteristic from ``x_right`` (default ``eps^(-2/3) - eps^2``).
    """

    def __init__(self, state: PlanarState, params: MaterialParams, spec: BlowupProfileSpec,
                 x_right: float | None = None):
        idx = np.flatnonzero(state.x == 0.0)
        if idx.size != 1:
            raise ValueError("x = 0 must be a node of the initial grid")
        self.origin = int(idx[0])
        self.params = params
        self.x_right = spec.half_width - spec.eps ** 2 if x_right is None else x_right
        self.violations: list[tuple[float, float, float, float]] = []
        self.steps = 0
        self.nodes_checked = 0
        self._check(state)

    def _check(self, state):
        lo = state.x[self.origin]
        inside = (state.x >= lo) & (state.x <= self.x_right)
        self.nodes_checked += int(inside.sum())
        bad = inside & ((state.R > 0) | (state.S < 0))
        for i in np.flatnonzero(bad)[:10]:
            self.violations.append((state.time, state.x[i], state.R[i], state.S[i]))

    def __call__(self, old: PlanarState, new: PlanarState):
        dt = new.time - old.time
        sampler_old, sampler_new = _Sampler(old), _Sampler(new)
        u_old, _, _ = sampler_old(np.array([self.x_right]))
        c_old = wave_speed_planar(self.params, u_old)[0]
        guess = self.x_right - dt * c_old
        u_new, _, _ = sampler_new(np.array([guess]))
        c_new = wave_speed_planar(self.params, u_new)[0]
        self.x_right = self.x_right - 0.5 * dt * (c_old + c_new)
        self.steps += 1
        if self.x_right > new.x[self.origin]:
            self._check(new)

    @property
    def ok(self) -> bool:
        return not self.violations
