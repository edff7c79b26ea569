"""Back from (X, Y) to (t, x): coordinates, fixed-time slices and energy.

``t`` and ``x`` solve ``t_X = p h1 / (2c)``, ``t_Y = q h2 / (2c)``,
``x_X = p h1 / 2``, ``x_Y = -q h2 / 2`` with ``t = 0`` and ``x`` = source
position on the curve.  Since ``t`` is non-decreasing in both lattice
directions, every level set ``t = tau`` crosses each lattice edge at most once
and runs from the top edge of the rectangle to its right edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .energycoords import STATUS_BOUNDARY, EnergyGrid, SolverError
from .model import MaterialParams, wave_speed


class ConsistencyError(SolverError):
    """The X-route and Y-route coordinate integrals disagree too much."""


class SliceRangeError(ValueError):
    """Requested time is outside the span covered by the lattice."""


def integrate_coordinates(grid: EnergyGrid, check: bool = True) -> EnergyGrid:
    """Fill ``grid.T``, ``grid.Xp`` and ``grid.tx_mismatch`` in place.

    Raises ConsistencyError when the route mismatch at some node exceeds
    ``10 * grid_step^2`` (``check=False`` only records it).
    """
    shape = grid.status.shape
    T = np.zeros(shape)
    Xp = np.zeros(shape)
    mism = np.zeros(shape)
    p = grid.params
    K.integrate_tx(grid.X, grid.Y, grid.Xc, grid.Yc, grid.bcol, grid.brow, grid.xcol, grid.xrow,
                   grid.status, grid.U, float(p.alpha), float(p.gamma), T, Xp, mism)
    comp = grid.computed
    T[~comp] = np.nan
    Xp[~comp] = np.nan
    grid.T, grid.Xp, grid.tx_mismatch = T, Xp, mism
    if check:
        step = max(grid.config.step_x, grid.config.step_y)
        worst = float(mism.max())
        if worst > 10.0 * step ** 2:
            i, j = np.unravel_index(int(mism.argmax()), mism.shape)
            raise ConsistencyError(
                f"t/x route mismatch {worst:.3g} > 10 h^2 at cell ({i}, {j})", (int(i), int(j)))
    return grid


def _require_coords(grid):
    if grid.T is None:
        integrate_coordinates(grid)


def jacobian_residual(grid: EnergyGrid) -> float:
    """max |x_X t_Y - x_Y t_X - p q h1 h2 / (2c)| by central differences."""
    _require_coords(grid)
    T, Xp = grid.T, grid.Xp
    hX, hY = grid.config.step_x, grid.config.step_y
    c = grid.computed
    ok = np.zeros_like(c)
    ok[1:-1, 1:-1] = c[1:-1, 1:-1] & c[:-2, 1:-1] & c[2:, 1:-1] & c[1:-1, :-2] & c[1:-1, 2:]
    if not ok.any():
        return 0.0
    sl = (slice(1, -1), slice(1, -1))
    tX = (T[2:, 1:-1] - T[:-2, 1:-1]) / (2 * hX)
    tY = (T[1:-1, 2:] - T[1:-1, :-2]) / (2 * hY)
    xX = (Xp[2:, 1:-1] - Xp[:-2, 1:-1]) / (2 * hX)
    xY = (Xp[1:-1, 2:] - Xp[1:-1, :-2]) / (2 * hY)
    U = grid.U[sl]
    cc = wave_speed(grid.params, np.clip(U[..., 0], -1, 1))
    jac = U[..., K.I_P] * U[..., K.I_Q] * U[..., K.I_H1] * U[..., K.I_H2] / (2 * cc)
    diff = np.abs(xX * tY - xY * tX - jac)
    return float(diff[ok[sl]].max())


def physical_fields(node, params: MaterialParams, h_floor: float = 1e-6):
    """``(n, n_t, n_x, singular)`` from packed node values (..., 13).

    ``n_t = ell/(2 h1) + m/(2 h2)`` and ``n_x = (ell/h1 - m/h2) / (2c)``;
    where h1 or h2 is below ``h_floor`` the derivatives are NaN and the
    flag is set.
    """
    v = np.asarray(node, dtype=float)
    n = v[..., 0:3]
    ell = v[..., 3:6]
    m = v[..., 6:9]
    h1 = v[..., K.I_H1]
    h2 = v[..., K.I_H2]
    singular = (h1 < h_floor) | (h2 < h_floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        R = ell / h1[..., None]
        S = m / h2[..., None]
    c = wave_speed(params, np.clip(n[..., 0], -1.0, 1.0))
    c = np.asarray(c)[..., None]
    nt = 0.5 * (R + S)
    nx = (R - S) / (2.0 * c)
    nt = np.where(singular[..., None], np.nan, nt)
    nx = np.where(singular[..., None], np.nan, nx)
    return n, nt, nx, singular


@dataclass
class TimeSlice:
    """Physical snapshot along ``t = tau``.

    ``x, n, nt, nx, singular`` have one entry per distinct physical point
    (x strictly increasing).  ``X, Y, values`` keep the full level-set
    polyline in energy coordinates, which may contain several lattice points
    with the same x where the map to physical space degenerates.
    """

    tau: float
    x: np.ndarray
    n: np.ndarray
    nt: np.ndarray
    nx: np.ndarray
    singular: np.ndarray
    energy: float
    X: np.ndarray
    Y: np.ndarray
    values: np.ndarray

    @property
    def min_h(self) -> float:
        return float(min(self.values[:, K.I_H1].min(), self.values[:, K.I_H2].min()))

    def unit_defect(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.n, axis=1) - 1.0)))


def _one_form(X, Y, values):
    """Trapezoidal integral of ``p(1-h1)/4 dX - q(1-h2)/4 dY`` along a polyline."""
    a = values[:, K.I_P] * (1.0 - values[:, K.I_H1]) / 4.0
    b = values[:, K.I_Q] * (1.0 - values[:, K.I_H2]) / 4.0
    dX = np.diff(X)
    dY = np.diff(Y)
    return float(np.sum(0.5 * (a[1:] + a[:-1]) * dX - 0.5 * (b[1:] + b[:-1]) * dY))


def _level_set(grid: EnergyGrid, tau: float):
    """Crossing points of ``t = tau`` on lattice edges and curve stubs."""
    T = grid.T
    comp = grid.computed
    U = grid.U
    Xs, Ys = grid.X, grid.Y
    pts_X, pts_Y, pts_v, pts_x = [], [], [], []

    def add(Xa, Ya, va, ta, xa, Xb, Yb, vb, tb, xb):
        s = (tau - ta) / (tb - ta)
        pts_X.append(Xa + s * (Xb - Xa))
        pts_Y.append(Ya + s * (Yb - Ya))
        pts_v.append(va + s * (vb - va))
        pts_x.append(xa + s * (xb - xa))

    # horizontal edges (i, j) -> (i + 1, j)
    a = comp[:-1, :] & comp[1:, :]
    ta, tb = T[:-1, :], T[1:, :]
    hit = a & (ta < tau) & (tb >= tau)
    for i, j in zip(*np.nonzero(hit)):
        add(Xs[i], Ys[j], U[i, j], T[i, j], grid.Xp[i, j],
            Xs[i + 1], Ys[j], U[i + 1, j], T[i + 1, j], grid.Xp[i + 1, j])
    # vertical edges (i, j) -> (i, j + 1)
    a = comp[:, :-1] & comp[:, 1:]
    ta, tb = T[:, :-1], T[:, 1:]
    hit = a & (ta < tau) & (tb >= tau)
    for i, j in zip(*np.nonzero(hit)):
        add(Xs[i], Ys[j], U[i, j], T[i, j], grid.Xp[i, j],
            Xs[i], Ys[j + 1], U[i, j + 1], T[i, j + 1], grid.Xp[i, j + 1])
    # stubs from the curve (t = 0) to the first computed node of a column/row
    for i in range(Xs.size):
        js = np.flatnonzero(comp[i])
        if js.size == 0:
            continue
        j0 = js[0]
        if grid.status[i, j0] != STATUS_BOUNDARY and T[i, j0] >= tau:
            add(Xs[i], grid.Yc[i], grid.bcol[i], 0.0, grid.xcol[i],
                Xs[i], Ys[j0], U[i, j0], T[i, j0], grid.Xp[i, j0])
    for j in range(Ys.size):
        is_ = np.flatnonzero(comp[:, j])
        if is_.size == 0:
            continue
        i0 = is_[0]
        if grid.status[i0, j] != STATUS_BOUNDARY and T[i0, j] >= tau:
            add(grid.Xc[j], Ys[j], grid.brow[j], 0.0, grid.xrow[j],
                Xs[i0], Ys[j], U[i0, j], T[i0, j], grid.Xp[i0, j])
    if not pts_X:
        return np.empty(0), np.empty(0), np.empty((0, K.NV)), np.empty(0)
    X = np.asarray(pts_X)
    Y = np.asarray(pts_Y)
    V = np.asarray(pts_v)
    x = np.asarray(pts_x)
    order = np.lexsort((Y, X - Y))
    X, Y, V, x = X[order], Y[order], V[order], x[order]
    keep = np.ones(X.size, dtype=bool)
    scale = max(grid.config.step_x, grid.config.step_y)
    keep[1:] = (np.abs(np.diff(X)) + np.abs(np.diff(Y))) > 1e-12 * scale
    return X[keep], Y[keep], V[keep], x[keep]


def time_span(grid: EnergyGrid) -> float:
    """Largest tau whose level set lies entirely inside the lattice."""
    _require_coords(grid)
    return float(grid.T[-1, -1])


def extract_time_slice(grid: EnergyGrid, tau: float) -> TimeSlice:
    """Level set ``t(X, Y) = tau`` with linear interpolation on crossed edges.

    ``tau = 0`` returns the curve samples themselves.

    Raises
    ------
    SliceRangeError
        If ``tau`` is negative or not below the time at the top-right corner.
    """
    _require_coords(grid)
    h_floor = grid.config.h_floor
    t_max = time_span(grid)
    if tau < 0 or tau >= t_max:
        raise SliceRangeError(f"tau = {tau:.6g} outside the attainable span [0, {t_max:.6g})")
    if tau == 0:
        curve = grid.curve
        lo, hi = grid.xcol[0], grid.xcol[-1]
        sel = (curve.x >= lo) & (curve.x <= hi)
        X, Y, V, x = curve.X[sel], curve.Y[sel], curve.values[sel], curve.x[sel]
    else:
        X, Y, V, x = _level_set(grid, tau)
        if X.size < 2:
            raise SliceRangeError(f"level set at tau = {tau:.6g} has fewer than two points")
    energy = _one_form(X, Y, V)
    n, nt, nx, sing = physical_fields(V, grid.params, h_floor)
    # one entry per physical point; n is constant across degenerate stretches
    keep = np.ones(x.size, dtype=bool)
    last = x[0]
    for k in range(1, x.size):
        if x[k] > last:
            last = x[k]
        else:
            keep[k] = False
            sing[k - 1] |= sing[k]
    return TimeSlice(tau, x[keep], n[keep], nt[keep], nx[keep], sing[keep], energy, X, Y, V)


def slice_energy(grid: EnergyGrid, tau: float) -> float:
    """Energy at time ``tau`` from the 1-form along the level set."""
    return extract_time_slice(grid, tau).energy


def l2_distance(a: TimeSlice, b: TimeSlice) -> float:
    """L2 norm of ``n_a - n_b`` over the common x range.

    Both slices are linearly interpolated onto the merged node set.
    """
    lo = max(a.x[0], b.x[0])
    hi = min(a.x[-1], b.x[-1])
    if not hi > lo:
        raise ValueError("slices have no overlapping x range")
    xs = np.union1d(a.x[(a.x >= lo) & (a.x <= hi)], b.x[(b.x >= lo) & (b.x <= hi)])
    xs = np.union1d(xs, [lo, hi])
    diff2 = np.zeros_like(xs)
    for k in range(3):
        d = np.interp(xs, a.x, a.n[:, k]) - np.interp(xs, b.x, b.n[:, k])
        diff2 += d * d
    return float(np.sqrt(np.trapezoid(diff2, xs)))


@dataclass
class HoelderFit:
    H: float
    validation_ratio: float   # max over fresh pairs of ratio / H
    pairs: int

    @property
    def ok(self) -> bool:
        return self.validation_ratio <= 1.2


def hoelder_fit(sl: TimeSlice, pairs: int = 2000, seed: int = 0) -> HoelderFit:
    """Fit ``|n(x1) - n(x2)| <= H |x1 - x2|^(1/2)`` on random point pairs.

    ``H`` is the largest ratio on one sample; a second, independent sample
    is then checked against it.
    """
    rng = np.random.default_rng(seed)
    N = sl.x.size
    if N < 2:
        return HoelderFit(0.0, 0.0, 0)

    def ratios(k):
        i = rng.integers(0, N, size=k)
        j = rng.integers(0, N, size=k)
        ok = i != j
        i, j = i[ok], j[ok]
        dx = np.abs(sl.x[i] - sl.x[j])
        dn = np.linalg.norm(sl.n[i] - sl.n[j], axis=1)
        return dn / np.sqrt(dx)

    H = float(ratios(pairs).max())
    check = ratios(pairs)
    return HoelderFit(H, float(check.max() / H) if H > 0 else 0.0, pairs)


def characteristic_integral(grid: EnergyGrid, j: int, tau: float | None = None):
    """Square integral of ``R = n_t + c n_x`` along lattice row ``j``.

    Returns ``(in_t, in_X, bound)``: the trapezoid of ``|R|^2 dt`` using the
    integrated times, the same integral written as ``p |ell|^2 / (2 c h1) dX``,
    and ``int p / (2c) dX``.  Only nodes with ``t <= tau`` are used if given.
    """
    _require_coords(grid)
    cols = np.flatnonzero(grid.computed[:, j])
    if tau is not None:
        cols = cols[grid.T[cols, j] <= tau]
    if cols.size < 2:
        return 0.0, 0.0, 0.0
    V = grid.U[cols, j]
    X = grid.X[cols]
    t = grid.T[cols, j]
    h1 = V[:, K.I_H1]
    ell2 = np.sum(V[:, 3:6] ** 2, axis=1)
    c = wave_speed(grid.params, np.clip(V[:, 0], -1, 1))
    R2 = ell2 / h1 ** 2
    in_t = float(np.trapezoid(R2, t))
    in_X = float(np.trapezoid(V[:, K.I_P] * ell2 / (2 * c * h1), X))
    bound = float(np.trapezoid(V[:, K.I_P] / (2 * c), X))
    return in_t, in_X, bound


def dissipation_residual(grid: EnergyGrid) -> float:
    """Largest cell residual of the discrete dissipation identity.

    Checks ``(p (1 - h1))_Y + (q (1 - h2))_X = -(mu p q / 2c)(h1 + h2 -
    2 h1 h2 + 2 ell.m)`` with edge-averaged differences and the right side
    averaged over the four corners, on cells whose corners are all computed
    lattice nodes.  Second order in the grid step.
    """
    U = grid.U
    a = U[:, :, K.I_P] * (1.0 - U[:, :, K.I_H1])
    b = U[:, :, K.I_Q] * (1.0 - U[:, :, K.I_H2])
    h1, h2 = U[:, :, K.I_H1], U[:, :, K.I_H2]
    lm = np.sum(U[:, :, 3:6] * U[:, :, 6:9], axis=2)
    c = wave_speed(grid.params, np.clip(U[:, :, 0], -1.0, 1.0))
    rhs = -grid.params.mu * U[:, :, K.I_P] * U[:, :, K.I_Q] / (2.0 * c) * (h1 + h2 - 2.0 * h1 * h2 + 2.0 * lm)
    dX = np.diff(grid.X)[:, None]
    dY = np.diff(grid.Y)[None, :]
    a_Y = 0.5 * ((a[:-1, 1:] - a[:-1, :-1]) + (a[1:, 1:] - a[1:, :-1])) / dY
    b_X = 0.5 * ((b[1:, :-1] - b[:-1, :-1]) + (b[1:, 1:] - b[:-1, 1:])) / dX
    f = 0.25 * (rhs[:-1, :-1] + rhs[1:, :-1] + rhs[:-1, 1:] + rhs[1:, 1:])
    comp = grid.computed
    cell = comp[:-1, :-1] & comp[1:, :-1] & comp[:-1, 1:] & comp[1:, 1:]
    if not cell.any():
        return 0.0
    return float(np.max(np.abs(a_Y + b_X - f)[cell]))


def first_crossing(grid: EnergyGrid, level: float = 1e-6, name: str = "h2"):
    """Earliest coordinate time at which ``h1`` or ``h2`` drops below ``level``.

    Returns ``(t, x)`` at that lattice node, or ``(None, None)``.
    """
    _require_coords(grid)
    idx = {"h1": K.I_H1, "h2": K.I_H2}[name]
    mask = grid.computed & (grid.U[:, :, idx] < level)
    if not mask.any():
        return None, None
    t = grid.T[mask]
    k = int(np.argmin(t))
    return float(t[k]), float(grid.Xp[mask][k])


def contained_horizon(grid: EnergyGrid, support: tuple[float, float]) -> float:
    """Latest time for which slices still hold every wave started in ``support``.

    The edges of the determinacy interval move inward and the support spreads
    outward, both at speed at most ``C_U``.
    """
    lo, hi = support
    c_hi = grid.params.c_upper
    room = min(lo - grid.xcol[0], grid.xcol[-1] - hi)
    return max(0.0, room / (2.0 * c_hi))


def data_support(x, *fields, tol: float = 1e-14) -> tuple[float, float]:
    """Smallest interval outside which every field is constant."""
    x = np.asarray(x, dtype=float)
    active = np.zeros(x.size, dtype=bool)
    for f in fields:
        f = np.asarray(f, dtype=float).reshape(x.size, -1)
        active |= np.any(np.abs(np.diff(f, axis=0, prepend=f[:1])) > tol, axis=1)
        active[:-1] |= active[1:].copy()
    if not active.any():
        return 0.0, 0.0
    return float(x[active][0]), float(x[active][-1])
