"""Energy-dependent coordinates: boundary curve and the Goursat marcher.

Physical data at t = 0 are mapped onto the curve ``Y = phi(X)`` with
``X(x) = int_0^x (1 + |R|^2)`` and ``Y(x) = int_x^0 (1 + |S|^2)``, where
``R = n_t + c n_x`` and ``S = n_t - c n_x``.  On the lattice above the curve
the semi-linear system for ``(n, ell, m, h1, h2, p, q)`` is integrated cell by
cell: ``ell, h1, p`` along Y, ``m, h2, q`` along X, and ``n`` along both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import PchipInterpolator

from . import _kernels as K
from .model import MaterialParams, SolverConfig, director_deriv_bound, wave_speed

UNIT_TOL = 1e-12

STATUS_OUTSIDE = K.STATUS_OUTSIDE
STATUS_BOUNDARY = K.STATUS_BOUNDARY
STATUS_INTERIOR = K.STATUS_INTERIOR
STATUS_SINGULAR = K.STATUS_SINGULAR


class SolverError(RuntimeError):
    """The lattice march could not continue (non-convergence, p or q <= 0, ...)."""

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


@dataclass
class DirectorInitialData:
    """Samples of ``n``, ``n_t`` and ``n_x`` at t = 0 (arrays of shape (N, 3))."""

    x: np.ndarray
    n: np.ndarray
    nt: np.ndarray
    nx: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.n = np.asarray(self.n, dtype=float).reshape(-1, 3)
        self.nt = np.asarray(self.nt, dtype=float).reshape(-1, 3)
        self.nx = np.asarray(self.nx, dtype=float).reshape(-1, 3)
        N = self.x.size
        if not (self.n.shape[0] == self.nt.shape[0] == self.nx.shape[0] == N):
            raise ValueError("x, n, nt, nx must have the same number of samples")
        if N < 2 or np.any(np.diff(self.x) <= 0):
            raise ValueError("sample positions must be strictly increasing")

    def check(self, tol: float = UNIT_TOL) -> None:
        """Raise ValueError if |n| = 1, n.n_t = 0 or n.n_x = 0 fails."""
        for name, arr in (("n", self.n), ("nt", self.nt), ("nx", self.nx)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite values in {name}")
        dev = np.abs(np.linalg.norm(self.n, axis=1) - 1.0)
        if dev.max() > tol:
            raise ValueError(f"|n| deviates from 1 by {dev.max():.3g} at sample {int(dev.argmax())}")
        for name, arr in (("nt", self.nt), ("nx", self.nx)):
            dot = np.abs(np.einsum("ij,ij->i", self.n, arr))
            scale = 1.0 + np.linalg.norm(arr, axis=1)
            if (dot / scale).max() > max(tol, 1e-9):
                raise ValueError(f"n . {name} != 0 at sample {int((dot / scale).argmax())}")

    @classmethod
    def from_planar(cls, x, u, ut, ux):
        """Embed planar data as ``n = (cos u, sin u, 0)``."""
        u = np.asarray(u, dtype=float)
        z = np.zeros_like(u)
        n = np.stack([np.cos(u), np.sin(u), z], axis=1)
        dn = np.stack([-np.sin(u), np.cos(u), z], axis=1)
        return cls(x, n, dn * np.asarray(ut, dtype=float)[:, None], dn * np.asarray(ux, dtype=float)[:, None])

    def riemann(self, params: MaterialParams):
        c = wave_speed(params, np.clip(self.n[:, 0], -1.0, 1.0))[:, None]
        return self.nt + c * self.nx, self.nt - c * self.nx

    def energy(self, params: MaterialParams) -> float:
        """``1/2 int |n_t|^2 + c^2 |n_x|^2 dx`` by the trapezoid rule."""
        c = wave_speed(params, np.clip(self.n[:, 0], -1.0, 1.0))
        dens = np.sum(self.nt ** 2, axis=1) + c ** 2 * np.sum(self.nx ** 2, axis=1)
        return float(0.5 * np.trapezoid(dens, self.x))


def _pack(n, ell, m, h1, h2, p, q):
    out = np.empty((np.shape(h1)[0], K.NV))
    out[:, K.I_N:K.I_N + 3] = n
    out[:, K.I_L:K.I_L + 3] = ell
    out[:, K.I_M:K.I_M + 3] = m
    out[:, K.I_H1] = h1
    out[:, K.I_H2] = h2
    out[:, K.I_P] = p
    out[:, K.I_Q] = q
    return out


def _curve_values(n, R, S):
    """Boundary unknowns built from n, R, S (p = q = 1)."""
    h1 = 1.0 / (1.0 + np.sum(R * R, axis=1))
    h2 = 1.0 / (1.0 + np.sum(S * S, axis=1))
    ones = np.ones_like(h1)
    return _pack(n, R * h1[:, None], S * h2[:, None], h1, h2, ones, ones)


@dataclass
class BoundaryCurve:
    """The image of t = 0 in (X, Y): samples ordered by source position x."""

    x: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    n: np.ndarray
    R: np.ndarray
    S: np.ndarray
    E0: float
    params: MaterialParams
    values: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.values is None:
            self.values = _curve_values(self.n, self.R, self.S)
        if np.any(np.diff(self.X) <= 0) or np.any(np.diff(self.Y) >= 0):
            raise ValueError("X must increase and Y decrease along the curve")
        self._x_of_X = PchipInterpolator(self.X, self.x)
        self._x_of_negY = PchipInterpolator(-self.Y, self.x)
        self._fields = PchipInterpolator(self.x, np.hstack([self.n, self.R, self.S]), axis=0)
        self._X_of_x = PchipInterpolator(self.x, self.X)
        self._Y_of_x = PchipInterpolator(self.x, self.Y)

    @property
    def ell(self):
        return self.values[:, K.I_L:K.I_L + 3]

    @property
    def m(self):
        return self.values[:, K.I_M:K.I_M + 3]

    @property
    def h1(self):
        return self.values[:, K.I_H1]

    @property
    def h2(self):
        return self.values[:, K.I_H2]

    @property
    def p(self):
        return self.values[:, K.I_P]

    @property
    def q(self):
        return self.values[:, K.I_Q]

    @property
    def energy(self) -> float:
        """Physical energy ``1/2 int |n_t|^2 + c^2 |n_x|^2`` (equals ``E0``)."""
        return self.E0

    def phi(self, X):
        """``Y`` on the curve as a function of ``X``."""
        return self._Y_of_x(self.x_of_X(X))

    def phi_inv(self, Y):
        return self._X_of_x(self.x_of_Y(Y))

    def x_of_X(self, X):
        return self._x_of_X(np.clip(X, self.X[0], self.X[-1]))

    def x_of_Y(self, Y):
        return self._x_of_negY(np.clip(-np.asarray(Y, dtype=float), -self.Y[0], -self.Y[-1]))

    def resample(self, xq):
        """Curve unknowns at source positions ``xq``.

        ``n``, ``R`` and ``S`` are interpolated, then ``n`` is renormalised and
        ``R``, ``S`` are made orthogonal to it before the unknowns are rebuilt,
        so every invariant holds exactly at the returned points.
        """
        xq = np.atleast_1d(np.asarray(xq, dtype=float))
        f = self._fields(xq)
        n = f[:, 0:3]
        n = n / np.linalg.norm(n, axis=1)[:, None]
        R = f[:, 3:6]
        S = f[:, 6:9]
        R = R - np.einsum("ij,ij->i", R, n)[:, None] * n
        S = S - np.einsum("ij,ij->i", S, n)[:, None] * n
        return _curve_values(n, R, S)


def forward_transform(initial: DirectorInitialData, params: MaterialParams,
                      check: bool = True) -> BoundaryCurve:
    """Map t = 0 data onto the boundary curve (p = q = 1 on it).

    ``E0 = 1/4 int |R|^2 + |S|^2 dx``, which is the same number as the
    physical energy ``1/2 int |n_t|^2 + c^2 |n_x|^2 dx``.
    """
    if check:
        initial.check()
    R, S = initial.riemann(params)
    if not (np.all(np.isfinite(R)) and np.all(np.isfinite(S))):
        raise ValueError("R and S must be finite")
    x = initial.x
    if not x[0] <= 0.0 <= x[-1]:
        raise ValueError("samples must include x = 0 in their range")
    r2 = np.sum(R * R, axis=1)
    s2 = np.sum(S * S, axis=1)
    cx = cumulative_trapezoid(1.0 + r2, x, initial=0.0)
    cy = cumulative_trapezoid(1.0 + s2, x, initial=0.0)
    X = cx - np.interp(0.0, x, cx)
    Y = -(cy - np.interp(0.0, x, cy))
    E0 = 0.25 * float(np.trapezoid(r2 + s2, x))
    return BoundaryCurve(x, X, Y, initial.n.copy(), R, S, E0, params)


def lattice_rhs(node, params: MaterialParams) -> dict:
    """All right sides of the system at one node.

    ``node`` is a mapping with keys n, ell, m, h1, h2, p, q (or a packed
    13-vector).  Returns a dict with ell_Y, m_X, n_Y, n_X, h1_Y, h2_X, p_Y, q_X.
    """
    v = _as_vector(node)
    out = np.empty(K.NR)
    K.rhs(v, float(params.alpha), float(params.gamma), float(params.mu), out)
    return {
        "ell_Y": out[0:3].copy(), "m_X": out[3:6].copy(),
        "n_Y": out[6:9].copy(), "n_X": out[9:12].copy(),
        "h1_Y": float(out[12]), "h2_X": float(out[13]),
        "p_Y": float(out[14]), "q_X": float(out[15]),
    }


rhs_2_19 = lattice_rhs


def _as_vector(node) -> np.ndarray:
    if isinstance(node, dict):
        return _pack(np.atleast_2d(node["n"]), np.atleast_2d(node["ell"]), np.atleast_2d(node["m"]),
                     np.atleast_1d(node["h1"]), np.atleast_1d(node["h2"]),
                     np.atleast_1d(node["p"]), np.atleast_1d(node["q"]))[0]
    v = np.asarray(node, dtype=float)
    if v.shape != (K.NV,):
        raise ValueError(f"packed node must have {K.NV} entries")
    return v


def invariant_residuals(node) -> np.ndarray:
    """``(ell.n, m.n, |n|^2-1, |ell|^2+h1^2-h1, |m|^2+h2^2-h2)``.

    Accepts a node mapping, a packed 13-vector or an array ``(..., 13)``.
    """
    v = _as_vector(node) if isinstance(node, dict) else np.asarray(node, dtype=float)
    n = v[..., K.I_N:K.I_N + 3]
    ell = v[..., K.I_L:K.I_L + 3]
    m = v[..., K.I_M:K.I_M + 3]
    h1 = v[..., K.I_H1]
    h2 = v[..., K.I_H2]
    return np.stack([
        np.sum(ell * n, axis=-1),
        np.sum(m * n, axis=-1),
        np.sum(n * n, axis=-1) - 1.0,
        np.sum(ell * ell, axis=-1) + h1 * h1 - h1,
        np.sum(m * m, axis=-1) + h2 * h2 - h2,
    ], axis=-1)


def growth_constant(params: MaterialParams) -> float:
    """A constant ``C0`` bounding the bracket in the p and q equations per unit q (or p).

    With ``|ell_1 - m_1| <= 1`` and ``0 <= h_2 - h_1 h_2 + ell.m <= 5/4`` the
    bracket divided by ``2c`` is at most ``C_N / (4 C_L^2) + 5 mu / (8 C_L)``.
    """
    c_lo = params.c_lower
    return director_deriv_bound(params) / (4.0 * c_lo ** 2) + 1.25 * params.mu / (2.0 * c_lo)


@dataclass
class EnergyGrid:
    """Lattice solution over the determinacy rectangle of a curve segment."""

    X: np.ndarray
    Y: np.ndarray
    U: np.ndarray            # (nX, nY, 13)
    status: np.ndarray       # (nX, nY) int8
    Yc: np.ndarray           # column/curve crossings
    Xc: np.ndarray           # row/curve crossings
    bcol: np.ndarray
    brow: np.ndarray
    xcol: np.ndarray
    xrow: np.ndarray
    n_mismatch: np.ndarray
    iterations: np.ndarray
    curve: BoundaryCurve
    params: MaterialParams
    config: SolverConfig
    T: np.ndarray | None = None
    Xp: np.ndarray | None = None
    tx_mismatch: np.ndarray | None = None

    @property
    def computed(self) -> np.ndarray:
        return self.status != STATUS_OUTSIDE

    @property
    def interior(self) -> np.ndarray:
        return (self.status == STATUS_INTERIOR) | (self.status == STATUS_SINGULAR)

    def field(self, name: str) -> np.ndarray:
        sl = {"n": slice(0, 3), "ell": slice(3, 6), "m": slice(6, 9), "h1": K.I_H1,
              "h2": K.I_H2, "p": K.I_P, "q": K.I_Q}[name]
        return self.U[:, :, sl]

    def residuals(self) -> np.ndarray:
        """Invariant residuals, shape (nX, nY, 5); zero at uncomputed nodes."""
        res = invariant_residuals(self.U)
        res[~self.computed] = 0.0
        return res

    def max_residual(self, interior_only: bool = True) -> float:
        mask = self.interior if interior_only else self.computed
        if not mask.any():
            return 0.0
        return float(np.max(np.abs(invariant_residuals(self.U[mask]))))

    @property
    def min_h(self) -> float:
        m = self.computed
        return float(min(self.U[m, K.I_H1].min(), self.U[m, K.I_H2].min()))

    def pq_bound(self) -> np.ndarray:
        """``exp(2 C0 (|X| + |Y| + 4 E0))`` at every node."""
        C0 = growth_constant(self.params)
        XX, YY = np.meshgrid(self.X, self.Y, indexing="ij")
        with np.errstate(over="ignore"):
            return np.exp(2.0 * C0 * (np.abs(XX) + np.abs(YY) + 4.0 * self.curve.E0))

    def pq_bound_ratio(self) -> float:
        """max over computed nodes of max(p, q) / exp-bound (monitor, should be <= 1)."""
        m = self.computed
        b = self.pq_bound()[m]
        return float(max((self.U[m, K.I_P] / b).max(), (self.U[m, K.I_Q] / b).max()))

    def pq_integrals(self):
        """Row integral of p from the curve plus column integral of q from the curve.

        Returns ``(lhs, rhs)`` arrays over the lattice (NaN outside) where
        ``rhs = 2 (|X| + |Y| + 4 E0)``.
        """
        nX, nY = self.X.size, self.Y.size
        P = self.U[:, :, K.I_P]
        Q = self.U[:, :, K.I_Q]
        comp = self.computed
        row = np.full((nX, nY), np.nan)
        col = np.full((nX, nY), np.nan)
        for j in range(nY):
            acc, prev_i = None, None
            for i in range(nX):
                if not comp[i, j]:
                    continue
                if prev_i is None:
                    # partial step from the crossing point (p = 1 there)
                    acc = 0.5 * (self.X[i] - self.Xc[j]) * (1.0 + P[i, j])
                else:
                    acc += 0.5 * (self.X[i] - self.X[prev_i]) * (P[prev_i, j] + P[i, j])
                row[i, j] = acc
                prev_i = i
        for i in range(nX):
            js = np.flatnonzero(comp[i])
            if js.size == 0:
                continue
            j0 = js[0]
            qs = Q[i, j0:]
            partial = 0.5 * (self.Y[j0] - self.Yc[i]) * (1.0 + qs[0])
            cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(self.Y[j0:]) * (qs[1:] + qs[:-1]))])
            col[i, j0:] = partial + cum
        XX, YY = np.meshgrid(self.X, self.Y, indexing="ij")
        rhs = 2.0 * (np.abs(XX) + np.abs(YY) + 4.0 * self.curve.E0)
        lhs = row + col
        lhs[~comp] = np.nan
        return lhs, rhs

    def pq_integral_ratio(self) -> float:
        lhs, rhs = self.pq_integrals()
        m = self.computed
        a, b = lhs[m], rhs[m]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(b > 0, a / b, np.where(a <= 0, 0.0, np.inf))
        return float(np.nanmax(ratio))

    def summary(self) -> dict:
        return {
            "E0": self.curve.E0,
            "r": self.config.domain_radius,
            "grid_step": self.config.step_x,
            "grid_step_y": self.config.step_y,
            "nodes": int(self.computed.sum()),
            "max_invariant_residual": self.max_residual(),
            "min_h": self.min_h,
            "singular_nodes": int((self.status == STATUS_SINGULAR).sum()),
            "max_n_route_mismatch": float(self.n_mismatch.max()),
            "pq_bound_ratio": self.pq_bound_ratio(),
        }


def build_lattice(curve: BoundaryCurve, config: SolverConfig, X_range=None):
    """Lattice axes for the determinacy rectangle of ``X in X_range``.

    ``X_range`` defaults to ``(-r, r)``.  Columns start at the left end with
    spacing ``step_x``; rows run from ``phi(X_last)`` up to ``phi(X_first)``
    with spacing ``step_y``.
    """
    Xa, Xb = (-config.domain_radius, config.domain_radius) if X_range is None else X_range
    if Xa < curve.X[0] or Xb > curve.X[-1]:
        raise ValueError(f"curve covers X in [{curve.X[0]:.6g}, {curve.X[-1]:.6g}], "
                         f"need [{Xa:.6g}, {Xb:.6g}]; sample a wider x range")
    hX, hY = config.step_x, config.step_y
    nX = int(math.floor((Xb - Xa) / hX + 1e-9)) + 1
    Xs = Xa + hX * np.arange(nX)
    Y0 = float(curve.phi(Xs[-1]))
    Ytop = float(curve.phi(Xs[0]))
    nY = int(math.floor((Ytop - Y0) / hY + 1e-9)) + 1
    Ys = Y0 + hY * np.arange(nY)
    return Xs, Ys


def solve_region(curve: BoundaryCurve, params: MaterialParams, config: SolverConfig,
                 X_range=None) -> EnergyGrid:
    """Integrate the system over the lattice above the curve.

    Raises
    ------
    SolverError
        On Picard non-convergence, non-positive p or q, an h overshoot
        beyond ``grid_step^2``, or non-finite values; names the cell.
    """
    Xs, Ys = build_lattice(curve, config, X_range)
    Yc = np.asarray(curve.phi(Xs), dtype=float)
    Xc = np.asarray(curve.phi_inv(Ys), dtype=float)
    xcol = np.asarray(curve.x_of_X(Xs), dtype=float)
    xrow = np.asarray(curve.x_of_Y(Ys), dtype=float)
    bcol = np.ascontiguousarray(curve.resample(xcol))
    brow = np.ascontiguousarray(curve.resample(xrow))
    nX, nY = Xs.size, Ys.size
    U = np.zeros((nX, nY, K.NV))
    status = np.zeros((nX, nY), dtype=np.int8)
    mism = np.zeros((nX, nY))
    iters = np.zeros((nX, nY), dtype=np.int32)
    clamp_tol = max(config.step_x, config.step_y) ** 2
    err, ei, ej = K.march(Xs, Ys, Yc, Xc, bcol, brow, float(params.alpha), float(params.gamma),
                          float(params.mu), float(config.picard_tol), int(config.picard_max_iters),
                          float(config.h_floor), clamp_tol, bool(config.project), U, status, mism, iters)
    if err != K.ERR_NONE:
        reason = {
            K.ERR_PICARD: f"Picard iteration did not converge in {config.picard_max_iters} sweeps",
            K.ERR_POSITIVITY: "p or q became non-positive (grid step too coarse)",
            K.ERR_RANGE: "h1 or h2 left [0, 1] by more than grid_step^2",
            K.ERR_NONFINITE: "non-finite value",
        }[err]
        raise SolverError(f"{reason} at cell ({ei}, {ej}), X={Xs[ei]:.6g}, Y={Ys[ej]:.6g}", (int(ei), int(ej)))
    return EnergyGrid(Xs, Ys, U, status, Yc, Xc, bcol, brow, xcol, xrow, mism, iters,
                      curve, params, config)


def _bump(s, k=4):
    return np.where(np.abs(s) < 1.0, (1.0 - s * s) ** k, 0.0)


def _bump_d(s, k=4):
    return np.where(np.abs(s) < 1.0, -2.0 * k * s * (1.0 - s * s) ** (k - 1), 0.0)


def smooth_director_data(params: MaterialParams, energy: float = 0.1, x_range=(-3.0, 3.0),
                         spacing: float = 1e-3, width: float = 0.5, u0: float = math.pi / 4,
                         planar: bool = False) -> DirectorInitialData:
    """A compactly supported smooth director pulse with prescribed energy.

    ``n = (cos u, sin u cos w, sin u sin w)`` with ``u = u0 + a b(x)`` and
    ``w = a x b(x)`` for a polynomial bump ``b`` of half-width ``width``; the
    time derivative mixes both angles.  The amplitude ``a`` is found by
    bisection so that the physical energy equals ``energy``.  With
    ``planar=True`` the third component stays zero.
    """
    lo, hi = x_range
    npts = int(round((hi - lo) / spacing)) + 1
    x = np.linspace(lo, hi, npts)
    x[np.argmin(np.abs(x))] = 0.0
    s = x / width

    def build(a):
        b, bd = _bump(s), _bump_d(s) / width
        u = u0 + a * b
        ux = a * bd
        ut = a * (0.6 * b - 0.5 * width * bd)
        if planar:
            w = wx = wt = np.zeros_like(x)
        else:
            w = a * s * b
            wx = a * (b / width + s * bd)
            wt = -0.4 * a * b
        cu, su, cw, sw = np.cos(u), np.sin(u), np.cos(w), np.sin(w)
        n = np.stack([cu, su * cw, su * sw], axis=1)
        n_u = np.stack([-su, cu * cw, cu * sw], axis=1)
        n_w = np.stack([np.zeros_like(u), -su * sw, su * cw], axis=1)
        nt = n_u * ut[:, None] + n_w * wt[:, None]
        nx = n_u * ux[:, None] + n_w * wx[:, None]
        return DirectorInitialData(x, n, nt, nx)

    if energy <= 0:
        return build(0.0)
    a_lo, a_hi = 0.0, 1e-3
    while build(a_hi).energy(params) < energy:
        a_hi *= 2.0
        if a_hi > 1e3:
            raise ValueError("requested energy not reachable")
    for _ in range(60):
        mid = 0.5 * (a_lo + a_hi)
        if build(mid).energy(params) < energy:
            a_lo = mid
        else:
            a_hi = mid
    return build(0.5 * (a_lo + a_hi))
