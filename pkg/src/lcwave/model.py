"""Material parameters, wave speeds and solver configuration.

The director wave speed is ``c(n1)^2 = alpha + (gamma - alpha) n1^2``; in the
planar reduction ``n = (cos u, sin u, 0)`` this reads
``c(u)^2 = gamma cos^2 u + alpha sin^2 u``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

# Slack allowed on |n1| <= 1 before it counts as a broken unit constraint.
N1_TOL = 1e-9

_CD_SAMPLES = 100_000


class ConfigError(ValueError):
    """Raised for invalid parameters or configuration files."""


@dataclass(frozen=True)
class MaterialParams:
    """Elastic constants ``alpha``, ``gamma`` (> 0) and damping ``mu`` (>= 0)."""

    alpha: float = 2.0
    gamma: float = 1.0
    mu: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "gamma", "mu"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigError(f"{name} must be a finite number, got {value!r}")
        if self.alpha <= 0 or self.gamma <= 0:
            raise ConfigError("alpha and gamma must be positive")
        if self.mu < 0:
            raise ConfigError("mu must be non-negative")

    @property
    def c_lower(self) -> float:
        return math.sqrt(min(self.alpha, self.gamma))

    @property
    def c_upper(self) -> float:
        return math.sqrt(max(self.alpha, self.gamma))

    @property
    def c_deriv_bound(self) -> float:
        return speed_bounds(self)[2]

    def replace(self, **changes) -> "MaterialParams":
        values = asdict(self)
        values.update(changes)
        return MaterialParams(**values)


@dataclass(frozen=True)
class SolverConfig:
    """Numerical knobs of the energy-coordinate solver.

    ``grid_step_y`` defaults to ``grid_step``; a separate value is useful when
    the boundary curve is very steep (large |S|), where the Y direction is
    stretched and needs far fewer points than X.
    """

    grid_step: float = 0.01
    picard_tol: float = 1e-12
    picard_max_iters: int = 50
    h_floor: float = 1e-6
    domain_radius: float = 2.0
    grid_step_y: float | None = None
    project: bool = False
    # always on; kept so configs can state it explicitly
    deterministic: bool = True

    def __post_init__(self):
        if not self.grid_step > 0:
            raise ConfigError("grid_step must be positive")
        if self.grid_step_y is not None and not self.grid_step_y > 0:
            raise ConfigError("grid_step_y must be positive")
        if not self.picard_tol > 0:
            raise ConfigError("picard_tol must be positive")
        if int(self.picard_max_iters) < 1:
            raise ConfigError("picard_max_iters must be at least 1")
        if not 0 < self.h_floor < 1:
            raise ConfigError("h_floor must lie in (0, 1)")
        if not self.domain_radius > 0:
            raise ConfigError("domain_radius must be positive")
        if not self.deterministic:
            raise ConfigError("non-deterministic mode is not supported")

    @property
    def step_x(self) -> float:
        return self.grid_step

    @property
    def step_y(self) -> float:
        return self.grid_step if self.grid_step_y is None else self.grid_step_y

    def replace(self, **changes) -> "SolverConfig":
        values = asdict(self)
        values.update(changes)
        return SolverConfig(**values)


def wave_speed(params: MaterialParams, n1):
    """Wave speed ``sqrt(alpha + (gamma - alpha) n1^2)``; accepts arrays."""
    n1 = np.asarray(n1, dtype=float)
    if np.any(np.abs(n1) > 1.0 + N1_TOL):
        raise ValueError("|n1| > 1: the unit-length constraint is violated")
    out = np.sqrt(params.alpha + (params.gamma - params.alpha) * n1 * n1)
    return float(out) if out.ndim == 0 else out


def wave_speed_deriv(params: MaterialParams, n1):
    """d c / d n1 = (gamma - alpha) n1 / c(n1)."""
    n1 = np.asarray(n1, dtype=float)
    c = np.sqrt(params.alpha + (params.gamma - params.alpha) * n1 * n1)
    out = (params.gamma - params.alpha) * n1 / c
    return float(out) if out.ndim == 0 else out


def wave_speed_planar(params: MaterialParams, u):
    u = np.asarray(u, dtype=float)
    cu, su = np.cos(u), np.sin(u)
    out = np.sqrt(params.gamma * cu * cu + params.alpha * su * su)
    return float(out) if out.ndim == 0 else out


def speed_derivative_planar(params: MaterialParams, u):
    """c'(u) = (alpha - gamma) sin u cos u / c(u)."""
    u = np.asarray(u, dtype=float)
    cu, su = np.cos(u), np.sin(u)
    c = np.sqrt(params.gamma * cu * cu + params.alpha * su * su)
    out = (params.alpha - params.gamma) * su * cu / c
    return float(out) if out.ndim == 0 else out


def speed_bounds(params: MaterialParams) -> tuple[float, float, float]:
    """Return ``(C_L, C_U, C_D)``.

    ``C_D`` is the largest |c'(u)| on a dense periodic scan, capped by the
    analytic ceiling ``|alpha - gamma| / (2 C_L)``.  This is the planar
    derivative bound; see :func:`director_deriv_bound` for d c / d n1.
    """
    c_lo = math.sqrt(min(params.alpha, params.gamma))
    c_hi = math.sqrt(max(params.alpha, params.gamma))
    u = np.linspace(0.0, 2.0 * np.pi, _CD_SAMPLES, endpoint=False)
    scanned = float(np.max(np.abs(speed_derivative_planar(params, u))))
    ceiling = abs(params.alpha - params.gamma) / (2.0 * c_lo)
    return c_lo, c_hi, min(scanned, ceiling)


def director_deriv_bound(params: MaterialParams) -> float:
    """max over |n1| <= 1 of |c'(n1)|, attained at |n1| = 1.

    Larger than the planar ``C_D`` in general (c'(n1) = -c'(u) / sin u).
    """
    return abs(params.gamma - params.alpha) / math.sqrt(params.gamma)


_MATERIAL_KEYS = {f.name for f in fields(MaterialParams)}
_SOLVER_KEYS = {f.name for f in fields(SolverConfig)}


def load_config(source) -> tuple[MaterialParams, SolverConfig, dict]:
    """Read material and solver parameters from a JSON file or mapping.

    Recognised keys go to :class:`MaterialParams` / :class:`SolverConfig`;
    everything else is returned untouched as the third element.
    """
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}: line {exc.lineno}: {exc.msg}") from exc
    else:
        data = dict(source)
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")

    material, solver, extra = {}, {}, {}
    for key, value in data.items():
        if key in _MATERIAL_KEYS:
            material[key] = value
        elif key in _SOLVER_KEYS:
            solver[key] = value
        else:
            extra[key] = value
    for key, value in {**material, **solver}.items():
        if isinstance(value, bool) and key not in ("project", "deterministic"):
            raise ConfigError(f"{key} must be numeric")
        if key not in ("project", "deterministic", "grid_step_y") and not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be numeric, got {value!r}")
    if "picard_max_iters" in solver:
        solver["picard_max_iters"] = int(solver["picard_max_iters"])
    return MaterialParams(**material), SolverConfig(**solver), extra
