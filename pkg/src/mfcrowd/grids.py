"""Uniform grids on the 1-D torus and on the time interval.

Space is the circle of circumference ``length`` split into ``n_x`` cells of
width ``h``; node ``i`` sits at ``i * h`` and doubles as the cell center for
finite-volume purposes.  Time is ``[0, horizon]`` split into ``n_t`` equal
steps; controls live on the ``n_t`` left endpoints, states on all ``n_t + 1``
slice times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionError


@dataclass(frozen=True)
class TorusGrid:
    """Periodic spatial grid with ``n_x`` uniform cells."""

    n_x: int
    length: float = 1.0

    def __post_init__(self) -> None:
        if self.n_x < 8:
            raise ConfigurationError(f"n_x must be at least 8, got {self.n_x}")
        if not self.length > 0.0:
            raise ConfigurationError(f"length must be positive, got {self.length}")

    @property
    def h(self) -> float:
        return self.length / self.n_x

    def nodes(self) -> np.ndarray:
        return np.arange(self.n_x) * self.h

    def wrap(self, x: np.ndarray | float) -> np.ndarray | float:
        """Map positions into [0, length)."""
        return np.mod(x, self.length)

    def distance(self, x: np.ndarray | float, y: np.ndarray | float) -> np.ndarray | float:
        """Geodesic (shorter-arc) distance on the circle."""
        d = np.abs(np.mod(np.asarray(x) - np.asarray(y), self.length))
        return np.minimum(d, self.length - d)

    def nearest_cell(self, x: np.ndarray | float) -> np.ndarray | int:
        """Index of the node closest to ``x`` (ties round half up, wrapped)."""
        idx = np.floor(np.asarray(x) / self.h + 0.5).astype(np.int64)
        return np.mod(idx, self.n_x)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid on [0, horizon] with ``n_t`` steps.

    ``max_dt``, when given, is the stability bound the step must satisfy; it is
    checked at construction so an unstable grid cannot circulate.
    """

    horizon: float
    n_t: int
    max_dt: float | None = None

    def __post_init__(self) -> None:
        if not self.horizon > 0.0:
            raise ConfigurationError(f"horizon must be positive, got {self.horizon}")
        if self.n_t < 1:
            raise ConfigurationError(f"n_t must be at least 1, got {self.n_t}")
        if self.max_dt is not None and self.dt > self.max_dt * (1.0 + 1e-12):
            raise ConfigurationError(
                f"time step {self.dt:.6g} exceeds the stability bound {self.max_dt:.6g}; "
                f"raise n_t to at least {math.ceil(self.horizon / self.max_dt)}"
            )

    @property
    def dt(self) -> float:
        return self.horizon / self.n_t

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_t + 1)


def cfl_time_step(grid: TorusGrid, sigma: float, a_max: float, safety: float = 0.4) -> float:
    """Largest stable explicit step: safety * min(h^2/sigma^2, h/a_max).

    Either mechanism may be absent (sigma = 0 or a_max = 0); with both absent
    there is no constraint and the bound is infinite.
    """
    if sigma < 0.0 or a_max < 0.0:
        raise ConfigurationError("sigma and a_max must be nonnegative")
    h = grid.h
    bounds = []
    if sigma > 0.0:
        bounds.append(h * h / (sigma * sigma))
    if a_max > 0.0:
        bounds.append(h / a_max)
    if not bounds:
        return math.inf
    return safety * min(bounds)


def _check_slice(values: np.ndarray, grid: TorusGrid, name: str) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (grid.n_x,):
        raise DimensionError(
            f"{name} must have shape ({grid.n_x},), got {values.shape}"
        )
    return values


def integrate(values: np.ndarray, grid: TorusGrid) -> float:
    """Torus integral of a nodal slice: h * sum(values)."""
    values = _check_slice(values, grid, "values")
    return grid.h * float(np.sum(values))


def gradient_x(values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Central-difference spatial derivative with periodic wraparound."""
    values = _check_slice(values, grid, "values")
    return (np.roll(values, -1) - np.roll(values, 1)) / (2.0 * grid.h)
