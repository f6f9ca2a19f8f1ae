"""Forward Fokker-Planck solver on the torus.

Solves d(m)/dt = 1/2 sigma^2 d2(m)/dx2 - d(a m)/dx with an explicit
conservative finite-volume step: central diffusion, first-order upwind
advection with face velocity (a_i + a_{i+1})/2.  Writing the update in flux
form makes per-step mass conservation exact up to summation roundoff, and the
CFL bound (safety 0.4) makes every update a convex combination, hence
positivity-preserving.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._jit import njit
from .errors import ConfigurationError, DimensionError
from .fields import MASS_TOL, ControlField, DensityField
from .grids import TimeGrid, TorusGrid, cfl_time_step

CFL_SAFETY = 0.4


@dataclass(frozen=True)
class Dynamics:
    """Controlled diffusion dX = a dt + sigma dW: the control is the velocity."""

    sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.sigma < 0.0:
            raise ConfigurationError(f"sigma must be nonnegative, got {self.sigma}")


def cfl_max_dt(grid: TorusGrid, dynamics: Dynamics, a_max: float) -> float:
    """Largest stable step 0.4 * min(h^2/sigma^2, h/a_max); inf if both vanish."""
    return cfl_time_step(grid, dynamics.sigma, a_max, CFL_SAFETY)


def same_axes(tg_a: TimeGrid, tg_b: TimeGrid) -> bool:
    """Time grids agree as axes (horizon and step count; stability metadata may differ)."""
    return tg_a.horizon == tg_b.horizon and tg_a.n_t == tg_b.n_t


@njit(cache=True)
def _evolve_density(m0, a, sigma, h, dt):
    n_t, n_x = a.shape
    out = np.empty((n_t + 1, n_x))
    out[0] = m0
    flux = np.empty(n_x)
    nu = 0.5 * sigma * sigma / h
    for k in range(n_t):
        row = out[k]
        ak = a[k]
        for i in range(n_x):
            ip = i + 1 if i + 1 < n_x else 0
            af = 0.5 * (ak[i] + ak[ip])
            if af > 0.0:
                adv = af * row[i]
            else:
                adv = af * row[ip]
            flux[i] = adv - nu * (row[ip] - row[i])
        for i in range(n_x):
            im = i - 1 if i > 0 else n_x - 1
            out[k + 1, i] = row[i] - (dt / h) * (flux[i] - flux[im])
    return out


def _check_initial_density(m0: np.ndarray, grid: TorusGrid) -> np.ndarray:
    m0 = np.asarray(m0, dtype=np.float64)
    if m0.shape != (grid.n_x,):
        raise DimensionError(f"m0 must have shape ({grid.n_x},), got {m0.shape}")
    if np.any(m0 < 0.0):
        raise DimensionError("m0 must be nonnegative")
    mass = grid.h * float(m0.sum())
    if abs(mass - 1.0) > MASS_TOL:
        raise DimensionError(f"m0 must have unit mass within {MASS_TOL:g}, got {mass!r}")
    return m0


def _check_cfl(grid: TorusGrid, time_grid: TimeGrid, dynamics: Dynamics, a_max: float) -> None:
    bound = cfl_max_dt(grid, dynamics, a_max)
    if time_grid.dt > bound * (1.0 + 1e-12):
        raise ConfigurationError(
            f"time step {time_grid.dt:.6g} violates cfl_max_dt = {bound:.6g} "
            f"(sigma = {dynamics.sigma:g}, max |a| = {a_max:g})"
        )


def solve_forward(
    m0: np.ndarray,
    control: ControlField,
    dynamics: Dynamics,
    grid: TorusGrid,
    time_grid: TimeGrid,
) -> DensityField:
    """March the density forward from m0 under the given feedback control.

    The CFL bound is checked against the actual control magnitudes, not just
    the declared a_max, so a box-feasible but unstable pairing still fails
    loudly.
    """
    m0 = _check_initial_density(m0, grid)
    if control.grid != grid or not same_axes(control.time_grid, time_grid):
        raise DimensionError("control is defined on different grids")
    a = control.values
    a_peak = float(np.max(np.abs(a), initial=0.0))
    _check_cfl(grid, time_grid, dynamics, a_peak)
    values = _evolve_density(m0, a, dynamics.sigma, grid.h, time_grid.dt)
    return DensityField(values, grid, time_grid)
