"""Problem container tying grids, crowds, kernel and solver settings together.

A MultiCrowdProblem is the single object the optimizer, the probes and the
experiment runner consume.  Construction validates shapes, renormalizes the
initial densities to unit discrete mass (logged when the adjustment is more
than rounding), derives the upper-triangular interaction matrix from the
symmetric one, and enforces the CFL bound for the configured control box.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError
from .forward import Dynamics, cfl_max_dt
from .grids import TimeGrid, TorusGrid
from .kernels import AversionKernel
from .optimizer import GdmParams
from .risk import symmetrize_lambda

logger = logging.getLogger("mfcrowd")


def default_time_steps(
    grid: TorusGrid, dynamics: Dynamics, a_max: float, horizon: float
) -> int:
    """Smallest power-of-two step count meeting the CFL bound.

    Powers of two keep checkpoint indices and output strides exact divisors.
    """
    if horizon <= 0.0:
        raise ConfigurationError(f"horizon must be positive, got {horizon}")
    max_dt = cfl_max_dt(grid, dynamics, a_max)
    if math.isinf(max_dt):
        return 1
    n_t = 1
    while horizon / n_t > max_dt:
        n_t *= 2
        if n_t > 2**40:
            raise ConfigurationError(
                "CFL bound requires more than 2^40 time steps; check sigma, "
                "a_max and the grid resolution"
            )
    return n_t


def _as_crowd_array(values, crowds: int, n_x: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape != (crowds, n_x):
        raise DimensionError(
            f"{name} must have shape ({crowds}, {n_x}) or ({n_x},) for one crowd, "
            f"got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise DimensionError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class MultiCrowdProblem:
    """One crowd-control instance: M crowds on shared grids and kernel.

    m0 and psi are (M, n_x) arrays (a single row is accepted for M = 1).
    lambda_full is the symmetric M x M interaction matrix; the derived
    upper-triangular half used by the pooled objective is exposed as
    lambda_bar.  coupling is the aversion weight multiplying the whole
    interaction term.
    """

    m0: np.ndarray
    psi: np.ndarray
    lambda_full: np.ndarray
    kernel: AversionKernel
    coupling: float
    dynamics: Dynamics
    grid: TorusGrid
    time_grid: TimeGrid
    gdm: GdmParams = field(default_factory=GdmParams)
    convexity_trials: int = 100
    seed: int = 0
    particle_ladder: tuple = (100, 400, 1600)
    particle_replicates: int = 10
    time_stride: int = 1
    profile_name: str | None = None
    lambda_bar: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        m0 = np.asarray(self.m0, dtype=np.float64)
        crowds = 1 if m0.ndim == 1 else int(m0.shape[0])
        m0 = _as_crowd_array(m0, crowds, self.grid.n_x, "m0")
        if np.any(m0 < 0.0):
            raise DimensionError("m0 must be nonnegative")
        masses = np.sum(m0, axis=1) * self.grid.h
        if np.any(masses <= 0.0):
            raise DimensionError("every crowd's m0 must carry positive mass")
        if np.any(np.abs(masses - 1.0) > 1e-12):
            logger.info(
                "renormalizing initial densities; discrete masses were %s", masses
            )
        m0 = m0 / masses[:, None]
        object.__setattr__(self, "m0", _freeze(m0))
        object.__setattr__(
            self, "psi", _freeze(_as_crowd_array(self.psi, crowds, self.grid.n_x, "psi"))
        )
        lam = np.asarray(self.lambda_full, dtype=np.float64)
        if lam.shape != (crowds, crowds):
            raise DimensionError(
                f"lambda must be {crowds}x{crowds} for {crowds} crowd(s), got {lam.shape}"
            )
        if crowds > 1 and np.any(lam < 0.0):
            raise DimensionError("multi-crowd interaction weights must be nonnegative")
        lam_bar = symmetrize_lambda(lam)
        object.__setattr__(self, "lambda_full", _freeze(lam))
        object.__setattr__(self, "lambda_bar", _freeze(lam_bar))
        if self.kernel.grid != self.grid:
            raise DimensionError("kernel was built for a different grid")
        if self.coupling < 0.0:
            raise ConfigurationError(f"coupling must be >= 0, got {self.coupling}")
        if self.convexity_trials < 1:
            raise ConfigurationError(
                f"convexity_trials must be >= 1, got {self.convexity_trials}"
            )
        if self.seed < 0:
            raise ConfigurationError(f"seed must be >= 0, got {self.seed}")
        ladder = tuple(int(n) for n in self.particle_ladder)
        if any(n < 1 for n in ladder) or any(b < a for a, b in zip(ladder, ladder[1:])):
            raise ConfigurationError(
                f"particle ladder must be positive and non-decreasing, got {ladder}"
            )
        object.__setattr__(self, "particle_ladder", ladder)
        if self.particle_replicates < 1:
            raise ConfigurationError(
                f"particle_replicates must be >= 1, got {self.particle_replicates}"
            )
        if self.time_stride < 1 or self.time_grid.n_t % self.time_stride != 0:
            raise ConfigurationError(
                f"time_stride must be a positive divisor of n_t = {self.time_grid.n_t}, "
                f"got {self.time_stride}"
            )
        max_dt = cfl_max_dt(self.grid, self.dynamics, self.gdm.a_max)
        if self.time_grid.dt > max_dt * (1.0 + 1e-12):
            raise ConfigurationError(
                f"dt = {self.time_grid.dt:.3e} violates cfl_max_dt = {max_dt:.3e} "
                f"for sigma = {self.dynamics.sigma} and a_max = {self.gdm.a_max}; "
                "increase n_t or lower a_max"
            )

    @property
    def crowd_count(self) -> int:
        return int(self.m0.shape[0])

    def with_kernel(self, kernel: AversionKernel) -> "MultiCrowdProblem":
        return dataclasses.replace(self, kernel=kernel)

    def with_seed(self, seed: int) -> "MultiCrowdProblem":
        return dataclasses.replace(self, seed=int(seed))


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


def _antipodal_density(grid: TorusGrid) -> np.ndarray:
    """Wrapped Gaussian bump at x = 0 with scale 0.1, unit discrete mass."""
    x = grid.nodes()
    values = np.zeros(grid.n_x)
    for k in range(-4, 5):
        values += np.exp(-((x - k * grid.length) ** 2) / (2.0 * 0.1**2))
    return values / (np.sum(values) * grid.h)


def _antipodal_cost(grid: TorusGrid) -> np.ndarray:
    """Terminal cost dipping to 0 at x = 0.5: 2(1 - exp(-d(x,0.5)^2 / 0.02))."""
    d = grid.distance(grid.nodes(), 0.5)
    return 2.0 * (1.0 - np.exp(-(d**2) / (2.0 * 0.1**2)))


_PROFILES = {"antipodal": (_antipodal_density, _antipodal_cost)}


def builtin_profiles(name: str):
    """Named (initial density, terminal cost) pair, each a grid -> array map.

    "antipodal" is the reference scenario: the crowd starts bunched around
    x = 0 and the terminal cost dips to zero at the opposite point x = 0.5,
    so every walker wants to cross to the far side of the circle.
    """
    try:
        return _PROFILES[name]
    except KeyError:
        known = ", ".join(sorted(_PROFILES))
        raise ConfigurationError(f"unknown profile '{name}'; available: {known}") from None
