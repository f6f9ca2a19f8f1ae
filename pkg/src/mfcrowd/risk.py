"""Risk functionals: pooled control objective, per-crowd game risks, the
Hamiltonian integrand, the Lambda/LambdaBar link, and the convexity check.

All time integrals use the left-endpoint rule over the n_t control slices
(consistent with piecewise-constant controls); the terminal term uses the
last density slice.  Space integrals are h-weighted node sums.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError
from .fields import ControlField, DensityField
from .grids import TimeGrid, TorusGrid
from .kernels import AversionKernel, crowding_stacked, penalty_field


@dataclass(frozen=True)
class RiskBreakdown:
    """Energy / aversion / terminal decomposition; total is their exact sum."""

    energy: float
    aversion: float
    terminal: float
    total: float

    @classmethod
    def build(cls, energy: float, aversion: float, terminal: float) -> "RiskBreakdown":
        return cls(energy, aversion, terminal, energy + aversion + terminal)


def _validate_crowds(
    controls: Sequence[ControlField],
    densities: Sequence[DensityField],
    psis: np.ndarray,
    grid: TorusGrid,
) -> np.ndarray:
    if len(controls) != len(densities):
        raise DimensionError(
            f"got {len(controls)} controls for {len(densities)} densities"
        )
    psis = np.asarray(psis, dtype=np.float64)
    if psis.shape != (len(densities), grid.n_x):
        raise DimensionError(
            f"psis must have shape ({len(densities)}, {grid.n_x}), got {psis.shape}"
        )
    return psis


def _penalty_stacks(
    densities: Sequence[DensityField], kernel: AversionKernel
) -> list[np.ndarray]:
    """Penalty fields (phi * m_l or m_l) on the n_t control slices, per crowd."""
    return [crowding_stacked(kernel, d.values[:-1]) for d in densities]


def pooled_risk(
    controls: Sequence[ControlField],
    densities: Sequence[DensityField],
    psis: np.ndarray,
    lambda_bar: np.ndarray,
    kernel: AversionKernel,
    coupling: float,
    grid: TorusGrid,
    time_grid: TimeGrid,
    _penalties: Sequence[np.ndarray] | None = None,
) -> RiskBreakdown:
    """Pooled control objective

    J = sum_j int int 1/2 a_j^2 m_j dx dt
        + C int int sum_{l,l'} lb[l,l'] (phi*m_l) m_l' dx dt
        + sum_j int Psi_j m_j(T) dx.

    ``_penalties`` lets the optimizer reuse precomputed penalty stacks.
    """
    psis = _validate_crowds(controls, densities, psis, grid)
    lambda_bar = np.asarray(lambda_bar, dtype=np.float64)
    m_count = len(densities)
    if lambda_bar.shape != (m_count, m_count):
        raise DimensionError(
            f"lambda_bar must have shape ({m_count}, {m_count}), got {lambda_bar.shape}"
        )
    cell = grid.h * time_grid.dt
    penalties = _penalty_stacks(densities, kernel) if _penalties is None else list(_penalties)

    energy = 0.0
    terminal = 0.0
    aversion = 0.0
    for j in range(m_count):
        a = controls[j].values
        m_run = densities[j].values[:-1]
        energy += 0.5 * cell * float(np.sum(a * a * m_run))
        terminal += grid.h * float(np.dot(psis[j], densities[j].values[-1]))
        for l in range(m_count):
            if lambda_bar[l, j] != 0.0:
                aversion += lambda_bar[l, j] * float(np.sum(penalties[l] * m_run))
    aversion *= coupling * cell
    return RiskBreakdown.build(energy, aversion, terminal)


def crowd_risk(
    j: int,
    controls: Sequence[ControlField],
    densities: Sequence[DensityField],
    psi_j: np.ndarray,
    lambda_full: np.ndarray,
    kernel: AversionKernel,
    coupling: float,
    grid: TorusGrid,
    time_grid: TimeGrid,
) -> RiskBreakdown:
    """Crowd j's own game risk

    J_j = int int (1/2 a_j^2 + C sum_k lambda[j,k] (phi*m_k)) m_j dx dt
          + int Psi_j m_j(T) dx,

    with the full symmetric interaction matrix Lambda (row j used).
    """
    m_count = len(densities)
    if not 0 <= j < m_count:
        raise DimensionError(f"crowd index {j} out of range for {m_count} crowds")
    psi_j = np.asarray(psi_j, dtype=np.float64)
    if psi_j.shape != (grid.n_x,):
        raise DimensionError(f"psi_j must have shape ({grid.n_x},), got {psi_j.shape}")
    lambda_full = np.asarray(lambda_full, dtype=np.float64)
    if lambda_full.shape != (m_count, m_count):
        raise DimensionError(
            f"lambda must have shape ({m_count}, {m_count}), got {lambda_full.shape}"
        )
    cell = grid.h * time_grid.dt
    a = controls[j].values
    m_run = densities[j].values[:-1]
    energy = 0.5 * cell * float(np.sum(a * a * m_run))
    terminal = grid.h * float(np.dot(psi_j, densities[j].values[-1]))
    aversion = 0.0
    for k in range(m_count):
        if lambda_full[j, k] != 0.0:
            pen = crowding_stacked(kernel, densities[k].values[:-1])
            aversion += lambda_full[j, k] * float(np.sum(pen * m_run))
    aversion *= coupling * cell
    return RiskBreakdown.build(energy, aversion, terminal)


def hamiltonian_integrand(
    a_slices: np.ndarray,
    m_slices: np.ndarray,
    dp_slices: np.ndarray,
    lambda_bar: np.ndarray,
    kernel: AversionKernel,
    coupling: float,
    grid: TorusGrid,
) -> np.ndarray:
    """Pointwise Hamiltonian values on one time slice.

    H(x) = sum_j 1/2 a_j^2 m_j + C sum_{l,l'} lb[l,l'] (phi*m_l) m_l'
           + sum_j a_j m_j dp_j,

    with a, m, dp given as (M, n_x) stacks (dp = spatial gradient of p).
    """
    a_slices = np.atleast_2d(np.asarray(a_slices, dtype=np.float64))
    m_slices = np.atleast_2d(np.asarray(m_slices, dtype=np.float64))
    dp_slices = np.atleast_2d(np.asarray(dp_slices, dtype=np.float64))
    if not (a_slices.shape == m_slices.shape == dp_slices.shape):
        raise DimensionError("a, m and dp slices must share one (M, n_x) shape")
    lambda_bar = np.asarray(lambda_bar, dtype=np.float64)
    out = np.zeros(grid.n_x)
    m_count = a_slices.shape[0]
    for j in range(m_count):
        out += 0.5 * a_slices[j] ** 2 * m_slices[j]
        out += a_slices[j] * m_slices[j] * dp_slices[j]
    for l in range(m_count):
        pen = penalty_field(kernel, m_slices[l], grid)
        for lp in range(m_count):
            if lambda_bar[l, lp] != 0.0:
                out += coupling * lambda_bar[l, lp] * pen * m_slices[lp]
    return out


def symmetrize_lambda(lambda_full: np.ndarray) -> np.ndarray:
    """Upper-triangular LambdaBar with Lambda = LB + LB^T - diag(LB).

    The identity has many solutions; the upper-triangular one is canonical
    and reproducible.
    """
    lam = np.asarray(lambda_full, dtype=np.float64)
    if lam.ndim != 2 or lam.shape[0] != lam.shape[1]:
        raise DimensionError(f"lambda must be square, got shape {lam.shape}")
    if not np.array_equal(lam, lam.T):
        raise DimensionError(
            "lambda must be symmetric: the aversion between two crowds is mutual"
        )
    return np.triu(lam)


@dataclass(frozen=True)
class ConvexityVerdict:
    """Outcome of check_convexity.

    status is 'certified_psd' (local eigenvalue test), 'sampled_ok' (no
    violation among the sampled difference fields) or 'violated'.  For
    sampled verdicts min_value is the smallest quadratic-form value seen;
    witness carries the violating pair when status is 'violated'.
    """

    status: str
    trials: int = 0
    seed: int = 0
    min_value: float | None = None
    eigenvalues: tuple[float, ...] | None = None
    witness: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def ok(self) -> bool:
        return self.status in ("certified_psd", "sampled_ok")


def _random_smooth_density(rng: np.random.Generator, grid: TorusGrid, bumps: int = 3) -> np.ndarray:
    """Random smooth probability density: a wrapped-Gaussian mixture.

    Smooth samples match the densities the diffusion actually produces;
    cellwise white noise would probe grid-scale oscillations outside the
    model class.
    """
    x = grid.nodes()
    out = np.full(grid.n_x, 0.1)
    for _ in range(bumps):
        center = rng.uniform(0.0, grid.length)
        width = rng.uniform(0.08, 0.25) * grid.length
        weight = rng.uniform(0.2, 1.0)
        d = np.minimum(np.abs(x - center), grid.length - np.abs(x - center))
        out += weight * np.exp(-0.5 * (d / width) ** 2)
    return out / (grid.h * out.sum())


def check_convexity(
    lambda_bar: np.ndarray,
    kernel: AversionKernel,
    grid: TorusGrid,
    trials: int = 100,
    seed: int = 0,
) -> ConvexityVerdict:
    """Convexity gate for the aversion term.

    Local mode: eigenvalue test of (LB + LB^T)/2 - certified either way.
    Nonlocal mode: Monte Carlo sampling of the quadratic form
    int int phi(x-y) w(y)^T LB w(x) dy dx over difference fields w = m - m'
    of random smooth density tuples; sampled_ok means no value below -1e-10.
    """
    lambda_bar = np.asarray(lambda_bar, dtype=np.float64)
    if lambda_bar.ndim != 2 or lambda_bar.shape[0] != lambda_bar.shape[1]:
        raise DimensionError(f"lambda_bar must be square, got shape {lambda_bar.shape}")
    if trials < 1:
        raise DimensionError(f"trials must be at least 1, got {trials}")
    m_count = lambda_bar.shape[0]

    if kernel.is_local:
        sym = 0.5 * (lambda_bar + lambda_bar.T)
        eigs = np.linalg.eigvalsh(sym)
        if float(eigs.min()) >= -1e-12:
            return ConvexityVerdict(status="certified_psd", eigenvalues=tuple(eigs))
        return ConvexityVerdict(status="violated", eigenvalues=tuple(eigs))

    rng = np.random.default_rng(seed)
    min_value = np.inf
    for _ in range(trials):
        m_a = np.stack([_random_smooth_density(rng, grid) for _ in range(m_count)])
        m_b = np.stack([_random_smooth_density(rng, grid) for _ in range(m_count)])
        w = m_a - m_b
        conv = crowding_stacked(kernel, w)
        # sum_{j,k} lb[j,k] * int (phi * w_j)(x) w_k(x) dx
        value = grid.h * float(np.sum((lambda_bar.T @ conv) * w))
        if value < min_value:
            min_value = value
        if value < -1e-10:
            return ConvexityVerdict(
                status="violated",
                trials=trials,
                seed=seed,
                min_value=value,
                witness=(m_a, m_b),
            )
    return ConvexityVerdict(status="sampled_ok", trials=trials, seed=seed, min_value=min_value)
