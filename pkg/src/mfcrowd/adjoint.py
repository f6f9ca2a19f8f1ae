"""Backward costate solver for the maximum principle.

Marches p_j backward from p_j(T) = Psi_j under

    -dp_j/dt = 1/2 sigma^2 d2p_j/dx2 + a_j dp_j/dx
               + 1/2 a_j^2 + C * [aversion source]_j,

with the advection term upwinded against the sign of the face velocity and
the diffusion stencil shared with the forward solver.  Discretized this way
the backward step is the exact transpose of the forward flux step, so the
optimizer's gradients are exact for the discrete risk (certified by the
finite-difference acceptance test).

The aversion source for crowd j is C * sum_l (lb[j,l] * (phi~ * m_l) +
lb[l,j] * (phi * m_l)) where phi~ is the reflected kernel; for symmetric
kernels both convolutions coincide and the source reduces to the familiar
C * [G[m]^T (LambdaBar + LambdaBar^T)]_j (2*C*G[m] for a single crowd with
unit weight).  Local mode replaces the convolutions by the density itself.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ._jit import njit
from .errors import DimensionError
from .fields import AdjointField, ControlField, DensityField
from .forward import Dynamics, _check_cfl, same_axes
from .grids import TimeGrid, TorusGrid
from .kernels import AversionKernel, crowding_stacked


@njit(cache=True)
def _evolve_adjoint(psi, a, src, sigma, h, dt):
    n_t, n_x = a.shape
    p = np.empty((n_t + 1, n_x))
    p[n_t] = psi
    for k in range(n_t - 1, -1, -1):
        nxt = p[k + 1]
        ak = a[k]
        for i in range(n_x):
            ip = i + 1 if i + 1 < n_x else 0
            im = i - 1 if i > 0 else n_x - 1
            af_r = 0.5 * (ak[i] + ak[ip])
            af_l = 0.5 * (ak[im] + ak[i])
            adv = 0.0
            if af_r > 0.0:
                adv += af_r * (nxt[ip] - nxt[i]) / h
            if af_l < 0.0:
                adv += af_l * (nxt[i] - nxt[im]) / h
            diff = 0.5 * sigma * sigma * (nxt[ip] - 2.0 * nxt[i] + nxt[im]) / (h * h)
            p[k, i] = nxt[i] + dt * (diff + adv + src[k, i])
    return p


def aversion_sources(
    densities: Sequence[DensityField],
    lambda_bar: np.ndarray,
    kernel: AversionKernel,
    coupling: float,
    grid: TorusGrid,
) -> list[np.ndarray]:
    """Per-crowd source fields C * sum_l (lb[j,l] phi~*m_l + lb[l,j] phi*m_l).

    Evaluated on the n_t control slices (density slices 0..n_t-1).
    """
    m_count = len(densities)
    forward_conv = [crowding_stacked(kernel, d.values[:-1]) for d in densities]
    if kernel.is_local or kernel.is_symmetric:
        reverse_conv = forward_conv
    else:
        reverse_conv = [crowding_stacked(kernel, d.values[:-1], transpose=True) for d in densities]
    sources = []
    for j in range(m_count):
        src = np.zeros_like(forward_conv[0])
        for l in range(m_count):
            if lambda_bar[j, l] != 0.0:
                src += lambda_bar[j, l] * reverse_conv[l]
            if lambda_bar[l, j] != 0.0:
                src += lambda_bar[l, j] * forward_conv[l]
        sources.append(coupling * src)
    return sources


def solve_adjoint(
    controls: Sequence[ControlField],
    densities: Sequence[DensityField],
    psis: np.ndarray,
    lambda_bar: np.ndarray,
    kernel: AversionKernel,
    coupling: float,
    dynamics: Dynamics,
    grid: TorusGrid,
    time_grid: TimeGrid,
) -> list[AdjointField]:
    """Solve the backward costate equation for every crowd.

    ``psis`` holds one terminal-cost slice per crowd, shape (M, n_x); the
    terminal condition is imposed bit-for-bit.
    """
    m_count = len(densities)
    if len(controls) != m_count:
        raise DimensionError(
            f"got {len(controls)} controls for {m_count} densities"
        )
    psis = np.asarray(psis, dtype=np.float64)
    if psis.shape != (m_count, grid.n_x):
        raise DimensionError(
            f"psis must have shape ({m_count}, {grid.n_x}), got {psis.shape}"
        )
    lambda_bar = np.asarray(lambda_bar, dtype=np.float64)
    if lambda_bar.shape != (m_count, m_count):
        raise DimensionError(
            f"lambda_bar must have shape ({m_count}, {m_count}), got {lambda_bar.shape}"
        )
    for field in list(controls) + list(densities):
        if field.grid != grid or not same_axes(field.time_grid, time_grid):
            raise DimensionError("fields live on different grids")

    sources = aversion_sources(densities, lambda_bar, kernel, coupling, grid)
    out = []
    for j in range(m_count):
        a = controls[j].values
        a_peak = float(np.max(np.abs(a), initial=0.0))
        _check_cfl(grid, time_grid, dynamics, a_peak)
        src = sources[j] + 0.5 * a * a
        values = _evolve_adjoint(psis[j], a, src, dynamics.sigma, grid.h, time_grid.dt)
        out.append(AdjointField(values, grid, time_grid, terminal_cost=psis[j]))
    return out
