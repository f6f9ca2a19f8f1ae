"""Personal-space aversion kernels and the crowding convolution.

A nonlocal kernel is the normalized indicator of an arc ``[lo, hi)`` on the
torus, optionally smoothed by a compactly supported bump mollifier of width
``delta``.  It is stored as a nodal weight table ``w`` over displacement
indices with unit discrete mass ``h * sum(w) == 1``, so the crowding field
``G[m](x) = (phi * m)(x)`` preserves total mass.  The local mode is the
zero-range limit where crowding degenerates to the density itself; it carries
no table and convolution-type operations refuse it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, KernelModeError
from .grids import TorusGrid

LOCAL = "local"
NONLOCAL = "nonlocal"


@dataclass(frozen=True)
class AversionKernel:
    """Discretized aversion kernel.

    ``weights[d]`` is the kernel value at signed displacement ``d * h``
    (wrapped); ``weights`` is None exactly in local mode.  ``support_lo``,
    ``support_hi`` and ``delta`` record how the table was built.
    """

    mode: str
    grid: TorusGrid
    weights: np.ndarray | None = None
    support_lo: float = 0.0
    support_hi: float = 0.0
    delta: float = 0.0

    def __post_init__(self) -> None:
        if self.mode not in (LOCAL, NONLOCAL):
            raise KernelModeError(f"mode must be '{LOCAL}' or '{NONLOCAL}', got {self.mode!r}")
        if self.mode == LOCAL:
            if self.weights is not None:
                raise KernelModeError("local kernels carry no weight table")
            return
        w = np.array(self.weights, dtype=np.float64, copy=True)
        if w.shape != (self.grid.n_x,):
            raise KernelModeError(
                f"weight table must have shape ({self.grid.n_x},), got {w.shape}"
            )
        if np.any(w < 0.0):
            raise KernelModeError("weight table must be nonnegative")
        mass = self.grid.h * float(w.sum())
        if abs(mass - 1.0) > 1e-10:
            raise KernelModeError(f"weight table mass must be 1 within 1e-10, got {mass!r}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def is_local(self) -> bool:
        return self.mode == LOCAL

    @property
    def is_symmetric(self) -> bool:
        """True when the table equals its reflection (local mode trivially is)."""
        if self.is_local:
            return True
        gap = float(np.max(np.abs(self.weights - self.reversed_weights())))
        return gap <= 1e-12 * max(1.0, float(np.max(self.weights)))

    def reversed_weights(self) -> np.ndarray:
        """Table of the reflected kernel phi(-x): w[(-d) mod n_x]."""
        self._require_nonlocal()
        return np.roll(self.weights[::-1], 1)

    def matrix(self) -> np.ndarray:
        """Dense convolution matrix P with (P m)_i = h * sum_j w[(i-j) mod n_x] m_j."""
        self._require_nonlocal()
        n = self.grid.n_x
        idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
        return self.grid.h * self.weights[idx]

    def _require_nonlocal(self) -> None:
        if self.is_local:
            raise KernelModeError(
                "operation requires a nonlocal kernel; local mode has no weight table"
            )


def _arc_cell_overlap(lo: float, hi: float, grid: TorusGrid) -> np.ndarray:
    """Length of the intersection of the arc [lo, hi) with every grid cell.

    Cell ``d`` is ``[d*h - h/2, d*h + h/2)``.  The arc (length <= L) is
    canonicalized to start in [0, L); shifting it by -L, 0, +L covers every
    wrapped intersection with cells living in [-h/2, L - h/2).
    """
    length = grid.length
    h = grid.h
    span = hi - lo
    lo = lo % length
    hi = lo + span
    d = np.arange(grid.n_x)
    cell_lo = d * h - 0.5 * h
    cell_hi = cell_lo + h
    out = np.zeros(grid.n_x)
    for shift in (-length, 0.0, length):
        out += np.maximum(0.0, np.minimum(hi + shift, cell_hi) - np.maximum(lo + shift, cell_lo))
    return out


def build_indicator_kernel(support_lo: float, support_hi: float, grid: TorusGrid) -> AversionKernel:
    """Normalized indicator of [support_lo, support_hi) as a cell-averaged table.

    Cell averaging (exact arc-cell overlap, rather than pointwise sampling)
    keeps the discrete mass exactly 1 for any support alignment and the
    interior height exactly 1/(support_hi - support_lo).
    """
    span = support_hi - support_lo
    if not 0.0 < span < grid.length:
        raise ConfigurationError(
            f"kernel support must have width in (0, {grid.length:g}), got {span:g}"
        )
    weights = _arc_cell_overlap(support_lo, support_hi, grid) / (span * grid.h)
    return AversionKernel(
        mode=NONLOCAL,
        grid=grid,
        weights=weights,
        support_lo=support_lo,
        support_hi=support_hi,
        delta=0.0,
    )


def mollifier_weights(grid: TorusGrid, delta: float) -> np.ndarray:
    """Discrete bump mollifier of width delta with unit discrete mass.

    The standard bump exp(-1/(1 - u^2)) on |u| < 1 is sampled at wrapped nodal
    displacements u = d(x, 0)/delta and renormalized, so convolving with it
    preserves discrete mass.
    """
    if delta <= 0.0:
        raise ConfigurationError(f"mollifier width must be positive, got {delta:g}")
    u = np.asarray(grid.distance(grid.nodes(), 0.0)) / delta
    g = np.zeros(grid.n_x)
    inside = u < 1.0
    g[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    total = grid.h * g.sum()
    if total <= 0.0:
        raise ConfigurationError("mollifier support contains no grid node")
    return g / total


def mollify(kernel: AversionKernel, delta: float, grid: TorusGrid) -> AversionKernel:
    """Smooth a nonlocal kernel by the width-delta bump.

    Sub-grid widths (delta < 2h) are a no-op and return the input unchanged;
    delta <= 0 is rejected.
    """
    kernel._require_nonlocal()
    if delta <= 0.0:
        raise ConfigurationError(f"mollifier width must be positive, got {delta:g}")
    if delta < 2.0 * grid.h:
        return kernel
    g = mollifier_weights(grid, delta)
    fa = np.fft.rfft(g)
    fb = np.fft.rfft(kernel.weights)
    out = grid.h * np.fft.irfft(fa * fb, grid.n_x)
    # unit mass is part of the kernel contract; remove rfft rounding dust and
    # the strictly tiny negative lobes it can introduce
    out = np.maximum(out, 0.0)
    out /= grid.h * out.sum()
    return AversionKernel(
        mode=NONLOCAL,
        grid=grid,
        weights=out,
        support_lo=kernel.support_lo,
        support_hi=kernel.support_hi,
        delta=delta,
    )


def build_kernel(
    grid: TorusGrid,
    mode: str = NONLOCAL,
    support_lo: float = 0.0,
    support_hi: float = 0.2,
    delta: float | None = None,
) -> AversionKernel:
    """Config-level constructor; local mode ignores the shape parameters.

    ``delta`` defaults to 4h, the narrowest comfortably resolved smoothing;
    ``delta = 0`` disables smoothing (a raw indicator table round-trips
    through the config echo this way).
    """
    if mode == LOCAL:
        return AversionKernel(mode=LOCAL, grid=grid)
    if mode != NONLOCAL:
        raise KernelModeError(f"mode must be '{LOCAL}' or '{NONLOCAL}', got {mode!r}")
    if delta is None:
        delta = 4.0 * grid.h
    kernel = build_indicator_kernel(support_lo, support_hi, grid)
    if delta == 0.0:
        return kernel
    return mollify(kernel, delta, grid)


def crowding_term(kernel: AversionKernel, density_slice: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Crowding field G[m] of one density slice by circular convolution.

    out[i] = h * sum_j w[(i-j) mod n_x] m[j].  Local mode is refused: callers
    that support both modes must branch (see penalty_field).
    """
    kernel._require_nonlocal()
    density_slice = np.asarray(density_slice, dtype=np.float64)
    if density_slice.shape != (grid.n_x,):
        raise KernelModeError(
            f"density slice must have shape ({grid.n_x},), got {density_slice.shape}"
        )
    n = grid.n_x
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return grid.h * (kernel.weights[idx] @ density_slice)


def penalty_field(kernel: AversionKernel, density_slice: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """The aversion penalty a pedestrian at x feels: G[m](x) nonlocal, m(x) local."""
    if kernel.is_local:
        return np.array(density_slice, dtype=np.float64, copy=True)
    return crowding_term(kernel, density_slice, grid)


def crowding_stacked(kernel: AversionKernel, m: np.ndarray, transpose: bool = False) -> np.ndarray:
    """Apply the penalty operator to a (n_slices, n_x) stack in one product.

    ``transpose=True`` applies the reflected kernel phi(-x), the adjoint of
    the convolution; the costate source needs it for asymmetric kernels.
    Local mode returns the stack itself (its penalty operator is the
    identity, which is self-adjoint).
    """
    m = np.asarray(m, dtype=np.float64)
    if kernel.is_local:
        return m.copy()
    mat = kernel.matrix()
    if transpose:
        return m @ mat
    return m @ mat.T
