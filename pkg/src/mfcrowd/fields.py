"""Field containers tying space-time arrays to their grids, plus CSV round-trip.

A density or adjoint field holds ``n_t + 1`` slices (one per slice time); a
control field holds ``n_t`` slices, each constant on ``[t_k, t_{k+1})``.  The
wrapped arrays are frozen so a validated field cannot drift out of contract.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .grids import TimeGrid, TorusGrid

MASS_TOL = 1e-10


def _freeze(values: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


def _check_shape(values: np.ndarray, n_slices: int, n_x: int, name: str) -> None:
    if values.shape != (n_slices, n_x):
        raise DimensionError(
            f"{name} must have shape ({n_slices}, {n_x}), got {values.shape}"
        )
    if not np.all(np.isfinite(values)):
        raise DimensionError(f"{name} contains non-finite entries")


@dataclass(frozen=True)
class DensityField:
    """Probability density per time slice: nonnegative, unit mass within 1e-10."""

    values: np.ndarray
    grid: TorusGrid
    time_grid: TimeGrid

    def __post_init__(self) -> None:
        values = _freeze(self.values)
        _check_shape(values, self.time_grid.n_t + 1, self.grid.n_x, "density values")
        if np.any(values < 0.0):
            raise DimensionError("density values must be nonnegative")
        masses = self.grid.h * values.sum(axis=1)
        worst = float(np.max(np.abs(masses - 1.0)))
        if worst > MASS_TOL:
            raise DimensionError(
                f"density slices must have unit mass within {MASS_TOL:g}; worst defect {worst:.3e}"
            )
        object.__setattr__(self, "values", values)

    @property
    def initial(self) -> np.ndarray:
        return self.values[0]

    @property
    def terminal(self) -> np.ndarray:
        return self.values[-1]

    def mass(self) -> np.ndarray:
        """Per-slice torus mass, h * sum over nodes."""
        return self.grid.h * self.values.sum(axis=1)


@dataclass(frozen=True)
class ControlField:
    """Feedback control values, box-constrained to [-a_max, a_max]."""

    values: np.ndarray
    grid: TorusGrid
    time_grid: TimeGrid
    a_max: float

    def __post_init__(self) -> None:
        values = _freeze(self.values)
        _check_shape(values, self.time_grid.n_t, self.grid.n_x, "control values")
        if not self.a_max >= 0.0:
            raise DimensionError(f"a_max must be nonnegative, got {self.a_max}")
        bound = self.a_max * (1.0 + 1e-12) + 1e-300
        if float(np.max(np.abs(values), initial=0.0)) > bound:
            raise DimensionError(
                f"control values must lie in [-{self.a_max:g}, {self.a_max:g}]"
            )
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class AdjointField:
    """Costate per time slice; when the terminal cost is supplied the last
    slice must match it exactly."""

    values: np.ndarray
    grid: TorusGrid
    time_grid: TimeGrid
    terminal_cost: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        values = _freeze(self.values)
        _check_shape(values, self.time_grid.n_t + 1, self.grid.n_x, "adjoint values")
        if self.terminal_cost is not None:
            psi = np.asarray(self.terminal_cost, dtype=np.float64)
            if psi.shape != (self.grid.n_x,):
                raise DimensionError(
                    f"terminal_cost must have shape ({self.grid.n_x},), got {psi.shape}"
                )
            if not np.array_equal(values[-1], psi):
                raise DimensionError("adjoint terminal slice must equal the terminal cost")
            object.__setattr__(self, "terminal_cost", _freeze(psi))
        object.__setattr__(self, "values", values)

    @property
    def terminal(self) -> np.ndarray:
        return self.values[-1]


def write_field_csv(path, times: np.ndarray, values: np.ndarray, grid: TorusGrid) -> None:
    """Write a field as ``t,x,value`` rows, slice-major, 17 significant digits.

    ``times`` selects which slice times are written and must match the first
    axis of ``values``; nodes run in index order within each slice.
    """
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape != (times.size, grid.n_x):
        raise DimensionError(
            f"values must have shape ({times.size}, {grid.n_x}), got {values.shape}"
        )
    nodes = grid.nodes()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("t,x,value\n")
        for k in range(times.size):
            t_txt = f"{times[k]:.17g}"
            row = values[k]
            for i in range(grid.n_x):
                fh.write(f"{t_txt},{nodes[i]:.17g},{row[i]:.17g}\n")


def read_field_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read a ``t,x,value`` CSV back into (times, nodes, values).

    Relies on the writer's ordering contract: rows are slice-major with a full
    set of nodes per slice.
    """
    ts: list[float] = []
    xs: list[float] = []
    vs: list[float] = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["t", "x", "value"]:
            raise DimensionError(f"unexpected field CSV header: {header}")
        for row in reader:
            ts.append(float(row[0]))
            xs.append(float(row[1]))
            vs.append(float(row[2]))
    if not ts:
        raise DimensionError("field CSV has no data rows")
    t_arr = np.asarray(ts)
    n_x = int(np.argmax(t_arr != t_arr[0])) or t_arr.size
    if t_arr.size % n_x != 0:
        raise DimensionError("field CSV rows do not tile into complete slices")
    n_slices = t_arr.size // n_x
    times = t_arr.reshape(n_slices, n_x)[:, 0].copy()
    nodes = np.asarray(xs[:n_x])
    values = np.asarray(vs).reshape(n_slices, n_x)
    return times, nodes, values
