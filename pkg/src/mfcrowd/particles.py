"""Direct N-pedestrian simulation, empirical risk, and convergence checks.

Particles follow Euler-Maruyama steps of dX = a(t, X) dt + sigma dW on the
torus, with the control read at the nearest grid node (the control is
piecewise constant; interpolating would blur the optimizer's output).  Every
particle owns an RNG substream spawned from the ensemble seed, so particle i
draws the same noise regardless of ensemble size or execution order.

``simulate_particles`` materializes the full N x (n_t+1) path matrix, which
is fine at test scale; ``risk_convergence_study`` walks each replicate
ensemble in time chunks (identical draws, since chunked normals continue
each particle's substream) and accumulates per-slice occupancy histograms,
from which the mean empirical risk over particles is recovered exactly (the
kernel lookup snaps displacements to cell differences, making the pair sum
a function of the histogram alone).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._jit import njit
from .errors import DimensionError, KernelModeError
from .fields import ControlField, DensityField
from .forward import Dynamics, same_axes
from .grids import TimeGrid, TorusGrid
from .kernels import AversionKernel


@dataclass(frozen=True)
class ParticleEnsemble:
    """Simulated paths: positions[i, k] is particle i at slice time t_k."""

    positions: np.ndarray
    seed: object
    grid: TorusGrid
    time_grid: TimeGrid

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != self.time_grid.n_t + 1:
            raise DimensionError(
                f"positions must have shape (N, {self.time_grid.n_t + 1}), got {pos.shape}"
            )
        if pos.shape[0] < 1:
            raise DimensionError("ensemble needs at least one particle")
        if np.any(pos < 0.0) or np.any(pos >= self.grid.length):
            raise DimensionError("positions must be wrapped into [0, length)")
        object.__setattr__(self, "positions", pos)

    @property
    def n_particles(self) -> int:
        return int(self.positions.shape[0])


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _sample_initial(u: float, cum_mass: np.ndarray, grid: TorusGrid) -> float:
    """Inverse-CDF draw from a cellwise-constant density; u in [0, 1)."""
    q = u * cum_mass[-1]
    idx = int(np.searchsorted(cum_mass, q, side="right"))
    idx = min(idx, grid.n_x - 1)
    prev = cum_mass[idx - 1] if idx > 0 else 0.0
    mass = cum_mass[idx] - prev
    frac = (q - prev) / mass if mass > 0.0 else 0.0
    return ((idx - 0.5) * grid.h + frac * grid.h) % grid.length


@njit(cache=True)
def _walk_into(path, normals, a, h, dt, length, sig_sqdt, counts, x0):
    """Walk one particle, writing its path and per-slice cell counts.

    Returns the time-integrated control energy along the path.
    """
    n_t, n_x = a.shape
    x = x0 % length
    path[0] = x
    energy = 0.0
    for k in range(n_t):
        cell = int(np.floor(x / h + 0.5)) % n_x
        counts[k, cell] += 1
        av = a[k, cell]
        energy += 0.5 * av * av
        x = (x + av * dt + sig_sqdt * normals[k]) % length
        path[k + 1] = x
    cell = int(np.floor(x / h + 0.5)) % n_x
    counts[n_t, cell] += 1
    return energy * dt


@njit(cache=True)
def _walk_chunk(xs, normals, a, k0, k1, h, dt, length, sig_sqdt, counts, energies, cp_col, cp_pos):
    """Advance every particle through slices [k0, k1), accumulating counts.

    Walking the whole ensemble one time chunk at a time keeps the control
    slab resident in cache instead of streaming the full table once per
    particle.  ``cp_col[k]`` maps a slice to its checkpoint column (-1 when
    the slice is not a checkpoint); energies accumulate sum 0.5 a^2 without
    the dt factor.
    """
    n_x = a.shape[1]
    for i in range(xs.shape[0]):
        x = xs[i]
        e = 0.0
        for k in range(k0, k1):
            cell = int(np.floor(x / h + 0.5)) % n_x
            counts[k, cell] += 1
            col = cp_col[k]
            if col >= 0:
                cp_pos[i, col] = x
            av = a[k, cell]
            e += 0.5 * av * av
            x = (x + av * dt + sig_sqdt * normals[i, k - k0]) % length
        xs[i] = x
        energies[i] += e


def simulate_particles(
    n_particles: int,
    control: ControlField,
    m0: np.ndarray,
    dynamics: Dynamics,
    grid: TorusGrid,
    time_grid: TimeGrid,
    seed,
) -> ParticleEnsemble:
    """Euler-Maruyama ensemble under a feedback control.

    Initial positions are i.i.d. draws from m0 (inverse CDF of the cellwise
    density, uniform within a cell); each particle's first uniform and its
    normals come from its own substream.
    """
    if n_particles < 1:
        raise DimensionError(f"need at least one particle, got {n_particles}")
    m0 = np.asarray(m0, dtype=np.float64)
    if m0.shape != (grid.n_x,):
        raise DimensionError(f"m0 must have shape ({grid.n_x},), got {m0.shape}")
    if not same_axes(control.time_grid, time_grid) or control.grid != grid:
        raise DimensionError("control is defined on different grids")
    cum_mass = np.cumsum(m0 * grid.h)
    if cum_mass[-1] <= 0.0:
        raise DimensionError("m0 must carry positive mass")
    children = _seed_sequence(seed).spawn(n_particles)
    a = control.values
    sig_sqdt = dynamics.sigma * np.sqrt(time_grid.dt)
    counts = np.zeros((time_grid.n_t + 1, grid.n_x), dtype=np.int64)
    positions = np.empty((n_particles, time_grid.n_t + 1))
    for i in range(n_particles):
        gen = np.random.Generator(np.random.PCG64(children[i]))
        x0 = _sample_initial(gen.random(), cum_mass, grid)
        normals = gen.standard_normal(time_grid.n_t)
        _walk_into(
            positions[i], normals, a, grid.h, time_grid.dt, grid.length, sig_sqdt, counts, x0
        )
    return ParticleEnsemble(positions=positions, seed=seed, grid=grid, time_grid=time_grid)


def _cells(positions: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return np.mod(np.floor(positions / grid.h + 0.5).astype(np.int64), grid.n_x)


def empirical_risk(
    i: int,
    ensemble: ParticleEnsemble,
    control: ControlField,
    kernel: AversionKernel,
    coupling: float,
    psi: np.ndarray,
    grid: TorusGrid,
    time_grid: TimeGrid,
) -> float:
    """Particle i's realized risk against its N-1 peers.

    sum_k dt * (1/2 a(t_k, X_i)^2 + C/(N-1) sum_{j != i} phi(X_i - X_j))
    + Psi(X_i(T)); the kernel is read from the weight table at the wrapped
    cell-index displacement, consistent with the control lookup.
    """
    n = ensemble.n_particles
    if not 0 <= i < n:
        raise DimensionError(f"particle index {i} out of range for N = {n}")
    if kernel.is_local:
        raise KernelModeError(
            "empirical risk needs a nonlocal kernel table; the local mode has "
            "no particle-level analogue"
        )
    psi = np.asarray(psi, dtype=np.float64)
    n_t = time_grid.n_t
    cells = _cells(ensemble.positions, grid)
    own = cells[i]
    a_rows = control.values[np.arange(n_t), own[:n_t]]
    energy = 0.5 * time_grid.dt * float(np.sum(a_rows * a_rows))
    aversion = 0.0
    if n >= 2:
        disp = np.mod(own[None, :n_t] - cells[:, :n_t], grid.n_x)
        table = np.asarray(kernel.weights)
        pair_sum = float(np.sum(table[disp])) - n_t * float(table[0])
        aversion = coupling * time_grid.dt * pair_sum / (n - 1)
    terminal = float(psi[own[n_t]])
    return energy + aversion + terminal


def empirical_histogram(ensemble: ParticleEnsemble, t_index: int, grid: TorusGrid) -> np.ndarray:
    """Cell occupancy of slice t_index, normalized to unit mass (counts/(N h))."""
    n_slices = ensemble.time_grid.n_t + 1
    if not 0 <= t_index < n_slices:
        raise DimensionError(f"t_index {t_index} out of range for {n_slices} slices")
    cells = _cells(ensemble.positions[:, t_index], grid)
    counts = np.bincount(cells, minlength=grid.n_x).astype(np.float64)
    return counts / (ensemble.n_particles * grid.h)


def wasserstein2_1d(sample_a, sample_b, length: float = 1.0) -> float:
    """Exact W2 between equal-size empirical measures on the circle.

    Sorts both samples and minimizes the mean squared geodesic distance over
    all N cyclic pairings (the optimal matching on the circle is cyclic and
    order-preserving).
    """
    a = np.sort(np.mod(np.asarray(sample_a, dtype=np.float64).ravel(), length))
    b = np.sort(np.mod(np.asarray(sample_b, dtype=np.float64).ravel(), length))
    if a.size == 0 or b.size == 0:
        raise DimensionError("samples must be nonempty")
    if a.size != b.size:
        raise DimensionError(f"sample sizes differ: {a.size} vs {b.size}")
    n = a.size
    doubled = np.concatenate([b, b])
    windows = np.lib.stride_tricks.sliding_window_view(doubled, n)[:n]
    best = np.inf
    chunk = max(1, 2_000_000 // n)
    for s0 in range(0, n, chunk):
        win = windows[s0 : min(s0 + chunk, n)]
        d = np.abs(win - a[None, :])
        d = np.minimum(d, length - d)
        cost = float(np.einsum("sk,sk->s", d, d).min())
        if cost < best:
            best = cost
    return float(np.sqrt(best / n))


def density_quantiles(m_slice: np.ndarray, grid: TorusGrid, n: int) -> np.ndarray:
    """Quantile sample of a cellwise density at levels (k - 1/2)/n, sorted."""
    if n < 1:
        raise DimensionError(f"need at least one quantile, got {n}")
    m = np.asarray(m_slice, dtype=np.float64)
    if m.shape != (grid.n_x,):
        raise DimensionError(f"density slice must have shape ({grid.n_x},), got {m.shape}")
    masses = m * grid.h
    cum = np.cumsum(masses)
    q = (np.arange(1, n + 1) - 0.5) / n * cum[-1]
    idx = np.minimum(np.searchsorted(cum, q, side="left"), grid.n_x - 1)
    prev = np.where(idx > 0, cum[idx - 1], 0.0)
    mass = masses[idx]
    frac = np.where(mass > 0.0, (q - prev) / np.maximum(mass, 1e-300), 0.0)
    x = ((idx - 0.5) * grid.h + frac * grid.h) % grid.length
    return np.sort(x)


@njit(cache=True)
def _pair_total(counts, lookup, w_val, w0, n_t_used):
    """sum over slices k < n_t_used of (sum_{i,j} w[c_i - c_j] - N w[0]).

    ``lookup[c, t]`` is the cell index c - d_t mod n_x for the t-th nonzero
    kernel displacement d_t.
    """
    total = 0.0
    n_x = counts.shape[1]
    n_support = w_val.size
    n_particles = 0
    for c in range(n_x):
        n_particles += counts[0, c]
    for k in range(n_t_used):
        row = counts[k]
        s = 0.0
        for c in range(n_x):
            rc = row[c]
            if rc > 0:
                acc = 0.0
                for t in range(n_support):
                    acc += w_val[t] * row[lookup[c, t]]
                s += rc * acc
        total += s - n_particles * w0
    return total


@dataclass(frozen=True)
class StudyRow:
    """One (N, replicate) entry of the convergence ladder."""

    n_particles: int
    replicate: int
    mean_empirical_risk: float
    mean_field_risk: float
    gap: float
    w2_terminal: float


@dataclass(frozen=True)
class CheckpointTable:
    """Diagnostics at a few slice times for one representative run."""

    slice_indices: np.ndarray
    times: np.ndarray
    w2: np.ndarray
    histograms: np.ndarray


@dataclass(frozen=True)
class StudyResult:
    rows: tuple[StudyRow, ...]
    ladder: tuple[int, ...]
    mean_abs_gap: dict
    mean_w2_terminal: dict
    checkpoints: dict

    def gaps_non_increasing(self) -> bool:
        vals = [self.mean_abs_gap[n] for n in self.ladder]
        return all(b <= a for a, b in zip(vals, vals[1:]))

    def w2_non_increasing(self) -> bool:
        vals = [self.mean_w2_terminal[n] for n in self.ladder]
        return all(b <= a for a, b in zip(vals, vals[1:]))


def risk_convergence_study(
    control: ControlField,
    m0: np.ndarray,
    mean_density: DensityField,
    mean_field_risk: float,
    kernel: AversionKernel,
    coupling: float,
    psi: np.ndarray,
    dynamics: Dynamics,
    grid: TorusGrid,
    time_grid: TimeGrid,
    ladder: Sequence[int] = (100, 400, 1600),
    n_replicates: int = 10,
    base_seed: int = 0,
    n_checkpoints: int = 9,
) -> StudyResult:
    """Empirical-vs-mean-field risk gap and terminal W2 across an N ladder.

    For every (N, replicate) the mean over particles of the empirical risk is
    accumulated in streaming form: per-slice occupancy histograms make the
    pairwise aversion sum exact without holding the ensemble in memory.
    Checkpoint diagnostics (histograms and W2 against the mean-field density)
    are collected for replicate 0 of each N.
    """
    if kernel.is_local:
        raise KernelModeError("the convergence study needs a nonlocal kernel table")
    psi = np.asarray(psi, dtype=np.float64)
    m0 = np.asarray(m0, dtype=np.float64)
    cum_mass = np.cumsum(m0 * grid.h)
    a = control.values
    n_t = time_grid.n_t
    sig_sqdt = dynamics.sigma * np.sqrt(time_grid.dt)

    table = np.asarray(kernel.weights)
    support = np.nonzero(table)[0]
    w_val = table[support]
    lookup = np.mod(np.arange(grid.n_x)[:, None] - support[None, :], grid.n_x).astype(np.int64)

    cp_idx = np.unique(np.round(np.linspace(0, n_t, n_checkpoints)).astype(np.int64))
    times = time_grid.times()

    rows = []
    checkpoints = {}
    counts = np.zeros((n_t + 1, grid.n_x), dtype=np.int64)
    cp_col = np.full(n_t + 1, -1, dtype=np.int64)
    for c, k in enumerate(cp_idx):
        cp_col[k] = c
    chunk = min(4096, n_t)
    for n_particles in ladder:
        normals_buf = np.empty((n_particles, chunk))
        for rep in range(n_replicates):
            counts[:] = 0
            seed = np.random.SeedSequence(entropy=(base_seed, int(n_particles), rep))
            children = seed.spawn(n_particles)
            gens = [np.random.Generator(np.random.PCG64(child)) for child in children]
            xs = np.array([_sample_initial(g.random(), cum_mass, grid) for g in gens])
            energies = np.zeros(n_particles)
            cp_pos = np.empty((n_particles, cp_idx.size))
            for k0 in range(0, n_t, chunk):
                width = min(chunk, n_t - k0)
                for i, gen in enumerate(gens):
                    normals_buf[i, :width] = gen.standard_normal(width)
                _walk_chunk(
                    xs, normals_buf[:, :width], a, k0, k0 + width, grid.h,
                    time_grid.dt, grid.length, sig_sqdt, counts, energies,
                    cp_col, cp_pos,
                )
            term_cells = _cells(xs, grid)
            counts[n_t] += np.bincount(term_cells, minlength=grid.n_x)
            if cp_idx[-1] == n_t:
                cp_pos[:, -1] = xs
            terminals = xs.copy()
            energy_sum = float(energies.sum()) * time_grid.dt
            psi_sum = float(psi[term_cells].sum())
            pair = _pair_total(counts, lookup, w_val, float(table[0]), n_t)
            mean_emp = (energy_sum + psi_sum) / n_particles
            if n_particles >= 2:
                mean_emp += (
                    coupling * time_grid.dt * pair / (n_particles * (n_particles - 1))
                )
            w2_term = wasserstein2_1d(
                terminals,
                density_quantiles(mean_density.values[-1], grid, n_particles),
                length=grid.length,
            )
            rows.append(
                StudyRow(
                    n_particles=int(n_particles),
                    replicate=rep,
                    mean_empirical_risk=float(mean_emp),
                    mean_field_risk=float(mean_field_risk),
                    gap=float(mean_emp - mean_field_risk),
                    w2_terminal=float(w2_term),
                )
            )
            if rep == 0:
                hists = counts[cp_idx].astype(np.float64) / (n_particles * grid.h)
                w2_cp = np.empty(cp_idx.size)
                for c, k in enumerate(cp_idx):
                    w2_cp[c] = wasserstein2_1d(
                        cp_pos[:, c],
                        density_quantiles(mean_density.values[k], grid, n_particles),
                        length=grid.length,
                    )
                checkpoints[int(n_particles)] = CheckpointTable(
                    slice_indices=cp_idx.copy(),
                    times=times[cp_idx],
                    w2=w2_cp,
                    histograms=hists,
                )

    mean_abs_gap = {}
    mean_w2 = {}
    for n_particles in ladder:
        sub = [r for r in rows if r.n_particles == n_particles]
        mean_abs_gap[int(n_particles)] = float(np.mean([abs(r.gap) for r in sub]))
        mean_w2[int(n_particles)] = float(np.mean([r.w2_terminal for r in sub]))
    return StudyResult(
        rows=tuple(rows),
        ladder=tuple(int(n) for n in ladder),
        mean_abs_gap=mean_abs_gap,
        mean_w2_terminal=mean_w2,
        checkpoints=checkpoints,
    )
