"""Projected gradient descent on the pooled risk, with line search and
maximum-principle diagnostics.

The control update is a+ = clamp(a - tau * g, +-a_max) with backtracking on
raw risk decrease (at most 30 halvings per iteration); each trial step is
seeded by a safeguarded Barzilai-Borwein estimate from the last accepted
(control-change, gradient-change) pair, clipped to a bounded factor of the
previous accepted step.  The gradient g is the exact
derivative of the discrete risk: it pairs the costate slice k+1 with the
same upwind face weighting the forward flux uses, and therefore matches
(a + dp/dx) * m up to O(h).  The optimality residual is the L2 norm of
g / sqrt(m) over cells carrying mass, the density-weighted defect of the
pointwise optimality condition; it vanishes exactly at interior stationary
points of the discrete problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._jit import njit
from .adjoint import solve_adjoint
from .errors import ConvexityError, DimensionError, KernelModeError
from .fields import AdjointField, ControlField, DensityField
from .forward import solve_forward
from .grids import TimeGrid, TorusGrid
from .risk import (
    ConvexityVerdict,
    RiskBreakdown,
    check_convexity,
    crowd_risk,
    pooled_risk,
)

MAX_HALVINGS = 30
# Bound on how far the Barzilai-Borwein seed may move the trial step per
# iteration; keeps the retrial count per iteration small while still letting
# the step adapt by orders of magnitude over a few iterations.
BB_CLIP = 16.0


@dataclass(frozen=True)
class GdmParams:
    """Gradient-method knobs; defaults match the bundled configs."""

    tau0: float = 1.0
    shrink: float = 0.5
    max_iters: int = 500
    rel_tol: float = 1e-6
    a_max: float = 10.0

    def __post_init__(self) -> None:
        if not self.tau0 > 0.0:
            raise DimensionError(f"tau0 must be positive, got {self.tau0}")
        if not 0.0 < self.shrink < 1.0:
            raise DimensionError(f"shrink must lie in (0, 1), got {self.shrink}")
        if not self.rel_tol > 0.0:
            raise DimensionError(f"rel_tol must be positive, got {self.rel_tol}")
        if self.max_iters < 1:
            raise DimensionError(f"max_iters must be at least 1, got {self.max_iters}")
        if not self.a_max > 0.0:
            raise DimensionError(f"a_max must be positive, got {self.a_max}")


@dataclass(frozen=True)
class GdmTrace:
    """Per-accepted-iterate history (row 0 is the starting point)."""

    iters: np.ndarray
    risk_total: np.ndarray
    risk_energy: np.ndarray
    risk_aversion: np.ndarray
    risk_terminal: np.ndarray
    step: np.ndarray
    grad_norm: np.ndarray
    opt_residual: np.ndarray
    converged: bool
    stalled: bool

    CSV_COLUMNS = (
        "iter",
        "risk_total",
        "risk_energy",
        "risk_aversion",
        "risk_terminal",
        "step",
        "grad_norm",
        "opt_residual",
    )

    def __len__(self) -> int:
        return len(self.iters)

    def rows(self):
        for k in range(len(self.iters)):
            yield (
                int(self.iters[k]),
                float(self.risk_total[k]),
                float(self.risk_energy[k]),
                float(self.risk_aversion[k]),
                float(self.risk_terminal[k]),
                float(self.step[k]),
                float(self.grad_norm[k]),
                float(self.opt_residual[k]),
            )


@dataclass(frozen=True)
class GdmResult:
    """Solution bundle; iterating yields (controls, trace) for unpacking."""

    controls: tuple[ControlField, ...]
    trace: GdmTrace
    densities: tuple[DensityField, ...]
    adjoints: tuple[AdjointField, ...]
    risk: RiskBreakdown
    convexity: ConvexityVerdict | None = field(default=None)

    def __iter__(self):
        return iter((self.controls, self.trace))


@njit(cache=True)
def _gradient_kernel(a, m, p, h):
    n_t, n_x = a.shape
    g = np.empty((n_t, n_x))
    for k in range(n_t):
        nxt = p[k + 1]
        row = m[k]
        ak = a[k]
        for i in range(n_x):
            ip = i + 1 if i + 1 < n_x else 0
            im = i - 1 if i > 0 else n_x - 1
            af_r = 0.5 * (ak[i] + ak[ip])
            af_l = 0.5 * (ak[im] + ak[i])
            mup_r = row[i] if af_r > 0.0 else row[ip]
            mup_l = row[im] if af_l > 0.0 else row[i]
            g[k, i] = ak[i] * row[i] + 0.5 * (
                mup_r * (nxt[ip] - nxt[i]) + mup_l * (nxt[i] - nxt[im])
            ) / h
    return g


def control_gradient(
    controls: Sequence[ControlField],
    densities: Sequence[DensityField],
    adjoints: Sequence[AdjointField],
    grid: TorusGrid,
    time_grid: TimeGrid,
) -> list[np.ndarray]:
    """L2 gradient of the pooled risk with respect to each crowd's control.

    g_j = (a_j + dp_j/dx) m_j, realized with the upwind face weighting that
    makes it the exact gradient of the discrete risk (the costate enters at
    slice k+1, the density at slice k, exactly as in the forward step).
    """
    if not len(controls) == len(densities) == len(adjoints):
        raise DimensionError("controls, densities and adjoints must align per crowd")
    out = []
    for a_field, m_field, p_field in zip(controls, densities, adjoints):
        out.append(
            _gradient_kernel(a_field.values, m_field.values, p_field.values, grid.h)
        )
    return out


def optimality_residual(
    controls: Sequence[ControlField],
    densities: Sequence[DensityField],
    adjoints: Sequence[AdjointField],
    grid: TorusGrid,
    time_grid: TimeGrid,
) -> float:
    """max_j of the m-weighted space-time L2 norm of (a_j + dp_j/dx).

    dp/dx is the solver's own density-weighted difference (the one whose
    m-weighted product is the exact discrete gradient), so the residual is
    zero exactly where the first-order condition holds on {m_j > 0}; cells
    with no mass contribute nothing.  On uniform density it reduces to the
    plain central difference.
    """
    if not len(controls) == len(densities) == len(adjoints):
        raise DimensionError("controls, densities and adjoints must align per crowd")
    cell = grid.h * time_grid.dt
    worst = 0.0
    for a_field, m_field, p_field in zip(controls, densities, adjoints):
        # sum of g^2/m = sum of (a + dp/dx)^2 m, with 0/0 cells dropped
        g = _gradient_kernel(a_field.values, m_field.values, p_field.values, grid.h)
        m_run = m_field.values[:-1]
        mask = m_run > 0.0
        value = float(np.sqrt(cell * np.sum(g[mask] ** 2 / m_run[mask])))
        worst = max(worst, value)
    return worst


def _grad_norm(grads: Sequence[np.ndarray], grid: TorusGrid, time_grid: TimeGrid) -> float:
    total = sum(float(np.sum(g * g)) for g in grads)
    return float(np.sqrt(grid.h * time_grid.dt * total))


def _solve_all_forward(problem, controls):
    return tuple(
        solve_forward(problem.m0[j], controls[j], problem.dynamics, problem.grid, problem.time_grid)
        for j in range(problem.crowd_count)
    )


def gdm_optimize(
    problem,
    params: GdmParams | None = None,
    initial_controls: Sequence[ControlField] | None = None,
    override_convexity: bool = False,
    convexity_verdict: ConvexityVerdict | None = None,
) -> GdmResult:
    """Minimize the pooled risk over box-constrained feedback controls.

    Starts from zero controls unless given a warm start.  Raises
    ConvexityError when the problem's convexity check reports a violation
    and ``override_convexity`` is not set.  A line search that fails 30
    halvings ends the run with the best iterate and the stalled flag set.
    """
    params = params if params is not None else problem.gdm
    grid, time_grid = problem.grid, problem.time_grid

    if convexity_verdict is None:
        convexity_verdict = check_convexity(
            problem.lambda_bar,
            problem.kernel,
            grid,
            trials=problem.convexity_trials,
            seed=problem.seed,
        )
    if not convexity_verdict.ok and not override_convexity:
        raise ConvexityError(
            "convexity check reported a violation; pass override_convexity=True to proceed"
        )

    if initial_controls is None:
        zero = np.zeros((time_grid.n_t, grid.n_x))
        controls = tuple(
            ControlField(zero, grid, time_grid, params.a_max)
            for _ in range(problem.crowd_count)
        )
    else:
        if len(initial_controls) != problem.crowd_count:
            raise DimensionError("one initial control per crowd required")
        controls = tuple(initial_controls)

    def evaluate(ctrls):
        densities = _solve_all_forward(problem, ctrls)
        breakdown = pooled_risk(
            ctrls,
            densities,
            problem.psi,
            problem.lambda_bar,
            problem.kernel,
            problem.coupling,
            grid,
            time_grid,
        )
        return densities, breakdown

    def diagnostics(ctrls, densities):
        adjoints = tuple(
            solve_adjoint(
                ctrls,
                densities,
                problem.psi,
                problem.lambda_bar,
                problem.kernel,
                problem.coupling,
                problem.dynamics,
                grid,
                time_grid,
            )
        )
        grads = control_gradient(ctrls, densities, adjoints, grid, time_grid)
        gnorm = _grad_norm(grads, grid, time_grid)
        residual = optimality_residual(ctrls, densities, adjoints, grid, time_grid)
        return adjoints, grads, gnorm, residual

    densities, risk = evaluate(controls)
    adjoints, grads, gnorm, residual = diagnostics(controls, densities)

    hist = {name: [] for name in GdmTrace.CSV_COLUMNS}

    def record(it, breakdown, step, gn, res):
        hist["iter"].append(it)
        hist["risk_total"].append(breakdown.total)
        hist["risk_energy"].append(breakdown.energy)
        hist["risk_aversion"].append(breakdown.aversion)
        hist["risk_terminal"].append(breakdown.terminal)
        hist["step"].append(step)
        hist["grad_norm"].append(gn)
        hist["opt_residual"].append(res)

    record(0, risk, 0.0, gnorm, residual)

    converged = False
    stalled = False
    # Trial steps are seeded with a curvature estimate from the last accepted
    # iterate (Barzilai-Borwein, clipped); a plain carried-over step either
    # keeps overshooting for long stretches or grinds too slowly once the
    # soft modes dominate the tail.  Backtracking still guards every trial.
    tau_next = params.tau0

    for it in range(1, params.max_iters + 1):
        if gnorm == 0.0:
            converged = True
            break
        tau = tau_next
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            candidate = tuple(
                ControlField(
                    np.clip(c.values - tau * g, -params.a_max, params.a_max),
                    grid,
                    time_grid,
                    params.a_max,
                )
                for c, g in zip(controls, grads)
            )
            cand_densities, cand_risk = evaluate(candidate)
            if cand_risk.total < risk.total:
                accepted = True
                break
            tau *= params.shrink
        if not accepted:
            stalled = True
            break

        prev_total = risk.total
        old_controls, old_grads = controls, grads
        controls, densities, risk = candidate, cand_densities, cand_risk
        adjoints, grads, gnorm, residual = diagnostics(controls, densities)
        ss = 0.0
        sy = 0.0
        for c_new, g_new, c_old, g_old in zip(controls, grads, old_controls, old_grads):
            s = c_new.values - c_old.values
            ss += float(np.vdot(s, s))
            sy += float(np.vdot(s, np.asarray(g_new) - np.asarray(g_old)))
        if sy > 0.0:
            tau_next = min(max(ss / sy, tau / BB_CLIP), tau * BB_CLIP)
        else:
            # negative curvature along the step: keep the proven step size
            tau_next = tau
        record(it, risk, tau, gnorm, residual)

        rel_decrease = (prev_total - risk.total) / max(abs(prev_total), 1e-300)
        if rel_decrease < params.rel_tol:
            converged = True
            break

    trace = GdmTrace(
        iters=np.asarray(hist["iter"], dtype=np.int64),
        risk_total=np.asarray(hist["risk_total"]),
        risk_energy=np.asarray(hist["risk_energy"]),
        risk_aversion=np.asarray(hist["risk_aversion"]),
        risk_terminal=np.asarray(hist["risk_terminal"]),
        step=np.asarray(hist["step"]),
        grad_norm=np.asarray(hist["grad_norm"]),
        opt_residual=np.asarray(hist["opt_residual"]),
        converged=converged,
        stalled=stalled,
    )
    return GdmResult(
        controls=controls,
        trace=trace,
        densities=densities,
        adjoints=adjoints,
        risk=risk,
        convexity=convexity_verdict,
    )


@dataclass(frozen=True)
class CrowdProbeReport:
    """Per-crowd deviation-probe outcome."""

    crowd: int
    base_risk: float
    deltas: np.ndarray
    tolerance: float

    @property
    def min_delta(self) -> float:
        if self.deltas.size == 0:
            return 0.0
        return float(self.deltas.min())

    @property
    def passed(self) -> bool:
        return self.min_delta >= -self.tolerance


@dataclass(frozen=True)
class DeviationReport:
    """Nash-property probe: no crowd should gain by deviating alone."""

    crowds: tuple[CrowdProbeReport, ...]
    probes: int
    magnitude: float
    seed: int

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.crowds)


def deviation_probe(
    controls: Sequence[ControlField],
    problem,
    probes: int = 20,
    magnitude: float = 1e-2,
    seed: int = 0,
) -> DeviationReport:
    """Perturb each crowd's control alone and check its own risk cannot drop.

    Each probe adds a uniform random field in [-magnitude, magnitude] to one
    crowd's control (clamped to the box), re-solves only that crowd's
    density, and evaluates that crowd's own game risk against the frozen
    others.  The pass tolerance 1e-6*|J_j| + residual*magnitude*sqrt(T)
    bounds the first-order effect a finite optimality residual permits.
    """
    if probes < 0:
        raise DimensionError(f"probes must be nonnegative, got {probes}")
    kernel = problem.kernel
    if problem.crowd_count > 1 and not kernel.is_local and not kernel.is_symmetric:
        raise KernelModeError(
            "game-equivalence probing for several crowds requires a symmetric "
            "kernel; the one-sided kernel only supports single-crowd control"
        )
    grid, time_grid = problem.grid, problem.time_grid
    controls = tuple(controls)
    densities = _solve_all_forward(problem, controls)
    adjoints = solve_adjoint(
        controls,
        densities,
        problem.psi,
        problem.lambda_bar,
        problem.kernel,
        problem.coupling,
        problem.dynamics,
        grid,
        time_grid,
    )
    residual = optimality_residual(controls, densities, adjoints, grid, time_grid)

    rng = np.random.default_rng(seed)
    a_max = float(controls[0].a_max)
    reports = []
    for j in range(problem.crowd_count):
        base = crowd_risk(
            j,
            controls,
            densities,
            problem.psi[j],
            problem.lambda_full,
            kernel,
            problem.coupling,
            grid,
            time_grid,
        )
        deltas = np.empty(max(probes, 0))
        for r in range(probes):
            bump = rng.uniform(-magnitude, magnitude, size=controls[j].values.shape)
            perturbed_values = np.clip(controls[j].values + bump, -a_max, a_max)
            perturbed = ControlField(perturbed_values, grid, time_grid, a_max)
            probe_controls = list(controls)
            probe_controls[j] = perturbed
            probe_density = solve_forward(
                problem.m0[j], perturbed, problem.dynamics, grid, time_grid
            )
            probe_densities = list(densities)
            probe_densities[j] = probe_density
            probed = crowd_risk(
                j,
                probe_controls,
                probe_densities,
                problem.psi[j],
                problem.lambda_full,
                kernel,
                problem.coupling,
                grid,
                time_grid,
            )
            deltas[r] = probed.total - base.total
        tolerance = 1e-6 * abs(base.total) + residual * magnitude * float(
            np.sqrt(time_grid.horizon)
        )
        reports.append(
            CrowdProbeReport(crowd=j, base_risk=base.total, deltas=deltas, tolerance=tolerance)
        )
    return DeviationReport(
        crowds=tuple(reports), probes=probes, magnitude=magnitude, seed=seed
    )
