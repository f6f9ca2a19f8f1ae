"""Estimator-style wrapper around the solver pipeline.

MeanFieldCrowdControl follows the fit/predict convention: hyperparameters in
__init__, data (the initial density) in fit, learned quantities in trailing-
underscore attributes.  It is a facade over MultiCrowdProblem and
gdm_optimize for interactive use and pipeline composition; batch runs should
use the CLI, which adds artifact output on top of the same calls.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import DimensionError
from .forward import Dynamics
from .grids import TimeGrid, TorusGrid
from .kernels import build_kernel
from .optimizer import GdmParams, gdm_optimize, optimality_residual
from .problem import MultiCrowdProblem, builtin_profiles, default_time_steps


class MeanFieldCrowdControl(BaseEstimator):
    """Optimal crowd-aversion control fitted to an initial density.

    Parameters mirror the TOML schema; psi is a terminal-cost array matching
    the density's shape, or None to take the fitted profile's cost.  fit(X)
    expects X of shape (n_x,) or (M, n_x); the grid size is inferred from X.
    """

    def __init__(
        self,
        horizon: float = 1.0,
        coupling: float = 500.0,
        sigma: float = 1.0,
        kernel_mode: str = "nonlocal",
        support_lo: float = 0.0,
        support_hi: float = 0.2,
        delta: float | None = None,
        psi=None,
        lambda_full=None,
        n_t: int | None = None,
        tau0: float = 1.0,
        shrink: float = 0.5,
        max_iters: int = 500,
        rel_tol: float = 1e-6,
        a_max: float = 10.0,
        convexity_trials: int = 100,
        seed: int = 0,
        override_convexity: bool = False,
    ):
        self.horizon = horizon
        self.coupling = coupling
        self.sigma = sigma
        self.kernel_mode = kernel_mode
        self.support_lo = support_lo
        self.support_hi = support_hi
        self.delta = delta
        self.psi = psi
        self.lambda_full = lambda_full
        self.n_t = n_t
        self.tau0 = tau0
        self.shrink = shrink
        self.max_iters = max_iters
        self.rel_tol = rel_tol
        self.a_max = a_max
        self.convexity_trials = convexity_trials
        self.seed = seed
        self.override_convexity = override_convexity

    def _build_problem(self, m0: np.ndarray) -> MultiCrowdProblem:
        crowds, n_x = m0.shape
        grid = TorusGrid(n_x=n_x)
        dynamics = Dynamics(sigma=self.sigma)
        gdm = GdmParams(
            tau0=self.tau0,
            shrink=self.shrink,
            max_iters=self.max_iters,
            rel_tol=self.rel_tol,
            a_max=self.a_max,
        )
        n_t = self.n_t
        if n_t is None:
            n_t = default_time_steps(grid, dynamics, gdm.a_max, self.horizon)
        if self.psi is None:
            psi = np.tile(builtin_profiles("antipodal")[1](grid), (crowds, 1))
        else:
            psi = np.asarray(self.psi, dtype=np.float64)
            if psi.ndim == 1:
                psi = np.tile(psi, (crowds, 1))
        lam = np.eye(crowds) if self.lambda_full is None else np.asarray(self.lambda_full)
        kernel = build_kernel(
            grid,
            mode=self.kernel_mode,
            support_lo=self.support_lo,
            support_hi=self.support_hi,
            delta=self.delta,
        )
        return MultiCrowdProblem(
            m0=m0,
            psi=psi,
            lambda_full=lam,
            kernel=kernel,
            coupling=self.coupling,
            dynamics=dynamics,
            grid=grid,
            time_grid=TimeGrid(horizon=self.horizon, n_t=n_t),
            gdm=gdm,
            convexity_trials=self.convexity_trials,
            seed=self.seed,
        )

    def fit(self, X, y=None):
        """Solve the control problem whose initial density is X."""
        m0 = check_array(X, ensure_2d=False, dtype=np.float64)
        if m0.ndim == 1:
            m0 = m0[None, :]
        if m0.ndim != 2:
            raise DimensionError(f"X must be 1- or 2-dimensional, got ndim = {m0.ndim}")
        problem = self._build_problem(m0)
        result = gdm_optimize(problem, override_convexity=self.override_convexity)
        self.problem_ = problem
        self.result_ = result
        self.controls_ = result.controls
        self.densities_ = result.densities
        self.trace_ = result.trace
        self.risk_ = result.risk
        self.n_iter_ = int(result.trace.iters[-1])
        self.residual_ = float(result.trace.opt_residual[-1])
        self.stalled_ = result.trace.stalled
        return self

    def predict(self, X):
        """Control values at (t, x) query pairs; shape (n,) or (n, M).

        Lookup matches the solver's convention: nearest cell in space,
        enclosing step in time (t = horizon falls into the last step).
        """
        check_is_fitted(self, "controls_")
        pts = check_array(X, dtype=np.float64)
        if pts.shape[1] != 2:
            raise DimensionError(f"X must be (n, 2) pairs (t, x), got {pts.shape}")
        problem = self.problem_
        tg, grid = problem.time_grid, problem.grid
        if np.any(pts[:, 0] < 0.0) or np.any(pts[:, 0] > tg.horizon):
            raise DimensionError("query times must lie in [0, horizon]")
        steps = np.minimum((pts[:, 0] / tg.dt).astype(np.int64), tg.n_t - 1)
        cells = grid.nearest_cell(pts[:, 1])
        out = np.stack([c.values[steps, cells] for c in self.controls_], axis=1)
        return out[:, 0] if out.shape[1] == 1 else out

    def score(self, X=None, y=None) -> float:
        """Negative total risk (higher is better, as score conventions expect)."""
        check_is_fitted(self, "risk_")
        return -self.risk_.total
