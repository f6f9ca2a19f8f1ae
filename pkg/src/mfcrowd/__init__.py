"""Mean-field crowd-aversion control on the 1-D torus.

Solves the density-constrained control problem (Fokker-Planck forward,
transposed-upwind adjoint backward, projected gradient descent), compares
local and nonlocal aversion kernels, and validates the mean-field limit
against direct N-particle simulation.
"""

from .errors import (
    ConfigurationError,
    ConvexityError,
    DimensionError,
    KernelModeError,
    MFCrowdError,
    SolverStallError,
)
from .fields import AdjointField, ControlField, DensityField, read_field_csv, write_field_csv
from .forward import Dynamics, cfl_max_dt, solve_forward
from .grids import TimeGrid, TorusGrid, cfl_time_step, gradient_x, integrate
from .adjoint import solve_adjoint
from .kernels import (
    LOCAL,
    NONLOCAL,
    AversionKernel,
    build_indicator_kernel,
    build_kernel,
    crowding_term,
    mollify,
    penalty_field,
)
from .risk import (
    ConvexityVerdict,
    RiskBreakdown,
    check_convexity,
    crowd_risk,
    hamiltonian_integrand,
    pooled_risk,
    symmetrize_lambda,
)
from .optimizer import (
    DeviationReport,
    GdmParams,
    GdmResult,
    GdmTrace,
    control_gradient,
    deviation_probe,
    gdm_optimize,
    optimality_residual,
)
from .particles import (
    ParticleEnsemble,
    StudyResult,
    density_quantiles,
    empirical_histogram,
    empirical_risk,
    risk_convergence_study,
    simulate_particles,
    wasserstein2_1d,
)
from .problem import MultiCrowdProblem, builtin_profiles, default_time_steps
from .config import parse_config, resolved_config
from .experiment import RunSummary, run_experiment
from .estimator import MeanFieldCrowdControl

__version__ = "0.1.0"

__all__ = [
    "AdjointField",
    "AversionKernel",
    "ConfigurationError",
    "ControlField",
    "ConvexityError",
    "ConvexityVerdict",
    "DensityField",
    "DeviationReport",
    "DimensionError",
    "Dynamics",
    "GdmParams",
    "GdmResult",
    "GdmTrace",
    "KernelModeError",
    "LOCAL",
    "MFCrowdError",
    "MeanFieldCrowdControl",
    "MultiCrowdProblem",
    "NONLOCAL",
    "ParticleEnsemble",
    "RiskBreakdown",
    "RunSummary",
    "SolverStallError",
    "StudyResult",
    "TimeGrid",
    "TorusGrid",
    "build_indicator_kernel",
    "build_kernel",
    "builtin_profiles",
    "cfl_max_dt",
    "cfl_time_step",
    "check_convexity",
    "control_gradient",
    "crowd_risk",
    "crowding_term",
    "default_time_steps",
    "density_quantiles",
    "deviation_probe",
    "empirical_histogram",
    "empirical_risk",
    "gdm_optimize",
    "gradient_x",
    "hamiltonian_integrand",
    "integrate",
    "mollify",
    "optimality_residual",
    "parse_config",
    "penalty_field",
    "pooled_risk",
    "read_field_csv",
    "resolved_config",
    "risk_convergence_study",
    "run_experiment",
    "simulate_particles",
    "solve_adjoint",
    "solve_forward",
    "symmetrize_lambda",
    "wasserstein2_1d",
    "write_field_csv",
]
