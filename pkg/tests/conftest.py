import numpy as np
import pytest

from mfcrowd import (
    Dynamics,
    GdmParams,
    MultiCrowdProblem,
    TimeGrid,
    TorusGrid,
    build_kernel,
    builtin_profiles,
)


@pytest.fixture
def grid32():
    return TorusGrid(32)


@pytest.fixture
def grid16():
    return TorusGrid(16)


def small_problem(
    n_x=32,
    n_t=1024,
    horizon=0.25,
    coupling=10.0,
    sigma=1.0,
    mode="nonlocal",
    a_max=10.0,
    max_iters=60,
    rel_tol=1e-6,
    seed=0,
):
    """One-crowd desk-scale instance on the reference profile."""
    grid = TorusGrid(n_x)
    time_grid = TimeGrid(horizon, n_t)
    density_of, cost_of = builtin_profiles("antipodal")
    kernel = build_kernel(grid, mode, support_lo=0.0, support_hi=0.2)
    return MultiCrowdProblem(
        m0=density_of(grid),
        psi=cost_of(grid),
        lambda_full=np.eye(1),
        kernel=kernel,
        coupling=coupling,
        dynamics=Dynamics(sigma=sigma),
        grid=grid,
        time_grid=time_grid,
        gdm=GdmParams(a_max=a_max, max_iters=max_iters, rel_tol=rel_tol),
        convexity_trials=20,
        seed=seed,
    )
