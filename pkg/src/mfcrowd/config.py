"""TOML experiment configuration: schema, defaults, and validation.

The file describes one problem instance plus run settings.  Unknown tables or
keys are hard errors (typos must not silently fall back to defaults); missing
optional keys take the documented defaults; three keys are required.  The
kernel table always describes the nonlocal kernel; the experiment runner
derives the local arm by swapping kernel modes.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigurationError
from .forward import Dynamics
from .grids import TimeGrid, TorusGrid, cfl_time_step
from .kernels import build_kernel
from .optimizer import GdmParams
from .problem import MultiCrowdProblem, builtin_profiles, default_time_steps

REQUIRED_KEYS = ("grid.n_x", "problem.coupling", "problem.horizon")

_SCHEMA = {
    "problem": {
        "horizon",
        "coupling",
        "crowds",
        "profile",
        "m0",
        "psi",
        "lambda",
        "seed",
    },
    "grid": {"n_x", "n_t", "length"},
    "dynamics": {"sigma"},
    "kernel": {"support_lo", "support_hi", "delta"},
    "optimizer": {"tau0", "shrink", "max_iters", "rel_tol", "a_max"},
    "particles": {"ladder", "replicates"},
    "convexity": {"trials"},
    "io": {"time_stride"},
}


def _check_known(doc: dict, path: Path) -> None:
    for table, content in doc.items():
        if table not in _SCHEMA:
            raise ConfigurationError(f"{path}: unknown config table [{table}]")
        if not isinstance(content, dict):
            raise ConfigurationError(f"{path}: [{table}] must be a table, got {content!r}")
        for key in content:
            if key not in _SCHEMA[table]:
                raise ConfigurationError(f"{path}: unknown config key '{table}.{key}'")


def _number(doc: dict, table: str, key: str, default):
    value = doc.get(table, {}).get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"config key '{table}.{key}' must be a number, got {value!r}")
    return value


def _integer(doc: dict, table: str, key: str, default):
    value = doc.get(table, {}).get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"config key '{table}.{key}' must be an integer, got {value!r}")
    return value


def _crowd_arrays(doc: dict, key: str, crowds: int, n_x: int):
    """m0/psi overrides: one row of n_x numbers, or one row per crowd."""
    value = doc.get("problem", {}).get(key)
    if value is None:
        return None
    if not isinstance(value, list) or not value:
        raise ConfigurationError(f"config key 'problem.{key}' must be a nonempty array")
    rows = value if isinstance(value[0], list) else [value]
    if len(rows) != crowds or any(len(r) != n_x for r in rows):
        raise ConfigurationError(
            f"config key 'problem.{key}' must give {crowds} row(s) of {n_x} values"
        )
    return np.asarray(rows, dtype=np.float64)


def parse_config(path) -> MultiCrowdProblem:
    """Read and fully validate a TOML experiment file.

    Raises ConfigurationError for syntax errors, unknown keys, missing
    required keys, and physically inconsistent settings (the CFL check names
    cfl_max_dt).  Defaults are baked into the returned problem, so the echo
    written by the runner shows every resolved value.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid TOML: {exc}") from exc
    _check_known(doc, path)
    missing = [
        dotted
        for dotted in REQUIRED_KEYS
        if dotted.split(".")[1] not in doc.get(dotted.split(".")[0], {})
    ]
    if missing:
        raise ConfigurationError(f"{path}: missing required keys: {', '.join(missing)}")

    grid = TorusGrid(
        n_x=_integer(doc, "grid", "n_x", None),
        length=float(_number(doc, "grid", "length", 1.0)),
    )
    dynamics = Dynamics(sigma=float(_number(doc, "dynamics", "sigma", 1.0)))
    gdm = GdmParams(
        tau0=float(_number(doc, "optimizer", "tau0", 1.0)),
        shrink=float(_number(doc, "optimizer", "shrink", 0.5)),
        max_iters=_integer(doc, "optimizer", "max_iters", 500),
        rel_tol=float(_number(doc, "optimizer", "rel_tol", 1e-6)),
        a_max=float(_number(doc, "optimizer", "a_max", 10.0)),
    )
    horizon = float(_number(doc, "problem", "horizon", None))
    n_t = doc.get("grid", {}).get("n_t")
    if n_t is None:
        n_t = default_time_steps(grid, dynamics, gdm.a_max, horizon)
    else:
        n_t = _integer(doc, "grid", "n_t", None)
    time_grid = TimeGrid(horizon=horizon, n_t=n_t)

    crowds = _integer(doc, "problem", "crowds", 1)
    if crowds < 1:
        raise ConfigurationError(f"problem.crowds must be >= 1, got {crowds}")
    profile = doc.get("problem", {}).get("profile", "antipodal")
    if not isinstance(profile, str):
        raise ConfigurationError(f"config key 'problem.profile' must be a string, got {profile!r}")
    density_of, cost_of = builtin_profiles(profile)
    m0 = _crowd_arrays(doc, "m0", crowds, grid.n_x)
    psi = _crowd_arrays(doc, "psi", crowds, grid.n_x)
    # explicit arrays supersede the profile; the echo must then tabulate
    # both fields or it would round-trip to a different problem
    if m0 is not None or psi is not None:
        profile = None
    if m0 is None:
        m0 = np.tile(density_of(grid), (crowds, 1))
    if psi is None:
        psi = np.tile(cost_of(grid), (crowds, 1))

    lam = doc.get("problem", {}).get("lambda")
    if lam is None:
        lam = np.eye(crowds)
    else:
        lam = np.asarray(lam, dtype=np.float64)
        if lam.shape != (crowds, crowds):
            raise ConfigurationError(
                f"config key 'problem.lambda' must be a {crowds}x{crowds} matrix"
            )

    support_lo = float(_number(doc, "kernel", "support_lo", 0.0))
    support_hi = float(_number(doc, "kernel", "support_hi", 0.2))
    delta = doc.get("kernel", {}).get("delta")
    delta = float(_number(doc, "kernel", "delta", 0.0)) if delta is not None else None
    kernel = build_kernel(
        grid, mode="nonlocal", support_lo=support_lo, support_hi=support_hi, delta=delta
    )

    ladder = doc.get("particles", {}).get("ladder", [100, 400, 1600])
    if not isinstance(ladder, list) or not all(
        isinstance(n, int) and not isinstance(n, bool) for n in ladder
    ):
        raise ConfigurationError("config key 'particles.ladder' must be an integer array")

    try:
        return MultiCrowdProblem(
            m0=m0,
            psi=psi,
            lambda_full=lam,
            kernel=kernel,
            coupling=float(_number(doc, "problem", "coupling", None)),
            dynamics=dynamics,
            grid=grid,
            time_grid=time_grid,
            gdm=gdm,
            convexity_trials=_integer(doc, "convexity", "trials", 100),
            seed=_integer(doc, "problem", "seed", 0),
            particle_ladder=tuple(ladder),
            particle_replicates=_integer(doc, "particles", "replicates", 10),
            time_stride=_integer(doc, "io", "time_stride", 1),
            profile_name=profile,
        )
    except ConfigurationError:
        raise
    except ValueError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc


def resolved_config(problem: MultiCrowdProblem) -> dict:
    """Problem back as the schema's tables with every default filled in."""
    doc = {
        "problem": {
            "horizon": problem.time_grid.horizon,
            "coupling": problem.coupling,
            "crowds": problem.crowd_count,
            "seed": problem.seed,
            "lambda": problem.lambda_full.tolist(),
        },
        "grid": {
            "n_x": problem.grid.n_x,
            "n_t": problem.time_grid.n_t,
            "length": problem.grid.length,
        },
        "dynamics": {"sigma": problem.dynamics.sigma},
        "kernel": {
            "support_lo": problem.kernel.support_lo,
            "support_hi": problem.kernel.support_hi,
            "delta": problem.kernel.delta,
        },
        "optimizer": {
            "tau0": problem.gdm.tau0,
            "shrink": problem.gdm.shrink,
            "max_iters": problem.gdm.max_iters,
            "rel_tol": problem.gdm.rel_tol,
            "a_max": problem.gdm.a_max,
        },
        "particles": {
            "ladder": list(problem.particle_ladder),
            "replicates": problem.particle_replicates,
        },
        "convexity": {"trials": problem.convexity_trials},
        "io": {"time_stride": problem.time_stride},
    }
    if problem.profile_name is not None:
        doc["problem"]["profile"] = problem.profile_name
    else:
        doc["problem"]["m0"] = problem.m0.tolist()
        doc["problem"]["psi"] = problem.psi.tolist()
    return doc
