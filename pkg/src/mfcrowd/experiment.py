"""End-to-end experiment runner: optimize both kernel arms, emit artifacts.

A run directory holds the resolved config echo, one subdirectory per arm
(risk_history.csv, m.csv, a.csv, p.csv), the arm-to-arm difference fields,
the particle-validation tables when requested, and summary.json.  Everything
written is deterministic for a fixed config and seed; wall-clock timings go
to the logger, never into artifacts.

Field CSVs can be thinned with io.time_stride (stride 1 keeps every slice,
at which point the summary's risk numbers are recomputable from m.csv and
a.csv alone).
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import resolved_config
from .errors import ConfigurationError
from .fields import write_field_csv
from .kernels import LOCAL, NONLOCAL, build_kernel, crowding_stacked
from .optimizer import GdmResult, GdmTrace, gdm_optimize
from .particles import ParticleEnsemble, StudyResult, risk_convergence_study, simulate_particles
from .problem import MultiCrowdProblem
from .risk import crowd_risk

logger = logging.getLogger("mfcrowd")

ARMS = (LOCAL, NONLOCAL)


def _toml_dumps(doc: dict) -> str:
    """Minimal TOML writer for the echo: tables of scalars and number arrays."""

    def fmt(value) -> str:
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, (int, np.integer)):
            return str(int(value))
        if isinstance(value, (float, np.floating)):
            return repr(float(value))
        if isinstance(value, str):
            escaped = value.replace("\\", "\\\\").replace('"', '\\"')
            return f'"{escaped}"'
        if isinstance(value, (list, tuple)):
            return "[" + ", ".join(fmt(v) for v in value) + "]"
        raise TypeError(f"cannot serialize {value!r} to TOML")

    lines = []
    for table, content in doc.items():
        lines.append(f"[{table}]")
        for key, value in content.items():
            lines.append(f"{key} = {fmt(value)}")
        lines.append("")
    return "\n".join(lines)


def _write_risk_history(path: Path, trace: GdmTrace) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(GdmTrace.CSV_COLUMNS) + "\n")
        for row in trace.rows():
            fh.write(",".join("%.17g" % v if isinstance(v, float) else str(v) for v in row))
            fh.write("\n")


def _crowd_path(out_dir: Path, stem: str, crowd: int, crowds: int) -> Path:
    if crowds == 1:
        return out_dir / f"{stem}.csv"
    return out_dir / f"{stem}_crowd{crowd + 1}.csv"


def _write_arm(out_dir: Path, result: GdmResult, problem: MultiCrowdProblem) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    stride = problem.time_stride
    times = problem.time_grid.times()
    _write_risk_history(out_dir / "risk_history.csv", result.trace)
    for j in range(problem.crowd_count):
        write_field_csv(
            _crowd_path(out_dir, "m", j, problem.crowd_count),
            times[::stride],
            result.densities[j].values[::stride],
            problem.grid,
        )
        write_field_csv(
            _crowd_path(out_dir, "a", j, problem.crowd_count),
            times[:-1][::stride],
            result.controls[j].values[::stride],
            problem.grid,
        )
        write_field_csv(
            _crowd_path(out_dir, "p", j, problem.crowd_count),
            times[::stride],
            result.adjoints[j].values[::stride],
            problem.grid,
        )


def _write_differences(
    path: Path,
    nonlocal_result: GdmResult,
    local_result: GdmResult,
    problem: MultiCrowdProblem,
) -> None:
    """Nonlocal-minus-local penalty and density fields on the strided grid."""
    stride = problem.time_stride
    times = problem.time_grid.times()[::stride]
    m_nl = nonlocal_result.densities[0].values[::stride]
    m_loc = local_result.densities[0].values[::stride]
    penalty_diff = crowding_stacked(problem.kernel, m_nl) - m_loc
    density_diff = m_nl - m_loc
    nodes = problem.grid.nodes()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,x,penalty_diff,density_diff\n")
        for k, t in enumerate(times):
            for i, x in enumerate(nodes):
                fh.write(
                    "%.17g,%.17g,%.17g,%.17g\n"
                    % (t, x, penalty_diff[k, i], density_diff[k, i])
                )


def _write_study(out_dir: Path, study: StudyResult, nodes: np.ndarray) -> None:
    with open(out_dir / "particles.csv", "w", encoding="utf-8") as fh:
        fh.write("n,replicate,mean_empirical_risk,mean_field_risk,gap,w2_terminal\n")
        for r in study.rows:
            fh.write(
                "%d,%d,%.17g,%.17g,%.17g,%.17g\n"
                % (
                    r.n_particles,
                    r.replicate,
                    r.mean_empirical_risk,
                    r.mean_field_risk,
                    r.gap,
                    r.w2_terminal,
                )
            )
    with open(out_dir / "particles_checkpoints.csv", "w", encoding="utf-8") as fh:
        fh.write("n,t,w2\n")
        for n, table in sorted(study.checkpoints.items()):
            for t, w2 in zip(table.times, table.w2):
                fh.write("%d,%.17g,%.17g\n" % (n, t, w2))
    with open(out_dir / "particles_histograms.csv", "w", encoding="utf-8") as fh:
        fh.write("n,t,x,value\n")
        for n, table in sorted(study.checkpoints.items()):
            for row, t in enumerate(table.times):
                for i, v in enumerate(table.histograms[row]):
                    fh.write("%d,%.17g,%.17g,%.17g\n" % (n, t, nodes[i], v))


def _write_trajectories(path: Path, ensemble: ParticleEnsemble) -> None:
    times = ensemble.time_grid.times()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("particle,t,x\n")
        for i in range(ensemble.n_particles):
            for t, x in zip(times, ensemble.positions[i]):
                fh.write("%d,%.17g,%.17g\n" % (i, t, x))


def _arm_summary(result: GdmResult) -> dict:
    trace = result.trace
    masses = np.stack([d.mass() for d in result.densities])
    return {
        "risk": {
            "energy": result.risk.energy,
            "aversion": result.risk.aversion,
            "terminal": result.risk.terminal,
            "total": result.risk.total,
        },
        "iterations": int(trace.iters[-1]),
        "converged": trace.converged,
        "stalled": trace.stalled,
        "residual_initial": float(trace.opt_residual[0]),
        "residual_final": float(trace.opt_residual[-1]),
        "peak_terminal_density": [
            float(np.max(d.values[-1])) for d in result.densities
        ],
        "min_density": float(min(np.min(d.values) for d in result.densities)),
        "max_mass_error": float(np.max(np.abs(masses - 1.0))),
    }


@dataclass(frozen=True)
class RunSummary:
    """What run_experiment computed; `data` is exactly what summary.json holds."""

    data: dict
    results: dict
    study: StudyResult | None
    out_dir: Path

    @property
    def stalled(self) -> bool:
        return any(arm["stalled"] for arm in self.data["arms"].values())


def run_experiment(
    problem: MultiCrowdProblem,
    out_dir,
    arms=ARMS,
    particles: bool = False,
    override_convexity: bool = False,
    dump_trajectories: bool = False,
) -> RunSummary:
    """Optimize the requested arms and write the full artifact set.

    The problem's kernel drives the nonlocal arm; the local arm swaps in the
    local mode.  Raises ConvexityError (exit code 3 at the CLI) unless
    overridden; a line-search stall is reported, not raised, so partial
    artifacts survive (exit code 2 at the CLI).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if problem.kernel.is_local:
        raise ConfigurationError(
            "run_experiment expects the problem to carry the nonlocal kernel; "
            "the local arm is derived from it"
        )
    unknown = [arm for arm in arms if arm not in ARMS]
    if unknown:
        raise ConfigurationError(f"unknown arm(s) {unknown}; choose from {list(ARMS)}")
    (out_dir / "config.toml").write_text(_toml_dumps(resolved_config(problem)), encoding="utf-8")

    results: dict[str, GdmResult] = {}
    arm_data: dict[str, dict] = {}
    for arm in ARMS:
        if arm not in arms:
            continue
        arm_problem = (
            problem if arm == NONLOCAL else problem.with_kernel(build_kernel(problem.grid, LOCAL))
        )
        start = time.perf_counter()
        result = gdm_optimize(arm_problem, override_convexity=override_convexity)
        logger.info("%s arm: %d iterations in %.1f s", arm, len(result.trace) - 1,
                    time.perf_counter() - start)
        results[arm] = result
        _write_arm(out_dir / arm, result, arm_problem)
        summary = _arm_summary(result)
        verdict = result.convexity
        if verdict is not None:
            summary["convexity"] = {
                "status": verdict.status,
                "trials": verdict.trials,
                "seed": verdict.seed,
                "min_value": verdict.min_value,
            }
        arm_data[arm] = summary

    data = {
        "config": resolved_config(problem),
        "arms": arm_data,
        "margins": None,
        "crowding_parity": None,
        "particles": None,
    }

    if LOCAL in results and NONLOCAL in results:
        loc, nl = results[LOCAL], results[NONLOCAL]
        _write_differences(out_dir / "differences.csv", nl, loc, problem)
        h = problem.grid.h
        m_loc_T = loc.densities[0].values[-1]
        m_nl_T = nl.densities[0].values[-1]
        penalty_T = crowding_stacked(problem.kernel, m_nl_T[None, :])[0]
        norm_loc = h * float(np.sum(np.abs(m_loc_T)))
        penalty_gap = h * float(np.sum(np.abs(penalty_T - m_loc_T))) / norm_loc
        density_gap = h * float(np.sum(np.abs(m_nl_T - m_loc_T))) / norm_loc
        data["margins"] = {
            "risk": float(loc.risk.total - nl.risk.total),
            "peak_terminal_density": float(np.max(m_nl_T) - np.max(m_loc_T)),
        }
        data["crowding_parity"] = {
            "penalty_gap_rel": penalty_gap,
            "density_gap_rel": density_gap,
            "parity_holds": bool(penalty_gap < density_gap),
        }

    study = None
    if particles:
        if NONLOCAL not in results:
            raise ConfigurationError("particle validation needs the nonlocal arm")
        nl = results[NONLOCAL]
        base = crowd_risk(
            0,
            nl.controls,
            nl.densities,
            problem.psi[0],
            problem.lambda_full,
            problem.kernel,
            problem.coupling,
            problem.grid,
            problem.time_grid,
        )
        start = time.perf_counter()
        study = risk_convergence_study(
            nl.controls[0],
            problem.m0[0],
            nl.densities[0],
            base.total,
            problem.kernel,
            problem.coupling,
            problem.psi[0],
            problem.dynamics,
            problem.grid,
            problem.time_grid,
            ladder=problem.particle_ladder,
            n_replicates=problem.particle_replicates,
            base_seed=problem.seed,
        )
        logger.info("particle study in %.1f s", time.perf_counter() - start)
        _write_study(out_dir, study, problem.grid.nodes())
        data["particles"] = {
            "ladder": list(study.ladder),
            "replicates": problem.particle_replicates,
            "mean_abs_gap": {str(n): study.mean_abs_gap[n] for n in study.ladder},
            "mean_w2_terminal": {str(n): study.mean_w2_terminal[n] for n in study.ladder},
            "gap_non_increasing": study.gaps_non_increasing(),
            "w2_non_increasing": study.w2_non_increasing(),
        }
        if dump_trajectories:
            ensemble = simulate_particles(
                study.ladder[0],
                nl.controls[0],
                problem.m0[0],
                problem.dynamics,
                problem.grid,
                problem.time_grid,
                problem.seed,
            )
            _write_trajectories(out_dir / "trajectories.csv", ensemble)

    (out_dir / "summary.json").write_text(
        json.dumps(data, sort_keys=True, indent=2, allow_nan=False) + "\n", encoding="utf-8"
    )
    return RunSummary(data=data, results=results, study=study, out_dir=out_dir)
