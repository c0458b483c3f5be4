"""Experiment tools: each returns a JSON-able dict for the CLI output layer."""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .config import ExperimentConfig, dump_config
from .diagnostics import ErrorNorms, build_convergence_table
from .errors import ConfigError
from .fem import PiecewiseLinearFunction
from .problems import build_problem
from .scheme import SimulationResult, run_simulation
from .storage import Storage

logger = logging.getLogger(__name__)


def _variant(cfg: ExperimentConfig) -> str:
    return "lgmm" if cfg.moving else "lg"


def default_run_name(cfg: ExperimentConfig) -> str:
    return f"{cfg.preset}-{_variant(cfg)}-o{cfg.order}-N{cfg.n}"


def simulate(cfg: ExperimentConfig, keep_trajectory: bool = False) -> SimulationResult:
    """Run the simulation described by ``cfg`` without writing anything."""
    cfg = cfg.resolve()
    return run_simulation(
        build_problem(cfg),
        cfg.mesh_config(),
        cfg.scheme_config(),
        cfg.n,
        moving=cfg.moving,
        keep_trajectory=keep_trajectory,
        snapshot_times=cfg.snapshot_times,
        mesh_every=cfg.trajectory_every,
        true_errors=cfg.true_errors,
    )


def _write_run(
    storage: Storage,
    run_dir: Path,
    cfg: ExperimentConfig,
    result: SimulationResult,
    per_element: int,
    prefix: str = "snapshot",
) -> list[str]:
    paths = storage.save_snapshots(run_dir, result.snapshots, per_element, prefix)
    if result.mesh_levels:
        paths.append(storage.save_mesh_trajectory(run_dir, result.mesh_levels, cfg.time_step))
    paths.append(storage.save_ledger(run_dir, result.report.ledger))
    paths.append(storage.save_mesh_stats(run_dir, result.report.mesh_stats))
    paths.append(storage.write_json(run_dir / "report.json", result.report.to_dict()))
    return [str(p) for p in paths]


def run_experiment(
    cfg: ExperimentConfig, run_name: Optional[str] = None, samples_per_element: int = 0
) -> dict[str, Any]:
    """
    Run one simulation and write its artifacts.

    Returns:
        run_dir: Directory holding the CSV and JSON artifacts
        report: Errors, mass ledger summary, mesh statistics, hypothesis check
        artifacts: Paths of the written files
    """
    cfg = cfg.resolve()
    storage = Storage(Path(cfg.output_dir))
    run_dir = storage.run_dir(run_name or default_run_name(cfg))
    storage.write_text(run_dir / "config.txt", dump_config(cfg))
    result = simulate(cfg)
    artifacts = [str(run_dir / "config.txt")]
    artifacts += _write_run(storage, run_dir, cfg, result, samples_per_element)
    return {"run_dir": str(run_dir), "report": result.report.to_dict(), "artifacts": artifacts}


def _check_levels(levels: Sequence[int]) -> list[int]:
    levels = [int(n) for n in levels]
    if not levels:
        raise ConfigError("At least one refinement level is required")
    for n in levels:
        if n < 1 or n & (n - 1):
            raise ConfigError(f"Refinement level {n} is not a power of two")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigError(f"Refinement levels must be increasing, got {levels}")
    return levels


def _run_level(cfg: ExperimentConfig, n: int) -> tuple[int, float, ErrorNorms, dict]:
    """Worker entry point; module level so it pickles."""
    level = cfg.at_level(n)
    result = run_simulation(
        build_problem(level),
        level.mesh_config(),
        level.scheme_config(),
        n,
        moving=level.moving,
    )
    return n, level.time_step, result.report.errors, result.report.to_dict()


def convergence_study(
    cfg: ExperimentConfig, levels: Sequence[int], run_name: Optional[str] = None
) -> dict[str, Any]:
    """
    Run the experiment on increasing initial mesh resolutions and tabulate EOCs.

    Returns:
        rows: One entry per level with N, dt, errors and EOCs (none on the coarsest)
        table_csv: Path of the CSV in table column order
    """
    levels = _check_levels(levels)
    cfg = cfg.validate()
    if build_problem(cfg.resolve()).exact is None:
        raise ConfigError(f"Preset '{cfg.preset}' has no exact solution to measure errors against")

    workers = min(cfg.workers, len(levels))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_level, cfg, n) for n in levels]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [_run_level(cfg, n) for n in levels]
    for n, dt, errors, _ in outcomes:
        logger.info("level N=%d dt=%r: %s", n, dt, errors.to_dict())

    rows = build_convergence_table([(n, dt, errors) for n, dt, errors, _ in outcomes])
    resolved = cfg.resolve()
    storage = Storage(Path(resolved.output_dir))
    run_dir = storage.run_dir(
        run_name or f"{resolved.preset}-{_variant(resolved)}-o{resolved.order}-convergence"
    )
    csv_path = storage.save_convergence(run_dir, rows)
    storage.write_text(run_dir / "config.txt", dump_config(resolved))
    storage.write_json(
        run_dir / "convergence.json",
        {"rows": [r.to_dict() for r in rows], "reports": [o[3] for o in outcomes]},
    )
    return {
        "preset": resolved.preset,
        "variant": _variant(resolved),
        "order": resolved.order,
        "rows": [r.to_dict() for r in rows],
        "table_csv": str(csv_path),
    }


def solution_features(fn: PiecewiseLinearFunction) -> dict[str, float]:
    """Minimum nodal value, total variation and max modulus of a discrete solution."""
    values = fn.values
    return {
        "min_value": float(np.min(values)),
        "total_variation": float(np.sum(np.abs(np.diff(values)))),
        "max_abs": float(np.max(np.abs(values))),
    }


def compare_schemes(
    cfg: ExperimentConfig, run_name: Optional[str] = None, samples_per_element: int = 0
) -> dict[str, Any]:
    """
    Run the moving-mesh and static-mesh variants with identical inputs.

    Returns:
        moving / static: Final-time features, errors and mesh statistics of each run
        min_value_gain: Moving minus static minimum nodal value at the final time
    """
    cfg = cfg.resolve()
    storage = Storage(Path(cfg.output_dir))
    run_dir = storage.run_dir(run_name or f"{cfg.preset}-o{cfg.order}-N{cfg.n}-compare")
    storage.write_text(run_dir / "config.txt", dump_config(cfg))

    summary: dict[str, Any] = {"run_dir": str(run_dir)}
    for label, moving in (("moving", True), ("static", False)):
        variant = replace(cfg, moving=moving)
        result = simulate(variant)
        sub = run_dir / label
        sub.mkdir(exist_ok=True)
        _write_run(storage, sub, variant, result, samples_per_element)
        summary[label] = {
            "final_time": result.final.time,
            **solution_features(result.final.current),
            "errors": result.report.errors.to_dict() if result.report.errors else None,
            "mesh": result.report.mesh_stats.to_dict(),
            "relative_ledger_residual": result.report.relative_ledger_residual,
        }
    summary["min_value_gain"] = summary["moving"]["min_value"] - summary["static"]["min_value"]
    if not math.isfinite(summary["min_value_gain"]):
        logger.warning("Comparison produced a non-finite minimum")
    return summary


def print_config(cfg: ExperimentConfig) -> dict[str, Any]:
    """
    Resolve ``cfg`` against its preset.

    Returns:
        config: Every key with its resolved value
        text: The same in the flat ``key = value`` format
    """
    resolved = cfg.resolve()
    return {"config": resolved.to_dict(), "text": dump_config(resolved)}


def selftest(seed: int = 0, suites: Optional[Sequence[str]] = None, quick: bool = False):
    """
    Run the property suites.

    Returns:
        passed: True when every check passed (otherwise AcceptanceError is raised)
        checks: Name, outcome and measured values of every check
    """
    from .selftest import run_suites

    return run_suites(seed=seed, suites=suites, quick=quick)
