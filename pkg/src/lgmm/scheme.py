"""First- and second-order Lagrange–Galerkin time stepping on a moving mesh."""

import logging
import math
import time as _time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, InvalidInputError
from .fem import (
    ExtensionPolicy,
    PiecewiseLinearFunction,
    QuadratureRule,
    assemble_mass,
    assemble_stiffness,
    gauss_rule,
    interpolate,
)
from .linalg import cg_solve
from .mesh import MeshLevel, MeshMotionConfig, advance_mesh, initial_uniform_mesh
from .transport import UpwindMap, VelocityField, composed_load, hypothesis_check

logger = logging.getLogger(__name__)

# Relative mass-ledger residual above which a run is reported as not conserving mass.
LEDGER_WARN_THRESHOLD = 1e-9


@dataclass(frozen=True)
class SchemeConfig:
    nu: float
    dt: float
    order: int = 2
    cg_tol: float = 1e-12
    cg_max_iter: Optional[int] = None  # None -> 10 * N_p
    extension: ExtensionPolicy = ExtensionPolicy.LINEAR
    quadrature_points: int = 9
    split_kinks: bool = False

    def __post_init__(self):
        if not self.nu > 0.0:
            raise ConfigError(f"nu must be > 0, got {self.nu}")
        if not self.dt > 0.0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.order not in (1, 2):
            raise ConfigError(f"order must be 1 or 2, got {self.order}")
        if not self.cg_tol > 0.0:
            raise ConfigError(f"cg_tol must be > 0, got {self.cg_tol}")
        if self.cg_max_iter is not None and self.cg_max_iter < 1:
            raise ConfigError(f"cg_max_iter must be >= 1, got {self.cg_max_iter}")
        object.__setattr__(self, "extension", ExtensionPolicy(self.extension))

    @property
    def rule(self) -> QuadratureRule:
        return gauss_rule(self.quadrature_points)


def _zero_source(x, t):
    return np.zeros_like(np.asarray(x, dtype=float))


def _zero_flux(t):
    return 0.0


@dataclass(frozen=True)
class SourceData:
    """Volume source ``f(x, t)`` and boundary fluxes ``g`` at the two ends."""

    f: Callable = _zero_source
    g_left: Callable = _zero_flux
    g_right: Callable = _zero_flux

    @classmethod
    def zero(cls) -> "SourceData":
        return cls()


@dataclass(frozen=True)
class StepState:
    """Two-step window: ``current`` is phi^n, ``previous`` is phi^{n-1}."""

    current: PiecewiseLinearFunction
    previous: Optional[PiecewiseLinearFunction]
    step_index: int
    time: float

    def advance(self, new: PiecewiseLinearFunction) -> "StepState":
        return StepState(new, self.current, self.step_index + 1, new.time)


@dataclass(frozen=True)
class Problem:
    """Convection–diffusion problem on ``(a, b)`` up to ``t_end``."""

    name: str
    a: float
    b: float
    t_end: float
    velocity: VelocityField
    initial: Callable
    source: SourceData = field(default_factory=SourceData)
    exact: Optional[Callable] = None
    exact_dx: Optional[Callable] = None


def load_functional(
    src: SourceData, mesh: MeshLevel, t: float, rule: Optional[QuadratureRule] = None
) -> np.ndarray:
    """``(f(t), psi_j) + g_left(t) psi_j(a) + g_right(t) psi_j(b)`` per basis."""
    rule = rule or gauss_rule(9)
    p = mesh.points
    xq, wq = rule.on_intervals(p[:-1], p[1:])
    fq = wq * np.broadcast_to(np.asarray(src.f(xq, t), dtype=float), xq.shape)
    psi_right = (xq - p[:-1, None]) / mesh.sizes[:, None]
    out = np.zeros(mesh.n_points)
    out[:-1] += np.sum(fq * (1.0 - psi_right), axis=1)
    out[1:] += np.sum(fq * psi_right, axis=1)
    out[0] += float(src.g_left(t))
    out[-1] += float(src.g_right(t))
    return out


def _check_mesh_time(state: StepState, new_mesh: MeshLevel, dt: float) -> None:
    if not math.isclose(new_mesh.time, state.time + dt, rel_tol=1e-12, abs_tol=1e-12):
        raise InvalidInputError(
            "mismatched-levels",
            f"New mesh at t={new_mesh.time} does not follow state at t={state.time} by dt={dt}",
        )


def _solve(
    mass_coeff: float,
    new_mesh: MeshLevel,
    rhs: np.ndarray,
    cfg: SchemeConfig,
    guess: Optional[np.ndarray],
) -> np.ndarray:
    stiffness = assemble_stiffness(new_mesh).scale(cfg.nu)
    system = assemble_mass(new_mesh).scale(mass_coeff).plus(stiffness)
    if guess is not None and guess.shape != rhs.shape:
        guess = None
    return cg_solve(system, rhs, tol=cfg.cg_tol, max_iter=cfg.cg_max_iter, x0=guess)


def step_first_order(
    state: StepState,
    new_mesh: MeshLevel,
    u: VelocityField,
    src: SourceData,
    cfg: SchemeConfig,
) -> PiecewiseLinearFunction:
    """Solve ``(M/dt + nu K) phi^n = L(phi^{n-1} o X)/dt + F^n`` on ``new_mesh``."""
    _check_mesh_time(state, new_mesh, cfg.dt)
    rule = cfg.rule
    t = new_mesh.time
    umap = UpwindMap(u, t, cfg.dt)
    load = composed_load(state.current, umap, new_mesh, rule, cfg.extension, cfg.split_kinks)
    rhs = load / cfg.dt + load_functional(src, new_mesh, t, rule)
    values = _solve(1.0 / cfg.dt, new_mesh, rhs, cfg, state.current.values)
    return PiecewiseLinearFunction(new_mesh, values)


def step_second_order(
    state: StepState,
    new_mesh: MeshLevel,
    u: VelocityField,
    src: SourceData,
    cfg: SchemeConfig,
) -> PiecewiseLinearFunction:
    """Two-step backward-difference variant; the first step is the first-order scheme.

    For ``n >= 2`` solves
    ``(3M/(2dt) + nu K) phi^n = (4 L(phi^{n-1} o X) - L(phi^{n-2} o X2)) / (2dt) + F^n``
    where ``X2`` is the double-step map.
    """
    if state.step_index == 0:
        return step_first_order(state, new_mesh, u, src, cfg)
    if state.previous is None:
        raise InvalidInputError(
            "missing-history", f"Step {state.step_index + 1} needs two stored levels"
        )
    _check_mesh_time(state, new_mesh, cfg.dt)
    rule = cfg.rule
    t = new_mesh.time
    one = composed_load(
        state.current, UpwindMap(u, t, cfg.dt), new_mesh, rule, cfg.extension, cfg.split_kinks
    )
    two = composed_load(
        state.previous,
        UpwindMap(u, t, 2.0 * cfg.dt),
        new_mesh,
        rule,
        cfg.extension,
        cfg.split_kinks,
    )
    rhs = (4.0 * one - two) / (2.0 * cfg.dt) + load_functional(src, new_mesh, t, rule)
    values = _solve(1.5 / cfg.dt, new_mesh, rhs, cfg, state.current.values)
    return PiecewiseLinearFunction(new_mesh, values)


def step_count(t_end: float, dt: float) -> int:
    """``N_T = floor(T / dt)``, tolerant to round-off in ``T / dt``."""
    if t_end < 0.0:
        raise InvalidInputError("invalid-interval", f"Final time must be >= 0, got {t_end}")
    return int(math.floor(t_end / dt + 1e-9))


@dataclass
class SimulationResult:
    """Outcome of ``run_simulation``.

    ``trajectory`` holds every phi^n only when requested; ``snapshots`` maps the
    requested times to the nearest computed level.
    """

    report: "RunReport"
    final: StepState
    trajectory: list[PiecewiseLinearFunction]
    snapshots: dict[float, PiecewiseLinearFunction]
    mesh_levels: list[MeshLevel]


def _snapshot_steps(snapshot_times: Sequence[float], dt: float, n_steps: int) -> dict[int, float]:
    steps: dict[int, float] = {}
    for t in snapshot_times:
        n = int(round(t / dt))
        if 0 <= n <= n_steps:
            steps.setdefault(n, float(t))
        else:
            logger.warning("Snapshot time %g lies outside [0, %g]; skipped", t, n_steps * dt)
    return steps


def run_simulation(
    problem: Problem,
    mesh_cfg: MeshMotionConfig,
    scheme_cfg: SchemeConfig,
    n_elements: int,
    moving: bool = True,
    keep_trajectory: bool = False,
    snapshot_times: Sequence[float] = (),
    mesh_every: int = 0,
    true_errors: bool = False,
) -> SimulationResult:
    """Advance the mesh and the scheme for ``N_T`` steps and collect diagnostics.

    ``mesh_every`` > 0 keeps every ``mesh_every``-th mesh level (plus the last) for
    trajectory export. With ``moving=False`` the initial mesh is reused at every step.
    """
    from .diagnostics import ErrorAccumulator, MassLedger, MeshStatsRecorder, RunReport

    if not math.isclose(mesh_cfg.dt, scheme_cfg.dt, rel_tol=1e-12):
        raise ConfigError(f"Mesh dt {mesh_cfg.dt} differs from scheme dt {scheme_cfg.dt}")
    started = _time.perf_counter()
    dt = scheme_cfg.dt
    rule = scheme_cfg.rule
    n_steps = step_count(problem.t_end, dt)
    hypotheses = hypothesis_check(problem.velocity, dt)

    mesh = initial_uniform_mesh(problem.a, problem.b, n_elements)
    phi0 = interpolate(lambda x: problem.initial(x), mesh)
    state = StepState(phi0, None, 0, 0.0)

    ledger = MassLedger(scheme_cfg.order, dt)
    ledger.record(phi0, 0.0)
    errors = ErrorAccumulator(dt, problem.exact, problem.exact_dx if true_errors else None, rule)
    errors.record(phi0, 0)
    stats = MeshStatsRecorder(mesh.h)
    stats.record(mesh, 0)

    stepper = step_first_order if scheme_cfg.order == 1 else step_second_order
    snapshot_steps = _snapshot_steps(snapshot_times, dt, n_steps)
    snapshots = {snapshot_steps[0]: phi0} if 0 in snapshot_steps else {}
    trajectory = [phi0] if keep_trajectory else []
    mesh_levels = [mesh] if mesh_every > 0 else []

    for n in range(1, n_steps + 1):
        prev_mesh = state.current.mesh
        if moving:
            new_mesh = advance_mesh(prev_mesh, problem.velocity, mesh_cfg)
        else:
            new_mesh = prev_mesh.at_time(n * dt)
        # keep the nominal time grid so snapshots and exact solutions line up
        new_mesh = new_mesh.at_time(n * dt)
        phi = stepper(state, new_mesh, problem.velocity, problem.source, scheme_cfg)
        state = state.advance(phi)

        ledger.record(phi, float(np.sum(load_functional(problem.source, new_mesh, phi.time, rule))))
        errors.record(phi, n)
        stats.record(new_mesh, n)
        if keep_trajectory:
            trajectory.append(phi)
        if n in snapshot_steps:
            snapshots[snapshot_steps[n]] = phi
        if mesh_every > 0 and (n % mesh_every == 0 or n == n_steps):
            mesh_levels.append(new_mesh)
        logger.debug("step %d/%d t=%.6g mass=%.12e", n, n_steps, phi.time, ledger.masses[-1])

    wall = _time.perf_counter() - started
    report = RunReport(
        problem=problem.name,
        n_elements=n_elements,
        dt=dt,
        order=scheme_cfg.order,
        moving=moving,
        n_steps=n_steps,
        errors=errors.result(),
        true_errors=errors.true_result() if true_errors else None,
        ledger=ledger.entries(),
        mesh_stats=stats.result(),
        stability=errors.stability(scheme_cfg.nu),
        hypotheses=hypotheses,
        wall_time=wall,
    )
    _warn_ledger(report, scheme_cfg)
    logger.info(
        "%s N=%d order=%d moving=%s: %d steps in %.2fs, final mass %.12e",
        problem.name,
        n_elements,
        scheme_cfg.order,
        moving,
        n_steps,
        wall,
        ledger.masses[-1],
    )
    return SimulationResult(report, state, trajectory, snapshots, mesh_levels)


def _warn_ledger(report, cfg: SchemeConfig) -> None:
    residual = report.relative_ledger_residual
    if residual <= LEDGER_WARN_THRESHOLD:
        return
    if cfg.split_kinks:
        logger.warning(
            "%s N=%d: relative mass-ledger residual %.3e exceeds %.1e",
            report.problem,
            report.n_elements,
            residual,
            LEDGER_WARN_THRESHOLD,
        )
    else:
        logger.warning(
            "%s N=%d: relative mass-ledger residual %.3e exceeds %.1e; the composed load "
            "is integrated across kinks, set split_kinks = true for an exact ledger",
            report.problem,
            report.n_elements,
            residual,
            LEDGER_WARN_THRESHOLD,
        )
