"""Moving mesh: nodal point levels and the linearly implicit point dynamics.

A level ``P^n`` is advanced by solving, for the interior points,

    (P_i^n - P_i^{n-1}) / dt = u^{n-1}(P_i^{n-1})
        + nu_M (P_{i+1}^n - 2 P_i^n + P_{i-1}^n) / (h_{i-1}^{n-1} h_i^{n-1})

with either clamped end points (``P_1 = a``, ``P_Np = b``) or end points that
follow the flow by a plain transport step.
"""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from .errors import ConfigError, InvalidInputError, MeshOverlapError, NumericalError
from .linalg import TridiagonalSystem, sor_solve

if TYPE_CHECKING:
    from .transport import VelocityField

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MeshLevel:
    """Ordered nodal points of one time slice of the moving mesh."""

    points: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.ndim != 1 or points.size < 2:
            raise InvalidInputError("degenerate-mesh", "A mesh level needs at least 2 points")
        gaps = np.diff(points)
        if not np.all(gaps > 0.0):
            k = int(np.argmin(gaps))
            raise InvalidInputError(
                "degenerate-mesh",
                f"Mesh points must be strictly increasing (element {k} has size {gaps[k]:.3e})",
            )
        points.flags.writeable = False
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "time", float(self.time))

    @property
    def n_points(self) -> int:
        return self.points.size

    @property
    def n_elements(self) -> int:
        return self.points.size - 1

    @property
    def sizes(self) -> np.ndarray:
        """Element sizes ``h_i = P_{i+1} - P_i``."""
        return np.diff(self.points)

    @property
    def h(self) -> float:
        return float(np.max(self.sizes))

    @property
    def left(self) -> float:
        return float(self.points[0])

    @property
    def right(self) -> float:
        return float(self.points[-1])

    def at_time(self, time: float) -> "MeshLevel":
        return MeshLevel(self.points, time)


@dataclass(frozen=True)
class MeshMotionConfig:
    """Parameters of the point dynamics and of its SOR solve."""

    nu_m: float
    dt: float
    clamp_boundary: bool = True
    sor_omega: Optional[float] = None  # None -> optimal factor per step
    sor_tol: float = 1e-12
    sor_max_iter: Optional[int] = None  # None -> 10 * N_p, more with the optimal factor
    check_mmatrix: bool = False

    def __post_init__(self):
        if self.nu_m < 0.0:
            raise ConfigError(f"nu_m must be >= 0, got {self.nu_m}")
        if self.dt <= 0.0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.sor_omega is not None and not 0.0 < self.sor_omega < 2.0:
            raise ConfigError(f"sor_omega must lie in (0, 2), got {self.sor_omega}")
        if self.sor_tol <= 0.0:
            raise ConfigError(f"sor_tol must be > 0, got {self.sor_tol}")
        if self.sor_max_iter is not None and self.sor_max_iter < 1:
            raise ConfigError(f"sor_max_iter must be >= 1, got {self.sor_max_iter}")


@dataclass(frozen=True)
class NodeVelocities:
    """Discrete point velocities ``w_i^n = (P_i^n - P_i^{n-1}) / dt``."""

    values: np.ndarray
    dt: float

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


def initial_uniform_mesh(a: float, b: float, n_elements: int, time: float = 0.0) -> MeshLevel:
    """Equidistant mesh with ``n_elements`` elements of size ``(b - a) / n_elements``."""
    if not a < b:
        raise InvalidInputError("invalid-interval", f"Need a < b, got a={a}, b={b}")
    if n_elements < 1:
        raise InvalidInputError("invalid-count", f"Need at least one element, got {n_elements}")
    return MeshLevel(np.linspace(a, b, n_elements + 1), time)


def _motion_coefficients(points: np.ndarray, nu_m: float) -> np.ndarray:
    """``nu_M / (h_{i-1} h_i)`` for every interior point."""
    gaps = np.diff(points)
    if np.any(gaps <= 0.0):
        raise InvalidInputError("degenerate-mesh", "Previous mesh level has non-positive gaps")
    return nu_m / (gaps[:-1] * gaps[1:])


def assemble_motion_system(prev: MeshLevel, u_prev, cfg: MeshMotionConfig) -> TridiagonalSystem:
    """Assemble the linear system for ``P^n`` over all ``N_p`` points.

    Interior rows carry the regularized point dynamics. End rows are Dirichlet rows
    (scaled by ``1/dt`` like the others) when clamping, otherwise a plain transport
    step ``P^n = P^{n-1} + dt u^{n-1}(P^{n-1})``.
    """
    points = prev.points
    u_prev = np.asarray(u_prev, dtype=float)
    if u_prev.shape != points.shape:
        raise InvalidInputError(
            "mismatched-levels", f"Need {points.size} velocity samples, got {u_prev.size}"
        )
    inv_dt = 1.0 / cfg.dt
    n = points.size
    coeff = _motion_coefficients(points, cfg.nu_m)

    diag = np.full(n, inv_dt)
    diag[1:-1] += 2.0 * coeff
    lower = np.zeros(n - 1)
    upper = np.zeros(n - 1)
    upper[1:] = -coeff
    lower[:-1] = -coeff
    rhs = points * inv_dt + u_prev
    if cfg.clamp_boundary:
        rhs[0] = points[0] * inv_dt
        rhs[-1] = points[-1] * inv_dt
    return TridiagonalSystem(lower, diag, upper, rhs)


def gap_system(prev: MeshLevel, u_prev, cfg: MeshMotionConfig) -> TridiagonalSystem:
    """Equivalent system for the new element sizes ``h_i^n``.

    Obtained by differencing neighbouring rows of the motion system. Its right side
    ``u(P_{i+1}) - u(P_i) + h_i/dt`` is positive whenever
    ``dt |u|_{W^{1,inf}} < 1``, and its matrix is an M-matrix, which is why the
    motion cannot overlap.
    """
    points = prev.points
    u_prev = np.array(u_prev, dtype=float)
    gaps = np.diff(points)
    if np.any(gaps <= 0.0):
        raise InvalidInputError("degenerate-mesh", "Previous mesh level has non-positive gaps")
    if cfg.clamp_boundary:
        u_prev[0] = 0.0
        u_prev[-1] = 0.0
    inv_dt = 1.0 / cfg.dt
    m = gaps.size
    # coefficient of interior node j (j = 1..N_p-2) couples gaps j-1 and j
    coeff = cfg.nu_m / (gaps[:-1] * gaps[1:])
    diag = np.full(m, inv_dt)
    diag[:-1] += coeff  # right neighbour node of gap i is node i+1
    diag[1:] += coeff  # left node of gap i is node i
    upper = -coeff
    lower = -coeff
    rhs = np.diff(u_prev) + gaps * inv_dt
    return TridiagonalSystem(lower, diag, upper, rhs)


def gap_rhs_positive(prev: MeshLevel, u_prev, cfg: MeshMotionConfig) -> bool:
    return bool(np.all(gap_system(prev, u_prev, cfg).rhs > 0.0))


def advance_mesh(prev: MeshLevel, u: "VelocityField", cfg: MeshMotionConfig) -> MeshLevel:
    """One step of the point dynamics; raises MeshOverlapError on a non-positive gap."""
    u_prev = u.sample(prev.points, prev.time)
    system = assemble_motion_system(prev, u_prev, cfg)
    if cfg.check_mmatrix:
        _check_gap_system(prev, u_prev, cfg)
    points = sor_solve(
        system,
        omega=cfg.sor_omega,
        tol=cfg.sor_tol,
        max_iter=cfg.sor_max_iter,
        x0=prev.points,
    )
    if cfg.clamp_boundary:
        points[0] = prev.points[0]
        points[-1] = prev.points[-1]
    time = prev.time + cfg.dt
    gaps = np.diff(points)
    if not np.all(gaps > 0.0):
        k = int(np.argmin(gaps))
        raise MeshOverlapError(float(gaps[k]), k, time)
    return MeshLevel(points, time)


def _check_gap_system(prev: MeshLevel, u_prev, cfg: MeshMotionConfig) -> None:
    gaps = gap_system(prev, u_prev, cfg)
    if cfg.nu_m > 0.0 and not gaps.is_m_matrix_pattern():
        raise NumericalError(
            f"Gap system at t={prev.time:.6g} is not a diagonally dominant M-matrix"
        )
    if not np.all(gaps.rhs > 0.0):
        logger.warning(
            "Gap right side not positive at t=%.6g (min %.3e); overlap is possible",
            prev.time,
            float(np.min(gaps.rhs)),
        )


def cfl_margin(u: "VelocityField", dt: float) -> float:
    """``dt * |u|_{W^{1,inf}}``; overlap needs it below 1, the error estimate below 1/8."""
    return dt * u.w1inf_bound


def node_velocities(prev: MeshLevel, next_level: MeshLevel) -> NodeVelocities:
    if prev.n_points != next_level.n_points:
        raise InvalidInputError(
            "mismatched-levels",
            f"Levels have {prev.n_points} and {next_level.n_points} points",
        )
    dt = next_level.time - prev.time
    if dt <= 0.0:
        raise InvalidInputError(
            "mismatched-levels", f"Next level time {next_level.time} not after {prev.time}"
        )
    return NodeVelocities((next_level.points - prev.points) / dt, dt)


def trajectory_level(prev: MeshLevel, velocities: NodeVelocities, time: float) -> MeshLevel:
    """Positions ``P_i(t) = P_i^{n-1} + w_i^n (t - t^{n-1})`` on the straight trajectories."""
    return MeshLevel(prev.points + velocities.values * (time - prev.time), time)


def velocity_extension(velocities: NodeVelocities, level_at_t: MeshLevel, x):
    """Piecewise linear extension ``w(x, t)`` of the point velocities.

    Outside the hull of ``level_at_t`` the end element's affine piece is continued.
    """
    from .fem import ExtensionPolicy, PiecewiseLinearFunction, evaluate

    fn = PiecewiseLinearFunction(level_at_t, velocities.values)
    return evaluate(fn, x, ExtensionPolicy.LINEAR)
