"""Tridiagonal systems and the iterative solvers used by the mesh motion and the schemes.

The mesh-motion matrix is nonsymmetric and strictly diagonally dominant, so it is
solved with SOR. The scheme matrix ``c*M + nu*K`` is symmetric positive definite and
is solved with unpreconditioned CG. A banded direct solve serves as the oracle.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal, solve_banded

from .errors import AsymmetryError, InvalidInputError, SolverConvergenceError

logger = logging.getLogger(__name__)

ROUNDOFF_FACTOR = 16.0
EPS = float(np.finfo(float).eps)


def _frozen(values, size: int | None = None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if size is not None and arr.shape != (size,):
        raise InvalidInputError("shape-mismatch", f"Expected {size} entries, got {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TridiagonalSystem:
    """Three-band matrix with an optional right-hand side.

    Row ``i`` reads ``lower[i-1]*x[i-1] + diag[i]*x[i] + upper[i]*x[i+1]``.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    rhs: Optional[np.ndarray] = None

    def __post_init__(self):
        diag = _frozen(self.diag)
        if diag.ndim != 1 or diag.size < 1:
            raise InvalidInputError("shape-mismatch", "Diagonal must be a non-empty vector")
        n = diag.size
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "lower", _frozen(self.lower, n - 1))
        object.__setattr__(self, "upper", _frozen(self.upper, n - 1))
        if self.rhs is not None:
            object.__setattr__(self, "rhs", _frozen(self.rhs, n))

    @property
    def size(self) -> int:
        return self.diag.size

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = self.diag * x
        y[:-1] += self.upper * x[1:]
        y[1:] += self.lower * x[:-1]
        return y

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.upper, 1) + np.diag(self.lower, -1)

    def to_banded(self) -> np.ndarray:
        """Return the (3, n) banded layout expected by ``scipy.linalg.solve_banded``."""
        ab = np.zeros((3, self.size))
        ab[0, 1:] = self.upper
        ab[1, :] = self.diag
        ab[2, :-1] = self.lower
        return ab

    def scale(self, factor: float) -> "TridiagonalSystem":
        rhs = None if self.rhs is None else self.rhs * factor
        return TridiagonalSystem(self.lower * factor, self.diag * factor, self.upper * factor, rhs)

    def plus(self, other: "TridiagonalSystem") -> "TridiagonalSystem":
        """Sum of the two matrices; the right-hand side is dropped."""
        if other.size != self.size:
            raise InvalidInputError("shape-mismatch", "Cannot add systems of different size")
        return TridiagonalSystem(
            self.lower + other.lower, self.diag + other.diag, self.upper + other.upper
        )

    def with_rhs(self, rhs) -> "TridiagonalSystem":
        return TridiagonalSystem(self.lower, self.diag, self.upper, rhs)

    def is_symmetric(self, rtol: float = 1e-12) -> bool:
        if self.size == 1:
            return True
        scale = max(np.max(np.abs(self.diag)), 1e-300)
        return bool(np.max(np.abs(self.lower - self.upper)) <= rtol * scale)

    def row_dominance_margins(self) -> np.ndarray:
        """``|diag_i| - sum_j |offdiag_ij|`` per row; all positive means strict dominance."""
        off = np.zeros(self.size)
        off[:-1] += np.abs(self.upper)
        off[1:] += np.abs(self.lower)
        return np.abs(self.diag) - off

    def is_strictly_diagonally_dominant(self) -> bool:
        return bool(np.all(self.row_dominance_margins() > 0.0))

    def is_m_matrix_pattern(self) -> bool:
        """Positive diagonal, nonpositive off-diagonals and strict row dominance."""
        return bool(
            np.all(self.diag > 0.0)
            and np.all(self.lower <= 0.0)
            and np.all(self.upper <= 0.0)
            and self.is_strictly_diagonally_dominant()
        )


def _resolve_rhs(system: TridiagonalSystem, rhs) -> np.ndarray:
    if rhs is None:
        if system.rhs is None:
            raise InvalidInputError("missing-rhs", "System carries no right-hand side")
        return np.array(system.rhs)
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (system.size,):
        raise InvalidInputError(
            "shape-mismatch", f"Right side has shape {rhs.shape}, expected ({system.size},)"
        )
    return rhs


def direct_solve(system: TridiagonalSystem, rhs=None) -> np.ndarray:
    """Banded LU (Thomas elimination) solve."""
    rhs = _resolve_rhs(system, rhs)
    if system.size == 1:
        return rhs / system.diag
    return solve_banded((1, 1), system.to_banded(), rhs)


def jacobi_spectral_radius(system: TridiagonalSystem) -> float:
    """Spectral radius of ``D^{-1}(L + U)``.

    The Jacobi matrix of a tridiagonal system whose off-diagonal products are
    non-negative is similar to the symmetric tridiagonal matrix with entries
    ``sqrt(l_i u_i / (d_i d_{i+1}))``, so its largest eigenvalue is computed directly.
    Otherwise the row bound ``max (|l| + |u|) / |d|`` is returned.
    """
    n = system.size
    if n == 1:
        return 0.0
    products = (system.upper / system.diag[:-1]) * (system.lower / system.diag[1:])
    if np.any(products < 0.0):
        off = np.zeros(n)
        off[:-1] += np.abs(system.upper)
        off[1:] += np.abs(system.lower)
        return float(np.max(off / np.abs(system.diag)))
    e = np.sqrt(products)
    if not np.any(e):
        return 0.0
    top = eigvalsh_tridiagonal(np.zeros(n), e, select="i", select_range=(n - 1, n - 1))
    return float(abs(top[0]))


def optimal_sor_omega(system: TridiagonalSystem) -> float:
    """Relaxation factor ``2 / (1 + sqrt(1 - rho_J^2))`` for a consistently ordered matrix."""
    rho = jacobi_spectral_radius(system)
    if rho >= 1.0:
        raise InvalidInputError(
            "not-convergent", f"Jacobi spectral radius {rho:.6g} >= 1; SOR would diverge"
        )
    return 2.0 / (1.0 + np.sqrt(1.0 - rho * rho))


def _row_norm(system: TridiagonalSystem) -> float:
    rows = np.abs(system.diag)
    rows[:-1] += np.abs(system.upper)
    rows[1:] += np.abs(system.lower)
    return float(np.max(rows))


def sor_solve(
    system: TridiagonalSystem,
    omega: Optional[float] = 1.2,
    tol: float = 1e-12,
    max_iter: Optional[int] = None,
    x0=None,
    rhs=None,
) -> np.ndarray:
    """Successive over-relaxation in red–black ordering.

    Even rows are relaxed first using the current odd values, then odd rows using
    the fresh even values; for a tridiagonal matrix this is a consistent SOR
    ordering and each half-sweep is a vector operation.

    ``omega=None`` picks the optimal factor from the Jacobi spectral radius, which
    keeps the sweep count bounded when ``nu_M dt / h^2`` is large. The default
    sweep limit then also grows with the expected rate ``omega - 1``.

    Stops when ``max|r - A x| <= tol * (1 + max|r|)``, or once the residual is down
    to the rounding level ``16 eps ||A||_inf max|x|`` when that is larger.
    """
    auto = omega is None
    if auto:
        omega = optimal_sor_omega(system)
        logger.debug("SOR relaxation factor %.6f", omega)
    if not 0.0 < omega < 2.0:
        raise InvalidInputError("invalid-omega", f"SOR relaxation {omega} outside (0, 2)")
    if tol <= 0.0:
        raise InvalidInputError("invalid-tolerance", f"SOR tolerance must be positive, got {tol}")
    rhs = _resolve_rhs(system, rhs)
    n = system.size
    if max_iter is None:
        max_iter = 10 * n
        if auto and omega > 1.0:
            # asymptotic rate is omega - 1; doubled for the defective eigenvalue
            max_iter = max(max_iter, math.ceil(2.0 * math.log(EPS) / math.log(omega - 1.0)))
    threshold = tol * (1.0 + np.max(np.abs(rhs)))
    noise = ROUNDOFF_FACTOR * EPS * _row_norm(system)

    # Pure diagonal systems (nu_M = 0) need no iteration.
    if not np.any(system.lower) and not np.any(system.upper):
        return rhs / system.diag

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    diag = system.diag
    residual = np.max(np.abs(rhs - system.matvec(x)))
    if residual <= max(threshold, noise * np.max(np.abs(x))):
        return x
    for iteration in range(1, max_iter + 1):
        for start in (0, 1):
            neighbours = np.zeros(n)
            neighbours[:-1] += system.upper * x[1:]
            neighbours[1:] += system.lower * x[:-1]
            sl = slice(start, None, 2)
            x[sl] = (1.0 - omega) * x[sl] + omega * (rhs[sl] - neighbours[sl]) / diag[sl]
        residual = np.max(np.abs(rhs - system.matvec(x)))
        if residual <= max(threshold, noise * np.max(np.abs(x))):
            logger.debug("SOR converged in %d sweeps (residual %.3e)", iteration, residual)
            return x
    raise SolverConvergenceError("SOR", max_iter, float(residual))


def cg_solve(
    system: TridiagonalSystem,
    rhs=None,
    tol: float = 1e-12,
    max_iter: Optional[int] = None,
    x0=None,
) -> np.ndarray:
    """Unpreconditioned conjugate gradients for a symmetric positive definite system.

    Stops when ``||b - A x|| <= tol * ||b||``.
    """
    if not system.is_symmetric():
        raise AsymmetryError("CG requires a symmetric matrix; the assembly is broken")
    b = _resolve_rhs(system, rhs)
    n = system.size
    if max_iter is None:
        max_iter = 10 * n
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return np.zeros(n)

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - system.matvec(x)
    rho = r @ r
    threshold = (tol * b_norm) ** 2
    if rho <= threshold:
        return x
    p = r.copy()
    for iteration in range(1, max_iter + 1):
        w = system.matvec(p)
        curvature = p @ w
        if curvature <= 0.0:
            logger.warning("CG breakdown: search direction in the matrix nullspace")
            raise SolverConvergenceError(
                "CG", iteration, float(np.sqrt(rho) / b_norm), "matrix is singular or indefinite"
            )
        alpha = rho / curvature
        x += alpha * p
        r -= alpha * w
        rho_next = r @ r
        if rho_next <= threshold:
            logger.debug(
                "CG converged in %d iterations (relative residual %.3e)",
                iteration,
                np.sqrt(rho_next) / b_norm,
            )
            return x
        p = r + (rho_next / rho) * p
        rho = rho_next
    raise SolverConvergenceError("CG", max_iter, float(np.sqrt(rho) / b_norm))
