"""P1 finite elements on nonuniform, time-varying interval partitions."""

import logging
from dataclasses import dataclass
from enum import StrEnum
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import InvalidInputError
from .linalg import TridiagonalSystem
from .mesh import MeshLevel, NodeVelocities

logger = logging.getLogger(__name__)

# Walk at most this many elements from the hint before falling back to bisection.
MAX_WALK_STEPS = 8
MAX_GAUSS_POINTS = 16


class ExtensionPolicy(StrEnum):
    """How a P1 function is evaluated outside the hull of its mesh."""

    LINEAR = "linear-extension"
    CLAMP = "clamp-end-value"
    ERROR = "error"


@dataclass(frozen=True)
class PiecewiseLinearFunction:
    """Continuous P1 function: a mesh level plus one value per node."""

    mesh: MeshLevel
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.mesh.n_points,):
            raise InvalidInputError(
                "mismatched-levels",
                f"Need {self.mesh.n_points} nodal values, got shape {values.shape}",
            )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def time(self) -> float:
        return self.mesh.time

    def minus(self, other: "PiecewiseLinearFunction") -> "PiecewiseLinearFunction":
        """Nodal difference of two functions living on the same nodes."""
        if other.mesh.n_points != self.mesh.n_points:
            raise InvalidInputError("mismatched-levels", "Functions live on different meshes")
        return PiecewiseLinearFunction(self.mesh, self.values - other.values)


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on the reference element [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if nodes.shape != weights.shape or nodes.ndim != 1 or nodes.size == 0:
            raise InvalidInputError("invalid-quadrature", "Nodes and weights must match")
        if np.any(weights <= 0.0) or abs(weights.sum() - 2.0) > 1e-12:
            raise InvalidInputError("invalid-quadrature", "Weights must be positive and sum to 2")
        nodes.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def n_points(self) -> int:
        return self.nodes.size

    @property
    def degree(self) -> int:
        """Polynomial exactness degree of a Gauss–Legendre rule."""
        return 2 * self.nodes.size - 1

    def integrate(self, f: Callable) -> float:
        """Integrate ``f`` over [-1, 1]."""
        return float(np.sum(self.weights * np.asarray(f(self.nodes), dtype=float)))

    def on_intervals(self, left, right) -> tuple[np.ndarray, np.ndarray]:
        """Physical points and weights, shape ``(n_intervals, n_points)``."""
        left = np.asarray(left, dtype=float)[:, None]
        right = np.asarray(right, dtype=float)[:, None]
        half = 0.5 * (right - left)
        return 0.5 * (left + right) + half * self.nodes, half * self.weights


@lru_cache(maxsize=None)
def gauss_rule(points: int = 9) -> QuadratureRule:
    """Gauss–Legendre rule, exact for polynomials of degree ``2*points - 1``."""
    if not 1 <= points <= MAX_GAUSS_POINTS:
        raise InvalidInputError(
            "unsupported-order", f"Gauss rule with {points} points not in 1..{MAX_GAUSS_POINTS}"
        )
    nodes, weights = leggauss(points)
    return QuadratureRule(nodes, weights)


def hat_basis_eval(mesh: MeshLevel, i: int, x: float) -> float:
    """Value of the ``i``-th hat function; zero outside its support."""
    if not 0 <= i < mesh.n_points:
        raise InvalidInputError(
            "index-out-of-range", f"Basis index {i} outside 0..{mesh.n_points - 1}"
        )
    p = mesh.points
    if i > 0 and p[i - 1] <= x <= p[i]:
        return float((x - p[i - 1]) / (p[i] - p[i - 1]))
    if i < mesh.n_points - 1 and p[i] <= x <= p[i + 1]:
        return float((p[i + 1] - x) / (p[i + 1] - p[i]))
    return 0.0


def interpolate(f: Callable, mesh: MeshLevel) -> PiecewiseLinearFunction:
    """Lagrange interpolant ``sum_i f(P_i) psi_i``; ``f`` is called on the node array."""
    values = np.asarray(f(mesh.points), dtype=float)
    if values.shape != mesh.points.shape:
        values = np.broadcast_to(values, mesh.points.shape)
    return PiecewiseLinearFunction(mesh, values)


def locate_element(mesh: MeshLevel, x: float, hint: int = 0) -> int:
    """Index ``k`` with ``P_k <= x <= P_{k+1}``.

    A node shared by two elements belongs to the left one. Exterior points map to
    the first or last element. The search walks from ``hint`` and falls back to
    bisection.
    """
    p = mesh.points
    last = mesh.n_elements - 1
    k = min(max(int(hint), 0), last)
    for _ in range(MAX_WALK_STEPS):
        if k > 0 and x <= p[k]:
            k -= 1
        elif k < last and x > p[k + 1]:
            k += 1
        else:
            return k
    return int(min(max(np.searchsorted(p, x, side="left") - 1, 0), last))


def locate_elements(mesh: MeshLevel, xs, hints=None) -> np.ndarray:
    """Vectorized ``locate_element``: same result for every entry of ``xs``."""
    p = mesh.points
    xs = np.asarray(xs, dtype=float)
    last = mesh.n_elements - 1
    if hints is None:
        return np.clip(np.searchsorted(p, xs, side="left") - 1, 0, last)
    k = np.clip(np.broadcast_to(np.asarray(hints, dtype=np.intp), xs.shape), 0, last)
    for _ in range(MAX_WALK_STEPS):
        step_left = (k > 0) & (xs <= p[k])
        step_right = (k < last) & (xs > p[np.minimum(k + 1, last + 1)])
        if not (step_left.any() or step_right.any()):
            return k
        k = k - step_left + step_right
    step_left = (k > 0) & (xs <= p[k])
    step_right = (k < last) & (xs > p[np.minimum(k + 1, last + 1)])
    lost = step_left | step_right
    if lost.any():
        k = k.copy()
        k[lost] = np.clip(np.searchsorted(p, xs[lost], side="left") - 1, 0, last)
    return k


def evaluate(
    fn: PiecewiseLinearFunction,
    x,
    policy: ExtensionPolicy = ExtensionPolicy.LINEAR,
    hints=None,
):
    """Evaluate ``fn`` at ``x`` (scalar or array); exterior points follow ``policy``."""
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    p = fn.mesh.points
    v = fn.values
    k = locate_elements(fn.mesh, xs, hints)
    slope = (v[k + 1] - v[k]) / (p[k + 1] - p[k])
    out = v[k] + slope * (xs - p[k])

    below = xs < p[0]
    above = xs > p[-1]
    if below.any() or above.any():
        if policy == ExtensionPolicy.CLAMP:
            out[below] = v[0]
            out[above] = v[-1]
        elif policy == ExtensionPolicy.ERROR:
            bad = xs[below | above][0]
            raise InvalidInputError(
                "out-of-domain", f"x={bad} outside the mesh hull [{p[0]}, {p[-1]}]"
            )
    return float(out[0]) if scalar else out


def sample(fn: PiecewiseLinearFunction, per_element: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes plus ``per_element`` uniformly spaced interior samples per element."""
    p = fn.mesh.points
    if per_element <= 0:
        return np.array(p), np.array(fn.values)
    frac = np.arange(per_element + 1) / (per_element + 1)
    xs = (p[:-1, None] + np.diff(p)[:, None] * frac).ravel()
    xs = np.append(xs, p[-1])
    return xs, evaluate(fn, xs)


def assemble_mass(mesh: MeshLevel) -> TridiagonalSystem:
    """Consistent P1 mass matrix."""
    h = mesh.sizes
    diag = np.zeros(mesh.n_points)
    diag[:-1] += h / 3.0
    diag[1:] += h / 3.0
    off = h / 6.0
    return TridiagonalSystem(off, diag, off)


def assemble_stiffness(mesh: MeshLevel) -> TridiagonalSystem:
    """P1 stiffness matrix of ``(u', v')`` without the diffusion coefficient."""
    inv_h = 1.0 / mesh.sizes
    diag = np.zeros(mesh.n_points)
    diag[:-1] += inv_h
    diag[1:] += inv_h
    return TridiagonalSystem(-inv_h, diag, -inv_h)


def lumped_masses(mesh: MeshLevel) -> np.ndarray:
    """Integrals of the hat functions, ``(h_{i-1} + h_i) / 2``."""
    h = mesh.sizes
    out = np.zeros(mesh.n_points)
    out[:-1] += 0.5 * h
    out[1:] += 0.5 * h
    return out


def l2_norm(fn: PiecewiseLinearFunction) -> float:
    h = fn.mesh.sizes
    a, b = fn.values[:-1], fn.values[1:]
    return float(np.sqrt(np.sum(h * (a * a + a * b + b * b) / 3.0)))


def h1_seminorm(fn: PiecewiseLinearFunction) -> float:
    h = fn.mesh.sizes
    return float(np.sqrt(np.sum(np.diff(fn.values) ** 2 / h)))


def total_integral(fn: PiecewiseLinearFunction) -> float:
    return float(np.sum(0.5 * fn.mesh.sizes * (fn.values[:-1] + fn.values[1:])))


def l2_error(fn: PiecewiseLinearFunction, f: Callable, rule: Optional[QuadratureRule] = None):
    """``||fn - f||`` for a general function, by Gauss quadrature per element."""
    rule = rule or gauss_rule(9)
    p = fn.mesh.points
    xq, wq = rule.on_intervals(p[:-1], p[1:])
    k = np.broadcast_to(np.arange(fn.mesh.n_elements)[:, None], xq.shape)
    diff = evaluate(fn, xq.ravel(), hints=k.ravel()).reshape(xq.shape) - f(xq)
    return float(np.sqrt(np.sum(wq * diff**2)))


def h1_error(fn: PiecewiseLinearFunction, df: Callable, rule: Optional[QuadratureRule] = None):
    """``||fn' - f'||`` given the exact derivative ``df``."""
    rule = rule or gauss_rule(9)
    p = fn.mesh.points
    xq, wq = rule.on_intervals(p[:-1], p[1:])
    slopes = (np.diff(fn.values) / fn.mesh.sizes)[:, None]
    return float(np.sqrt(np.sum(wq * (slopes - df(xq)) ** 2)))


def interp_time_derivative(
    phi: Callable,
    level: MeshLevel,
    velocities: NodeVelocities,
    x: float,
    t: float,
) -> float:
    """Closed form of ``I(x, t) = sum_i phi(P_i(t), t) d/dt psi_i(x, t)``.

    ``level`` holds the node positions ``P_i(t)`` at time ``t``.
    """
    p = level.points
    if not p[0] <= x <= p[-1]:
        raise InvalidInputError("out-of-hull", f"x={x} outside the mesh hull [{p[0]}, {p[-1]}]")
    if velocities.values.shape != p.shape:
        raise InvalidInputError("mismatched-levels", "One velocity per node required")
    k = locate_element(level, x)
    pk, pk1 = p[k], p[k + 1]
    h = pk1 - pk
    psi_k = (pk1 - x) / h
    psi_k1 = (x - pk) / h
    phi_k, phi_k1 = float(phi(pk, t)), float(phi(pk1, t))
    w = velocities.values
    return -(phi_k1 - phi_k) / h * (w[k + 1] * psi_k1 + w[k] * psi_k)


def interpolant_transport_part(
    dphi_dt: Callable,
    dphi_dx: Callable,
    level: MeshLevel,
    velocities: NodeVelocities,
    x: float,
    t: float,
) -> float:
    """``Pi_h(t)[d_t phi + w d_x phi](x)``: the other half of ``d/dt Pi_h(t) phi``.

    Together with ``interp_time_derivative`` it gives the full time derivative of the
    moving interpolant at a fixed point ``x``.
    """
    p = level.points
    nodal = dphi_dt(p, t) + velocities.values * dphi_dx(p, t)
    return evaluate(PiecewiseLinearFunction(level, nodal), x, ExtensionPolicy.ERROR)
