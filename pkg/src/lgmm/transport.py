"""Upwind characteristic maps and quadrature of composed terms ``(phi o X) gamma``."""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInputError
from .fem import (
    ExtensionPolicy,
    PiecewiseLinearFunction,
    QuadratureRule,
    evaluate,
    gauss_rule,
    locate_elements,
)
from .mesh import MeshLevel

logger = logging.getLogger(__name__)

STEP_RESTRICTION_BOUND = 0.125
NEWTON_MAX_ITER = 50


def _zero(x, t):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class VelocityField:
    """Advecting velocity ``u(x, t)`` with its spatial derivative and bounds.

    ``value`` and ``grad`` take numpy arrays and broadcast.
    """

    value: Callable
    grad: Callable
    sup_bound: float
    lipschitz_bound: float
    vanishes_on_boundary: bool = False
    name: str = "custom"

    def __post_init__(self):
        if self.sup_bound < 0.0 or self.lipschitz_bound < 0.0:
            raise InvalidInputError("invalid-bound", "Velocity bounds must be non-negative")

    @property
    def w1inf_bound(self) -> float:
        """``|u|_{W^{1,inf}}`` as the larger of the sup and Lipschitz bounds."""
        return max(self.sup_bound, self.lipschitz_bound)

    @classmethod
    def zero(cls) -> "VelocityField":
        return cls(_zero, _zero, 0.0, 0.0, True, "zero")

    @classmethod
    def constant(cls, c: float) -> "VelocityField":
        def value(x, t):
            return np.full_like(np.asarray(x, dtype=float), c)

        return cls(value, _zero, abs(c), 0.0, c == 0.0, f"constant({c:g})")

    def sample(self, x, t: float) -> np.ndarray:
        out = np.asarray(self.value(np.asarray(x, dtype=float), t), dtype=float)
        return np.broadcast_to(out, np.shape(x)).copy()

    def sample_grad(self, x, t: float) -> np.ndarray:
        out = np.asarray(self.grad(np.asarray(x, dtype=float), t), dtype=float)
        return np.broadcast_to(out, np.shape(x)).copy()


@dataclass(frozen=True)
class UpwindMap:
    """``X(x) = x - step * u(x, time)`` with the velocity frozen at ``time``.

    ``step`` is ``dt`` for the one-step map and ``2 dt`` for the double-step map
    of the second-order scheme.
    """

    velocity: VelocityField
    time: float
    step: float

    def __post_init__(self):
        if not self.step > 0.0:
            raise InvalidInputError("invalid-step", f"Upwind step must be > 0, got {self.step}")


def upwind_point(umap: UpwindMap, x):
    """Foot of the characteristic through ``x``."""
    xs = np.asarray(x, dtype=float)
    out = xs - umap.step * umap.velocity.sample(xs, umap.time)
    return float(out) if out.ndim == 0 else out


def jacobian(umap: UpwindMap, x):
    """``gamma(x) = 1 - step * du/dx(x)``."""
    xs = np.asarray(x, dtype=float)
    out = 1.0 - umap.step * umap.velocity.sample_grad(xs, umap.time)
    return float(out) if out.ndim == 0 else out


def upwind_preimages(umap: UpwindMap, targets) -> np.ndarray:
    """Solve ``X(x) = p`` for every ``p`` in ``targets`` by Newton iteration.

    ``X`` is strictly increasing while ``step * |du/dx| < 1``, so every target has
    exactly one preimage.
    """
    targets = np.asarray(targets, dtype=float)
    x = targets + umap.step * umap.velocity.sample(targets, umap.time)
    tol = 1e-15 * (1.0 + np.abs(targets))
    for _ in range(NEWTON_MAX_ITER):
        residual = upwind_point(umap, x) - targets
        slope = np.atleast_1d(jacobian(umap, x))
        if np.any(slope <= 0.0):
            raise InvalidInputError(
                "non-monotone-map", "Upwind map is not monotone; the time step is too large"
            )
        x = x - residual / slope
        if np.all(np.abs(residual) <= tol):
            break
    return x


def _integration_intervals(
    prev_mesh: MeshLevel, umap: UpwindMap, new_mesh: MeshLevel, split_kinks: bool
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sub-intervals of the new hull and the new element owning each one."""
    p = new_mesh.points
    if not split_kinks:
        k = np.arange(new_mesh.n_elements)
        return p[:-1], p[1:], k
    pre = upwind_preimages(umap, prev_mesh.points)
    pre = pre[(pre > p[0]) & (pre < p[-1])]
    breaks = np.union1d(p, pre)
    left, right = breaks[:-1], breaks[1:]
    keep = right - left > 1e-14 * (p[-1] - p[0])
    left, right = left[keep], right[keep]
    k = locate_elements(new_mesh, 0.5 * (left + right))
    return left, right, k


def composed_load(
    prev_fn: PiecewiseLinearFunction,
    umap: UpwindMap,
    new_mesh: MeshLevel,
    rule: Optional[QuadratureRule] = None,
    policy: ExtensionPolicy = ExtensionPolicy.LINEAR,
    split_kinks: bool = False,
) -> np.ndarray:
    """Entries ``int prev_fn(X(x)) gamma(x) psi_j(x) dx`` for every new basis ``psi_j``.

    Without ``split_kinks`` the rule is applied per new element. With it the new
    elements are cut at the preimages of the old nodes, so the integrand is
    smooth on every piece.
    """
    rule = rule or gauss_rule(9)
    left, right, k = _integration_intervals(prev_fn.mesh, umap, new_mesh, split_kinks)
    xq, wq = rule.on_intervals(left, right)
    owner = np.broadcast_to(k[:, None], xq.shape)

    feet = upwind_point(umap, xq.ravel())
    # Old element i sits near new element i while the mesh follows the flow.
    hints = np.minimum(owner.ravel(), prev_fn.mesh.n_elements - 1)
    composed = evaluate(prev_fn, feet, policy, hints).reshape(xq.shape)
    integrand = wq * composed * jacobian(umap, xq.ravel()).reshape(xq.shape)

    exterior = int(np.count_nonzero((feet < prev_fn.mesh.left) | (feet > prev_fn.mesh.right)))
    if exterior:
        logger.debug(
            "%d upwind points left the hull [%.6g, %.6g] at t=%.6g",
            exterior,
            prev_fn.mesh.left,
            prev_fn.mesh.right,
            umap.time,
        )

    p = new_mesh.points
    h = new_mesh.sizes[k][:, None]
    psi_right = (xq - p[k][:, None]) / h
    psi_left = 1.0 - psi_right
    n = new_mesh.n_points
    return np.bincount(k, np.sum(integrand * psi_left, axis=1), minlength=n) + np.bincount(
        k + 1, np.sum(integrand * psi_right, axis=1), minlength=n
    )


def jacobian_bounds(umap: UpwindMap, mesh: MeshLevel, rule: Optional[QuadratureRule] = None):
    """Smallest and largest ``gamma`` over the quadrature points of ``mesh``."""
    rule = rule or gauss_rule(9)
    xq, _ = rule.on_intervals(mesh.points[:-1], mesh.points[1:])
    gamma = jacobian(umap, np.append(xq.ravel(), mesh.points))
    return float(np.min(gamma)), float(np.max(gamma))


@dataclass(frozen=True)
class HypothesisReport:
    """Advisory check of the velocity assumptions behind the error analysis."""

    vanishes_on_boundary: bool
    step_restriction: bool
    cfl_margin: float
    w1inf_bound: float
    dt: float

    @property
    def all_satisfied(self) -> bool:
        return self.vanishes_on_boundary and self.step_restriction

    def to_dict(self) -> dict:
        return {
            "vanishes_on_boundary": self.vanishes_on_boundary,
            "step_restriction": self.step_restriction,
            "cfl_margin": self.cfl_margin,
            "w1inf_bound": self.w1inf_bound,
            "dt": self.dt,
        }


def hypothesis_check(u: VelocityField, dt: float) -> HypothesisReport:
    """Check ``u = 0`` on the boundary and ``dt |u|_{W^{1,inf}} <= 1/8``; warn only."""
    margin = dt * u.w1inf_bound
    report = HypothesisReport(
        vanishes_on_boundary=bool(u.vanishes_on_boundary),
        step_restriction=margin <= STEP_RESTRICTION_BOUND + 1e-12,
        cfl_margin=margin,
        w1inf_bound=u.w1inf_bound,
        dt=dt,
    )
    if not report.vanishes_on_boundary:
        logger.warning(
            "Velocity %s does not vanish on the boundary; mass may leave the domain", u.name
        )
    if not report.step_restriction:
        logger.warning(
            "dt*|u|_W1inf = %.4g exceeds %.4g for velocity %s",
            margin,
            STEP_RESTRICTION_BOUND,
            u.name,
        )
    return report
