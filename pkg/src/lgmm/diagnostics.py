"""Relative error norms, the discrete mass ledger, mesh statistics and EOC tables."""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidInputError
from .fem import (
    PiecewiseLinearFunction,
    QuadratureRule,
    gauss_rule,
    h1_error,
    h1_seminorm,
    interpolate,
    l2_error,
    l2_norm,
    total_integral,
)
from .mesh import MeshLevel
from .transport import HypothesisReport

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ("N", "dt", "E_linf_l2", "EOC_linf_l2", "E_l2_h1", "EOC_l2_h1", "E_mass")


@dataclass(frozen=True)
class ErrorNorms:
    linf_l2: float
    l2_h1: float
    mass: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.linf_l2, self.l2_h1, self.mass)

    def to_dict(self) -> dict:
        return {"E_linf_l2": self.linf_l2, "E_l2_h1": self.l2_h1, "E_mass": self.mass}


@dataclass(frozen=True)
class MassLedgerEntry:
    step: int
    time: float
    mass: float
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


class MassLedger:
    """Running form of the discrete mass balance.

    Order 1: ``int phi^n = int phi^0 + dt sum_{i<=n} S_i``.
    Order 2: ``int (3/2 phi^n - 1/2 phi^{n-1}) = int phi^0 + 3/2 dt S_1 + dt sum_{2<=i<=n} S_i``
    for ``n >= 2``, where the first step is first order. ``S_i`` is the total of
    the load functional at step ``i``.
    """

    def __init__(self, order: int, dt: float):
        if order not in (1, 2):
            raise InvalidInputError(
                "unsupported-order", f"Scheme order must be 1 or 2, got {order}"
            )
        self.order = order
        self.dt = dt
        self.masses: list[float] = []
        self._entries: list[MassLedgerEntry] = []
        self._first_source = 0.0
        self._later_sources = 0.0

    def record(self, fn: PiecewiseLinearFunction, source_sum: float = 0.0) -> MassLedgerEntry:
        n = len(self.masses)
        mass = total_integral(fn)
        self.masses.append(mass)
        m0 = self.masses[0]
        if n == 0:
            lhs = rhs = mass
        elif n == 1:
            self._first_source = self.dt * source_sum
            lhs = mass
            rhs = m0 + self._first_source
        elif self.order == 1:
            self._later_sources += self.dt * source_sum
            lhs = mass
            rhs = m0 + self._first_source + self._later_sources
        else:
            self._later_sources += self.dt * source_sum
            lhs = 1.5 * mass - 0.5 * self.masses[-2]
            rhs = m0 + 1.5 * self._first_source + self._later_sources
        entry = MassLedgerEntry(n, fn.time, mass, lhs, rhs)
        self._entries.append(entry)
        return entry

    def entries(self) -> list[MassLedgerEntry]:
        return list(self._entries)

    def residuals(self) -> np.ndarray:
        return np.array([e.residual for e in self._entries])


def mass_ledger_residual(
    trajectory: Sequence[PiecewiseLinearFunction],
    src,
    order: int,
    rule: Optional[QuadratureRule] = None,
) -> np.ndarray:
    """Per-step ``|lhs - rhs|`` of the mass balance along a stored trajectory."""
    from .scheme import load_functional

    if not trajectory:
        return np.zeros(0)
    dt = trajectory[1].time - trajectory[0].time if len(trajectory) > 1 else 1.0
    ledger = MassLedger(order, dt)
    ledger.record(trajectory[0])
    for fn in trajectory[1:]:
        ledger.record(fn, float(np.sum(load_functional(src, fn.mesh, fn.time, rule))))
    return ledger.residuals()


def _ratio(num: float, den: float, what: str) -> float:
    if den == 0.0:
        raise InvalidInputError("zero-denominator", f"Interpolated exact solution has zero {what}")
    return num / den


class ErrorAccumulator:
    """Streams the relative errors of phi_h^n against the interpolated exact solution.

    Norms run over ``n >= 1``; a run without steps falls back to the initial level.
    The ``l2`` time norms carry the ``sqrt(dt)`` weight.
    """

    def __init__(
        self,
        dt: float,
        exact: Optional[Callable] = None,
        exact_dx: Optional[Callable] = None,
        rule: Optional[QuadratureRule] = None,
    ):
        self.dt = dt
        self.exact = exact
        self.exact_dx = exact_dx
        self.rule = rule or gauss_rule(9)
        self._initial: Optional[dict] = None
        self._steps = 0
        self._sums = dict.fromkeys(
            ("e_l2", "pi_l2", "e_h1", "pi_h1", "phi_l2", "phi_h1", "true_l2", "true_h1"), 0.0
        )
        self._final_mass: tuple[float, float] = (0.0, 0.0)

    def _measure(self, fn: PiecewiseLinearFunction) -> dict:
        out = {"phi_l2": l2_norm(fn), "phi_h1": h1_seminorm(fn)}
        if self.exact is None:
            return out
        t = fn.time
        exact = self.exact
        pi = interpolate(lambda x: exact(x, t), fn.mesh)
        err = fn.minus(pi)
        out.update(
            e_l2=l2_norm(err),
            pi_l2=l2_norm(pi),
            e_h1=h1_seminorm(err),
            pi_h1=h1_seminorm(pi),
            mass=(total_integral(fn), total_integral(pi)),
        )
        if self.exact_dx is not None:
            exact_dx = self.exact_dx
            out["true_l2"] = l2_error(fn, lambda x: exact(x, t), self.rule)
            out["true_h1"] = h1_error(fn, lambda x: exact_dx(x, t), self.rule)
        return out

    def record(self, fn: PiecewiseLinearFunction, step: int) -> None:
        m = self._measure(fn)
        if step == 0:
            self._initial = m
            return
        self._steps += 1
        s = self._sums
        for key in ("e_l2", "pi_l2", "phi_l2", "true_l2"):
            if key in m:
                s[key] = max(s[key], m[key])
        for key in ("e_h1", "pi_h1", "phi_h1", "true_h1"):
            if key in m:
                s[key] += self.dt * m[key] ** 2
        if "mass" in m:
            self._final_mass = m["mass"]

    def _norms(self) -> dict:
        if self._steps:
            return {k: (math.sqrt(v) if k.endswith("h1") else v) for k, v in self._sums.items()}
        if self._initial is None:
            raise InvalidInputError("missing-history", "No level was recorded")
        m = self._initial
        out = {k: v for k, v in m.items() if k != "mass"}
        # the dt weight cancels in the ratios
        self._final_mass = m.get("mass", (0.0, 0.0))
        return out

    def result(self) -> Optional[ErrorNorms]:
        if self.exact is None:
            return None
        n = self._norms()
        phi_mass, pi_mass = self._final_mass
        return ErrorNorms(
            _ratio(n["e_l2"], n["pi_l2"], "L2 norm"),
            _ratio(n["e_h1"], n["pi_h1"], "H1 seminorm"),
            _ratio(abs(phi_mass - pi_mass), abs(pi_mass), "mass"),
        )

    def true_result(self) -> Optional[ErrorNorms]:
        """Errors against the exact solution itself, same denominators as ``result``."""
        if self.exact is None or self.exact_dx is None:
            return None
        n = self._norms()
        phi_mass, pi_mass = self._final_mass
        return ErrorNorms(
            _ratio(n["true_l2"], n["pi_l2"], "L2 norm"),
            _ratio(n["true_h1"], n["pi_h1"], "H1 seminorm"),
            _ratio(abs(phi_mass - pi_mass), abs(pi_mass), "mass"),
        )

    def stability(self, nu: float) -> float:
        """``||phi_h||_{linf(L2)} + sqrt(nu) ||grad phi_h||_{l2(L2)}``."""
        n = self._norms()
        if not self._steps:
            return n["phi_l2"]
        return n["phi_l2"] + math.sqrt(nu) * n["phi_h1"]


def relative_errors(
    trajectory: Sequence[PiecewiseLinearFunction], exact: Callable
) -> tuple[float, float, float]:
    """``(E_linf(L2), E_l2(H1), E_mass)`` of a stored trajectory phi^0..phi^N."""
    if not trajectory:
        raise InvalidInputError("missing-history", "Empty trajectory")
    dt = trajectory[1].time - trajectory[0].time if len(trajectory) > 1 else 1.0
    acc = ErrorAccumulator(dt, exact)
    for n, fn in enumerate(trajectory):
        acc.record(fn, n)
    return acc.result().as_tuple()


def stability_functional(trajectory: Sequence[PiecewiseLinearFunction], nu: float) -> float:
    dt = trajectory[1].time - trajectory[0].time if len(trajectory) > 1 else 1.0
    acc = ErrorAccumulator(dt)
    for n, fn in enumerate(trajectory):
        acc.record(fn, n)
    return acc.stability(nu)


@dataclass(frozen=True)
class MeshStats:
    times: np.ndarray
    min_h: np.ndarray
    max_h: np.ndarray
    h0: float

    @property
    def smallest(self) -> float:
        return float(np.min(self.min_h))

    @property
    def largest(self) -> float:
        return float(np.max(self.max_h))

    @property
    def max_ratio(self) -> float:
        """Largest element relative to the initial mesh size."""
        return self.largest / self.h0

    def to_dict(self) -> dict:
        return {
            "min_h": self.smallest,
            "max_h": self.largest,
            "max_ratio_to_h0": self.max_ratio,
            "final_min_h": float(self.min_h[-1]),
            "final_max_h": float(self.max_h[-1]),
        }


class MeshStatsRecorder:
    def __init__(self, h0: float):
        self.h0 = h0
        self._times: list[float] = []
        self._min: list[float] = []
        self._max: list[float] = []

    def record(self, mesh: MeshLevel, step: int) -> None:
        sizes = mesh.sizes
        self._times.append(mesh.time)
        self._min.append(float(np.min(sizes)))
        self._max.append(float(np.max(sizes)))

    def result(self) -> MeshStats:
        return MeshStats(np.array(self._times), np.array(self._min), np.array(self._max), self.h0)


@dataclass
class RunReport:
    """Everything one simulation reports besides the solution itself."""

    problem: str
    n_elements: int
    dt: float
    order: int
    moving: bool
    n_steps: int
    errors: Optional[ErrorNorms]
    ledger: list[MassLedgerEntry]
    mesh_stats: MeshStats
    stability: float
    hypotheses: HypothesisReport
    true_errors: Optional[ErrorNorms] = None
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def max_ledger_residual(self) -> float:
        return max((e.residual for e in self.ledger), default=0.0)

    @property
    def relative_ledger_residual(self) -> float:
        m0 = abs(self.ledger[0].mass) if self.ledger else 0.0
        return self.max_ledger_residual / m0 if m0 > 0.0 else self.max_ledger_residual

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "n_elements": self.n_elements,
            "dt": self.dt,
            "order": self.order,
            "moving": self.moving,
            "n_steps": self.n_steps,
            "errors": self.errors.to_dict() if self.errors else None,
            "true_errors": self.true_errors.to_dict() if self.true_errors else None,
            "initial_mass": self.ledger[0].mass if self.ledger else None,
            "final_mass": self.ledger[-1].mass if self.ledger else None,
            "max_ledger_residual": self.max_ledger_residual,
            "relative_ledger_residual": self.relative_ledger_residual,
            "stability": self.stability,
            "mesh": self.mesh_stats.to_dict(),
            "hypotheses": self.hypotheses.to_dict(),
            "wall_time_s": round(self.wall_time, 3),
            **self.extra,
        }


def eoc(err_coarse: float, err_fine: float) -> float:
    """Experimental order of convergence ``log2(E_coarse / E_fine)``."""
    if not (err_coarse > 0.0 and err_fine > 0.0):
        raise InvalidInputError(
            "nonpositive-error", f"EOC needs positive errors, got {err_coarse} and {err_fine}"
        )
    return math.log2(err_coarse / err_fine)


@dataclass(frozen=True)
class ConvergenceRow:
    n_elements: int
    dt: float
    errors: ErrorNorms
    eocs: Optional[tuple[Optional[float], Optional[float], Optional[float]]] = None

    def to_csv_row(self) -> dict:
        linf, h1, _ = self.eocs or (None, None, None)
        return dict(
            zip(
                TABLE_COLUMNS,
                (
                    self.n_elements,
                    repr(self.dt),
                    repr(self.errors.linf_l2),
                    "" if linf is None else f"{linf:.2f}",
                    repr(self.errors.l2_h1),
                    "" if h1 is None else f"{h1:.2f}",
                    repr(self.errors.mass),
                ),
            )
        )

    def to_dict(self) -> dict:
        return {
            "N": self.n_elements,
            "dt": self.dt,
            **self.errors.to_dict(),
            "eoc": list(self.eocs) if self.eocs else None,
        }


def _optional_eoc(coarse: float, fine: float) -> Optional[float]:
    try:
        return eoc(coarse, fine)
    except InvalidInputError:
        logger.warning("EOC undefined for errors %g -> %g", coarse, fine)
        return None


def build_convergence_table(
    levels: Sequence[tuple[int, float, ErrorNorms]],
) -> list[ConvergenceRow]:
    """One row per refinement level; EOCs against the previous (coarser) level."""
    rows: list[ConvergenceRow] = []
    for i, (n, dt, errors) in enumerate(levels):
        eocs = None
        if i > 0:
            prev = levels[i - 1][2]
            eocs = tuple(_optional_eoc(c, f) for c, f in zip(prev.as_tuple(), errors.as_tuple()))
        rows.append(ConvergenceRow(n, dt, errors, eocs))
    return rows
