"""Exception hierarchy shared by the solver and the CLI."""

from typing import Optional


class LgmmError(Exception):
    """Base class for every error raised by lgmm."""

    code = "lgmm-error"


class ConfigError(LgmmError, ValueError):
    """Invalid configuration value or malformed config file line."""

    code = "config-error"

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidInputError(LgmmError, ValueError):
    """Precondition violation of an operation.

    ``code`` names the failure kind, e.g. ``invalid-interval``,
    ``index-out-of-range`` or ``mismatched-levels``.
    """

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


class NumericalError(LgmmError, RuntimeError):
    """A numerical failure: overlapping mesh, solver breakdown, broken assembly."""

    code = "numerical-failure"


class MeshOverlapError(NumericalError):
    """The mesh motion produced a non-positive element gap."""

    code = "overlap-detected"

    def __init__(self, min_gap: float, element: int, time: float):
        self.min_gap = min_gap
        self.element = element
        self.time = time
        super().__init__(
            f"Mesh overlap at t={time:.6g}: element {element} has gap {min_gap:.3e} "
            "(time step violates the non-overlap condition)"
        )


class SolverConvergenceError(NumericalError):
    """An iterative solver hit its iteration limit or broke down."""

    code = "no-convergence"

    def __init__(self, solver: str, iterations: int, residual: float, detail: str = ""):
        self.solver = solver
        self.iterations = iterations
        self.residual = residual
        msg = f"{solver} did not converge after {iterations} iterations (residual {residual:.3e})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class AsymmetryError(NumericalError):
    """CG was handed a matrix that is not symmetric."""

    code = "asymmetry-detected"


class AcceptanceError(LgmmError):
    """One or more selftest acceptance checks failed."""

    code = "acceptance-failure"

    def __init__(self, message: str, results: Optional[dict] = None):
        self.results = results or {}
        super().__init__(message)
