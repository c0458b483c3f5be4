"""Experiment configuration: preset defaults, a flat ``key = value`` file format and overrides."""

import logging
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Callable, Optional

from .errors import ConfigError
from .fem import MAX_GAUSS_POINTS, ExtensionPolicy
from .mesh import MeshMotionConfig
from .problems import DEFAULTS, PRESETS
from .scheme import SchemeConfig, step_count

logger = logging.getLogger(__name__)

DOMAIN_LENGTH = 2.0
AUTO = "auto"
MAX_TRAJECTORY_LEVELS = 200


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment. ``None`` means "take it from the preset" until ``resolve()``."""

    preset: str = "example1"
    nu: Optional[float] = None
    nu_m: Optional[float] = None  # None -> nu
    n: Optional[int] = None
    dt: Optional[float] = None
    dt_factor: Optional[float] = None  # dt = dt_factor * h_0
    t_end: Optional[float] = None
    order: int = 2
    moving: bool = True
    clamp_boundary: Optional[bool] = None
    extension: str = ExtensionPolicy.LINEAR.value
    split_kinks: bool = False
    cg_tol: float = 1e-12
    cg_max_iter: Optional[int] = None
    sor_omega: Optional[float] = None  # None -> optimal factor per step
    sor_tol: float = 1e-12
    sor_max_iter: Optional[int] = None
    quadrature_points: int = 9
    snapshot_times: Optional[tuple[float, ...]] = None
    trajectory_every: Optional[int] = None  # 0 disables the mesh trajectory export
    true_errors: bool = False
    velocity: float = 0.5
    width: float = 0.1
    center: float = -0.25
    output_dir: str = "runs"
    seed: int = 0
    workers: int = 1

    def to_dict(self) -> dict:
        data = asdict(self)
        if data["snapshot_times"] is not None:
            data["snapshot_times"] = list(data["snapshot_times"])
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"Unknown config keys: {', '.join(sorted(unknown))}")
        data = {**data}
        if data.get("snapshot_times") is not None:
            data["snapshot_times"] = tuple(float(t) for t in data["snapshot_times"])
        return cls(**data).validate()

    @property
    def h0(self) -> float:
        return DOMAIN_LENGTH / self.n

    @property
    def time_step(self) -> float:
        """Resolved ``dt``, either fixed or proportional to ``h_0``."""
        if self.dt is not None:
            return self.dt
        return self.dt_factor * self.h0

    def validate(self) -> "ExperimentConfig":
        if self.preset not in PRESETS:
            raise ConfigError(f"preset must be one of {', '.join(PRESETS)}, got '{self.preset}'")
        if self.order not in (1, 2):
            raise ConfigError(f"order must be 1 or 2, got {self.order}")
        if self.n is not None and self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        for key in ("nu", "dt", "dt_factor", "cg_tol", "sor_tol", "width"):
            value = getattr(self, key)
            if value is not None and not value > 0.0:
                raise ConfigError(f"{key} must be > 0, got {value}")
        if self.dt is not None and self.dt_factor is not None:
            raise ConfigError("Set either dt or dt_factor, not both")
        if self.nu_m is not None and self.nu_m < 0.0:
            raise ConfigError(f"nu_m must be >= 0, got {self.nu_m}")
        if self.t_end is not None and self.t_end < 0.0:
            raise ConfigError(f"t_end must be >= 0, got {self.t_end}")
        if self.sor_omega is not None and not 0.0 < self.sor_omega < 2.0:
            raise ConfigError(f"sor_omega must lie in (0, 2), got {self.sor_omega}")
        if self.extension not in {p.value for p in ExtensionPolicy}:
            choices = ", ".join(p.value for p in ExtensionPolicy)
            raise ConfigError(f"extension must be one of {choices}, got '{self.extension}'")
        if not 1 <= self.quadrature_points <= MAX_GAUSS_POINTS:
            raise ConfigError(
                f"quadrature_points must lie in 1..{MAX_GAUSS_POINTS}, got {self.quadrature_points}"
            )
        for key in ("cg_max_iter", "sor_max_iter", "workers"):
            value = getattr(self, key)
            if value is not None and value < 1:
                raise ConfigError(f"{key} must be >= 1, got {value}")
        if self.trajectory_every is not None and self.trajectory_every < 0:
            raise ConfigError(f"trajectory_every must be >= 0, got {self.trajectory_every}")
        return self

    def resolve(self) -> "ExperimentConfig":
        """Fill every preset-dependent ``None``; resolving twice is a no-op."""
        self.validate()
        d = DEFAULTS[self.preset]
        nu = self.nu if self.nu is not None else d.nu
        n = self.n if self.n is not None else d.n
        t_end = self.t_end if self.t_end is not None else d.t_end
        dt, dt_factor = self.dt, self.dt_factor
        if dt is None and dt_factor is None:
            dt, dt_factor = d.dt, d.dt_factor
        cfg = replace(
            self,
            nu=nu,
            nu_m=self.nu_m if self.nu_m is not None else nu,
            n=n,
            dt=dt,
            dt_factor=dt_factor,
            t_end=t_end,
            clamp_boundary=(
                self.clamp_boundary if self.clamp_boundary is not None else d.clamp_boundary
            ),
        )
        if cfg.snapshot_times is None:
            times = {0.0, t_end} | {t for t in d.snapshot_times if t <= t_end}
            cfg = replace(cfg, snapshot_times=tuple(sorted(times)))
        if cfg.trajectory_every is None:
            n_steps = step_count(t_end, cfg.time_step)
            cfg = replace(cfg, trajectory_every=max(1, n_steps // MAX_TRAJECTORY_LEVELS))
        return cfg

    def at_level(self, n: int) -> "ExperimentConfig":
        """Same experiment on a refined initial mesh; ``dt`` follows ``dt_factor`` if set."""
        return replace(self, n=n, trajectory_every=None).resolve()

    def mesh_config(self, check_mmatrix: bool = False) -> MeshMotionConfig:
        cfg = self.resolve()
        return MeshMotionConfig(
            nu_m=cfg.nu_m,
            dt=cfg.time_step,
            clamp_boundary=cfg.clamp_boundary,
            sor_omega=cfg.sor_omega,
            sor_tol=cfg.sor_tol,
            sor_max_iter=cfg.sor_max_iter,
            check_mmatrix=check_mmatrix,
        )

    def scheme_config(self) -> SchemeConfig:
        cfg = self.resolve()
        return SchemeConfig(
            nu=cfg.nu,
            dt=cfg.time_step,
            order=cfg.order,
            cg_tol=cfg.cg_tol,
            cg_max_iter=cfg.cg_max_iter,
            extension=ExtensionPolicy(cfg.extension),
            quadrature_points=cfg.quadrature_points,
            split_kinks=cfg.split_kinks,
        )


# --- flat key = value format -----------------------------------------------------


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got '{text}'")


def _parse_times(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.split(",") if part.strip())


_PARSERS: dict[str, Callable[[str], Any]] = {
    "preset": str,
    "nu": float,
    "nu_m": float,
    "n": int,
    "dt": float,
    "dt_factor": float,
    "t_end": float,
    "order": int,
    "moving": _parse_bool,
    "clamp_boundary": _parse_bool,
    "extension": str,
    "split_kinks": _parse_bool,
    "cg_tol": float,
    "cg_max_iter": int,
    "sor_omega": float,
    "sor_tol": float,
    "sor_max_iter": int,
    "quadrature_points": int,
    "snapshot_times": _parse_times,
    "trajectory_every": int,
    "true_errors": _parse_bool,
    "velocity": float,
    "width": float,
    "center": float,
    "output_dir": str,
    "seed": int,
    "workers": int,
}


def parse_value(key: str, text: str, line: Optional[int] = None) -> Any:
    if key not in _PARSERS:
        raise ConfigError(f"Unknown config key '{key}'", line)
    text = text.strip()
    if text.lower() in (AUTO, "none", ""):
        return None
    try:
        value = _PARSERS[key](text)
    except ValueError as e:
        raise ConfigError(f"Invalid value for '{key}': {e}", line) from None
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"Invalid value for '{key}': {text} is not finite", line)
    return value


def parse_config_text(text: str, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    cfg = (base or ExperimentConfig()).validate()
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"Expected 'key = value', got '{raw.strip()}'", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"Duplicate key '{key}'", lineno)
        seen.add(key)
        try:
            cfg = replace(cfg, **{key: parse_value(key, value)}).validate()
        except ConfigError as e:
            raise ConfigError(str(e), lineno) from None
    return cfg


def load_config(path: Path, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e.strerror}") from None
    return parse_config_text(text, base)


def apply_overrides(cfg: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Apply ``key=value`` strings from the command line."""
    values = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"Override must look like key=value, got '{item}'")
        key, value = (part.strip() for part in item.split("=", 1))
        values[key] = parse_value(key, value)
    return replace(cfg, **values).validate()


def _format_value(value: Any) -> str:
    if value is None:
        return AUTO
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def dump_config(cfg: ExperimentConfig) -> str:
    """Render ``cfg`` in the flat format; ``parse_config_text`` reads it back unchanged."""
    lines = ["# lgmm experiment configuration"]
    for f in fields(cfg):
        lines.append(f"{f.name} = {_format_value(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"
