"""Benchmark problems: a travelling periodic profile, a concentrating bump, a Gaussian pulse."""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError
from .scheme import Problem, SourceData
from .transport import VelocityField

PRESETS = ("example1", "example2", "custom")


@dataclass(frozen=True)
class PresetDefaults:
    """Numerical defaults that come with a preset."""

    nu: float
    t_end: float
    n: int
    dt: float | None
    dt_factor: float | None
    clamp_boundary: bool
    snapshot_times: tuple[float, ...]


DEFAULTS = {
    # dt = 4 h_0 with h_0 = 2 / N
    "example1": PresetDefaults(0.01, 0.5, 128, None, 4.0, False, (0.0, 0.5)),
    "example2": PresetDefaults(1e-5, 2.0, 256, 1e-4, None, True, (0.0, 1.0, 2.0)),
    "custom": PresetDefaults(1e-3, 0.5, 128, None, 1.0, False, (0.0, 0.5)),
}


# --- example1: u = 1 + sin(t - x), phi = exp(-(1 - cos(t - x)) / nu) -------------


def _travelling_velocity() -> VelocityField:
    return VelocityField(
        value=lambda x, t: 1.0 + np.sin(t - x),
        grad=lambda x, t: -np.cos(t - x),
        sup_bound=2.0,
        lipschitz_bound=1.0,
        vanishes_on_boundary=False,
        name="1+sin(t-x)",
    )


def travelling_profile(nu: float, t_end: float = 0.5) -> Problem:
    def exact(x, t):
        return np.exp(-(1.0 - np.cos(t - x)) / nu)

    def exact_dx(x, t):
        return exact(x, t) * np.sin(t - x) / nu

    return Problem(
        name="example1",
        a=-1.0,
        b=1.0,
        t_end=t_end,
        velocity=_travelling_velocity(),
        initial=lambda x: exact(x, 0.0),
        source=SourceData.zero(),
        exact=exact,
        exact_dx=exact_dx,
    )


# --- example2: u = sin(2 pi x), no closed-form solution ---------------------------


def _cellular_velocity() -> VelocityField:
    two_pi = 2.0 * math.pi
    return VelocityField(
        value=lambda x, t: np.sin(two_pi * x),
        grad=lambda x, t: two_pi * np.cos(two_pi * x),
        sup_bound=1.0,
        lipschitz_bound=two_pi,
        vanishes_on_boundary=True,
        name="sin(2 pi x)",
    )


def concentrating_bump(t_end: float = 2.0) -> Problem:
    return Problem(
        name="example2",
        a=-1.0,
        b=1.0,
        t_end=t_end,
        velocity=_cellular_velocity(),
        initial=lambda x: np.exp(-100.0 * (1.0 - np.cos(x))),
        source=SourceData.zero(),
    )


# --- custom: constant drift of a Gaussian pulse -----------------------------------


def gaussian_pulse(
    nu: float, velocity: float = 0.5, width: float = 0.1, center: float = -0.25, t_end: float = 0.5
) -> Problem:
    """Free-space solution of a drifting, diffusing Gaussian.

    On ``(-1, 1)`` it is exact up to the tails reaching the ends.
    """
    if width <= 0.0:
        raise ConfigError(f"width must be > 0, got {width}")
    var0 = width * width

    def exact(x, t):
        var = var0 + 2.0 * nu * t
        return np.sqrt(var0 / var) * np.exp(-((x - center - velocity * t) ** 2) / (2.0 * var))

    def exact_dx(x, t):
        var = var0 + 2.0 * nu * t
        return -(x - center - velocity * t) / var * exact(x, t)

    return Problem(
        name="custom",
        a=-1.0,
        b=1.0,
        t_end=t_end,
        velocity=VelocityField.constant(velocity),
        initial=lambda x: exact(x, 0.0),
        source=SourceData.zero(),
        exact=exact,
        exact_dx=exact_dx,
    )


_BUILDERS: dict[str, Callable[..., Problem]] = {
    "example1": lambda cfg: travelling_profile(cfg.nu, cfg.t_end),
    "example2": lambda cfg: concentrating_bump(cfg.t_end),
    "custom": lambda cfg: gaussian_pulse(cfg.nu, cfg.velocity, cfg.width, cfg.center, cfg.t_end),
}


def build_problem(cfg) -> Problem:
    """Problem for a resolved ``ExperimentConfig``."""
    try:
        builder = _BUILDERS[cfg.preset]
    except KeyError:
        raise ConfigError(f"Unknown preset '{cfg.preset}'. Use one of: {', '.join(PRESETS)}")
    return builder(cfg)
