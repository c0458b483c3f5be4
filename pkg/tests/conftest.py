"""Shared pytest configuration.

Loads `.env` at the project root so tests see the same LGMM_* defaults as the
CLI, and provides small meshes and velocity fields used across modules.
"""

import math
import tempfile
from pathlib import Path

import numpy as np
import pytest
from dotenv import load_dotenv

from lgmm.mesh import MeshLevel, initial_uniform_mesh
from lgmm.transport import VelocityField

load_dotenv()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def tmp_dir():
    """Temporary directory for artifacts."""
    with tempfile.TemporaryDirectory(ignore_cleanup_errors=True) as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def uniform_mesh() -> MeshLevel:
    return initial_uniform_mesh(-1.0, 1.0, 16)


@pytest.fixture
def graded_mesh() -> MeshLevel:
    """Nonuniform mesh on (-1, 1), finer towards the right end."""
    s = np.linspace(0.0, 1.0, 13)
    return MeshLevel(-1.0 + 2.0 * np.sqrt(s))


@pytest.fixture
def wall_field() -> VelocityField:
    """``0.5 sin(pi x)``: vanishes at -1 and 1."""
    return VelocityField(
        value=lambda x, t: 0.5 * np.sin(math.pi * x),
        grad=lambda x, t: 0.5 * math.pi * np.cos(math.pi * x),
        sup_bound=0.5,
        lipschitz_bound=0.5 * math.pi,
        vanishes_on_boundary=True,
        name="0.5 sin(pi x)",
    )
