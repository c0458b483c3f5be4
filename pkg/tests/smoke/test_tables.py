"""Smoke tests: full-size convergence studies and the concentrating-bump comparison.

These runs take minutes (the finest levels have 4097 nodes), so they are
skipped unless LGMM_SMOKE=1. Set LGMM_SMOKE_WORKERS to spread the levels of
a study over several processes.

Usage:
    LGMM_SMOKE=1 uv run python -m pytest tests/smoke/ -v
"""

import math
import os

import pytest

from lgmm.config import ExperimentConfig
from lgmm.experiments import compare_schemes, convergence_study, simulate
from lgmm.selftest import check_mass_identities

pytestmark = pytest.mark.skipif(
    os.getenv("LGMM_SMOKE") != "1", reason="set LGMM_SMOKE=1 to run the full-size studies"
)

WORKERS = int(os.getenv("LGMM_SMOKE_WORKERS", "1"))

# Published relative errors, keyed by N: (E_linf_l2, E_l2_h1)
STATIC_NU_1E2 = {
    128: (2.795558e-3, 4.621785e-3),
    256: (8.085728e-4, 1.296162e-3),
    512: (2.221100e-4, 3.445636e-4),
    1024: (5.927475e-5, 9.098049e-5),
}
MOVING_NU_1E2 = {
    128: (3.293675e-3, 5.441997e-3),
    256: (8.756374e-4, 1.467274e-3),
    512: (2.265597e-4, 3.853933e-4),
    1024: (5.945318e-5, 8.875689e-5),
}
STATIC_NU_1E4 = {
    2048: (5.000259e-4, 5.729551e-4),
    4096: (2.650173e-4, 3.289690e-4),
}
# Static-mesh E_linf_l2 this package produces at nu = 1e-4 with the 9-point rule.
# The kink error of the unsplit quadrature is smaller here than in the published
# run, so the order drops later and less sharply.
STATIC_NU_1E4_MEASURED = {1024: 8.57e-4, 2048: 2.2386e-4, 4096: 7.732e-5}
MOVING_NU_1E4 = {
    2048: (2.574393e-4, 6.381969e-4),
    4096: (6.442978e-5, 1.598421e-4),
}


def _example1(tmp_path, nu: float, moving: bool, **kwargs) -> ExperimentConfig:
    return ExperimentConfig(
        preset="example1",
        nu=nu,
        moving=moving,
        dt_factor=4.0,
        output_dir=str(tmp_path),
        workers=WORKERS,
        **kwargs,
    )


def _study(tmp_path, nu: float, moving: bool, levels: list[int]) -> dict[int, dict]:
    cfg = _example1(tmp_path, nu, moving)
    result = convergence_study(cfg, levels)
    return {row["N"]: row for row in result["rows"]}


def _assert_close(rows: dict[int, dict], published: dict[int, tuple[float, float]], rtol=0.15):
    for n, (linf, h1) in published.items():
        row = rows[n]
        assert row["E_linf_l2"] == pytest.approx(linf, rel=rtol), (n, row)
        assert row["E_l2_h1"] == pytest.approx(h1, rel=rtol), (n, row)


def _assert_eocs(rows: dict[int, dict], published: dict[int, tuple[float, float]], tol=0.2):
    levels = sorted(published)
    for coarse, fine in zip(levels, levels[1:]):
        linf_eoc, h1_eoc, _ = rows[fine]["eoc"]
        expected_linf = math.log2(published[coarse][0] / published[fine][0])
        expected_h1 = math.log2(published[coarse][1] / published[fine][1])
        assert linf_eoc == pytest.approx(expected_linf, abs=tol), (fine, rows[fine])
        assert h1_eoc == pytest.approx(expected_h1, abs=tol), (fine, rows[fine])


# ---------------------------------------------------------------------------
# Travelling profile, nu = 0.01
# ---------------------------------------------------------------------------


class TestModerateDiffusion:
    LEVELS = [128, 256, 512, 1024]

    def test_static_mesh_matches_published_errors(self, tmp_path):
        """Static-mesh errors within 15% of the published table, EOCs within 0.2."""
        rows = _study(tmp_path, 0.01, False, self.LEVELS)
        _assert_close(rows, STATIC_NU_1E2)
        _assert_eocs(rows, STATIC_NU_1E2)

    def test_moving_mesh_matches_published_errors(self, tmp_path):
        """Moving-mesh errors within 15% of the published table, EOCs within 0.2."""
        rows = _study(tmp_path, 0.01, True, self.LEVELS)
        _assert_close(rows, MOVING_NU_1E2)
        _assert_eocs(rows, MOVING_NU_1E2)

    def test_mass_loss_is_small(self, tmp_path):
        """The relative final-time mass loss stays far below the discretization error."""
        rows = _study(tmp_path, 0.01, True, [256, 512])
        for row in rows.values():
            assert row["E_mass"] < 1e-4

    @pytest.mark.parametrize("moving", [True, False])
    def test_stability_functional_does_not_grow(self, tmp_path, moving):
        """||phi_h||_linf(L2) + sqrt(nu) ||grad phi_h||_l2(L2) stays bounded under refinement."""
        values = [
            simulate(_example1(tmp_path, 0.01, moving, n=n)).report.stability
            for n in (128, 256, 512)
        ]
        for coarse, fine in zip(values, values[1:]):
            assert fine <= 1.1 * coarse, values


# ---------------------------------------------------------------------------
# Travelling profile, nu = 1e-4
# ---------------------------------------------------------------------------


class TestWeakDiffusion:
    LEVELS = [1024, 2048, 4096]

    def test_static_mesh_order_degrades(self, tmp_path):
        """On a static mesh the EOC falls off at the finest level."""
        rows = _study(tmp_path, 1e-4, False, self.LEVELS)
        for n, linf in STATIC_NU_1E4_MEASURED.items():
            assert rows[n]["E_linf_l2"] == pytest.approx(linf, rel=0.15), (n, rows[n])
        middle, finest = rows[2048]["eoc"][0], rows[4096]["eoc"][0]
        assert middle == pytest.approx(1.94, abs=0.2)
        assert finest == pytest.approx(1.53, abs=0.2)
        assert finest < middle - 0.2
        # published static errors sit above ours by less than a factor of four
        for n, (linf, _) in STATIC_NU_1E4.items():
            assert rows[n]["E_linf_l2"] < linf < 4.0 * rows[n]["E_linf_l2"]

    def test_moving_mesh_keeps_second_order(self, tmp_path):
        """The moving mesh recovers order two and beats the static mesh on the finest level."""
        moving = _study(tmp_path / "moving", 1e-4, True, self.LEVELS)
        static = _study(tmp_path / "static", 1e-4, False, [4096])
        _assert_close(moving, MOVING_NU_1E4)
        _assert_eocs(moving, MOVING_NU_1E4)
        linf_eoc, h1_eoc, _ = moving[4096]["eoc"]
        assert linf_eoc >= 1.8
        assert h1_eoc >= 1.8
        assert moving[4096]["E_linf_l2"] < static[4096]["E_linf_l2"]
        assert moving[4096]["E_l2_h1"] < static[4096]["E_l2_h1"]


# ---------------------------------------------------------------------------
# Concentrating bump and mass balance
# ---------------------------------------------------------------------------


class TestConcentratingBump:
    def test_moving_mesh_avoids_undershoot(self, tmp_path):
        """The moving mesh never undershoots further than the static mesh."""
        cfg = ExperimentConfig(preset="example2", n=256, output_dir=str(tmp_path))
        summary = compare_schemes(cfg)
        assert summary["min_value_gain"] > 0.0

    def test_default_ledger_tolerance(self, tmp_path):
        """Without kink splitting the ledger residual stays within the documented tolerance."""
        cfg = ExperimentConfig(preset="example2", n=256, output_dir=str(tmp_path))
        summary = compare_schemes(cfg)
        assert summary["moving"]["relative_ledger_residual"] <= 5e-3
        assert summary["static"]["relative_ledger_residual"] <= 1e-1

    def test_split_ledger_is_exact(self):
        """With kink splitting the concentrating bump keeps its mass to round-off."""
        cfg = ExperimentConfig(preset="example2", n=256, t_end=0.2, split_kinks=True)
        assert simulate(cfg).report.relative_ledger_residual <= 1e-9

    def test_nodes_gather_at_the_spike(self, tmp_path):
        """Mesh widths near the stagnation points shrink well below h_0."""
        cfg = ExperimentConfig(preset="example2", n=256, t_end=1.0, output_dir=str(tmp_path))
        stats = simulate(cfg).report.mesh_stats
        assert stats.smallest < 0.25 * (2.0 / 256)


class TestMassIdentities:
    def test_full_size_ledger(self):
        """Both ledgers hold to round-off on the full-size moving run."""
        result = check_mass_identities(256)
        assert result.passed, result.details
