"""Tests for the artifact writer."""

import json

import numpy as np
import pytest

from lgmm.diagnostics import ConvergenceRow, ErrorNorms, MassLedgerEntry, MeshStats, TABLE_COLUMNS
from lgmm.errors import ConfigError
from lgmm.fem import interpolate
from lgmm.mesh import MeshLevel, initial_uniform_mesh
from lgmm.storage import Storage


@pytest.fixture
def temp_storage(tmp_dir):
    """Storage rooted in a temporary directory."""
    return Storage(tmp_dir / "runs")


def _lines(path):
    return path.read_text().splitlines()


class TestStorage:
    """Tests for Storage."""

    def test_init_creates_base_dir(self, temp_storage):
        """The base directory exists after construction."""
        assert temp_storage.base_dir.exists()

    def test_run_dir(self, temp_storage):
        """Run directories are created below the base directory."""
        path = temp_storage.run_dir("example1-lgmm-o2-N128")
        assert path.is_dir()
        assert path.parent == temp_storage.base_dir

    @pytest.mark.parametrize("name", ["../escape", "a/b", "", ".", "..", "x" * 129])
    def test_invalid_run_name(self, temp_storage, name):
        """Names that could escape the base directory are a config error."""
        with pytest.raises(ConfigError):
            temp_storage.run_dir(name)

    def test_write_json(self, temp_storage):
        """JSON round-trips and leaves no temp file behind."""
        run = temp_storage.run_dir("r")
        path = temp_storage.write_json(run / "report.json", {"a": 1.5, "b": [1, 2]})
        assert json.loads(path.read_text()) == {"a": 1.5, "b": [1, 2]}
        assert list(run.glob("*.tmp")) == []

    def test_failed_write_keeps_old_file(self, temp_storage):
        """A failing writer leaves the previous content and no temp file."""
        run = temp_storage.run_dir("r")
        path = temp_storage.write_text(run / "config.txt", "old\n")

        def boom(f):
            f.write("partial")
            raise RuntimeError("disk full")

        with pytest.raises(RuntimeError):
            temp_storage._atomic_write(path, boom)
        assert path.read_text() == "old\n"
        assert list(run.glob("*.tmp")) == []


class TestArtifacts:
    """Tests for the CSV artifacts."""

    def test_snapshots(self, temp_storage):
        """One file per time, nodes plus interior samples."""
        run = temp_storage.run_dir("r")
        mesh = MeshLevel([0.0, 1.0, 2.0])
        snaps = {
            0.0: interpolate(lambda x: x, mesh),
            0.5: interpolate(lambda x: 2.0 * x, mesh.at_time(0.5)),
        }
        paths = temp_storage.save_snapshots(run, snaps, per_element=3)
        assert [p.name for p in paths] == ["snapshot_00_t0.csv", "snapshot_01_t0.5.csv"]
        lines = _lines(paths[1])
        assert lines[0] == "time,x,value"
        assert len(lines) == 1 + 9
        assert lines[2] == "0.5,0.25,0.5"

    def test_mesh_trajectory(self, temp_storage):
        """One row per node and stored level, with the step index."""
        run = temp_storage.run_dir("r")
        levels = [initial_uniform_mesh(0.0, 1.0, 2), MeshLevel([0.0, 0.6, 1.0], 0.2)]
        path = temp_storage.save_mesh_trajectory(run, levels, 0.1)
        lines = _lines(path)
        assert lines[0] == "step,time,node_index,position"
        assert len(lines) == 1 + 6
        assert lines[5] == "2,0.2,1,0.6"

    def test_ledger(self, temp_storage):
        """Ledger rows carry mass, right side and residual."""
        run = temp_storage.run_dir("r")
        entries = [MassLedgerEntry(0, 0.0, 1.0, 1.0, 1.0), MassLedgerEntry(1, 0.1, 1.5, 1.5, 1.25)]
        lines = _lines(temp_storage.save_ledger(run, entries))
        assert lines[0] == "step,time,mass,ledger_rhs,residual"
        assert lines[2] == "1,0.1,1.5,1.25,0.25"

    def test_mesh_stats(self, temp_storage):
        """min_h and max_h per level."""
        run = temp_storage.run_dir("r")
        stats = MeshStats(np.array([0.0, 0.1]), np.array([0.5, 0.4]), np.array([0.5, 0.6]), 0.5)
        lines = _lines(temp_storage.save_mesh_stats(run, stats))
        assert lines == ["step,time,min_h,max_h", "0,0.0,0.5,0.5", "1,0.1,0.4,0.6"]

    def test_convergence(self, temp_storage):
        """Columns in table order, empty EOCs on the coarsest level."""
        run = temp_storage.run_dir("r")
        rows = [
            ConvergenceRow(128, 0.0625, ErrorNorms(4e-3, 8e-3, 1e-5)),
            ConvergenceRow(256, 0.03125, ErrorNorms(1e-3, 4e-3, 1e-5), (2.0, 1.0, 0.0)),
        ]
        lines = _lines(temp_storage.save_convergence(run, rows))
        assert lines[0] == ",".join(TABLE_COLUMNS)
        assert lines[1] == "128,0.0625,0.004,,0.008,,1e-05"
        assert lines[2] == "256,0.03125,0.001,2.00,0.004,1.00,1e-05"

    def test_deterministic(self, temp_storage):
        """Writing the same data twice gives identical bytes."""
        run = temp_storage.run_dir("r")
        fn = interpolate(lambda x: np.sin(x), initial_uniform_mesh(-1.0, 1.0, 7))
        first = temp_storage.save_snapshots(run, {0.0: fn}, 2, prefix="a")[0].read_bytes()
        second = temp_storage.save_snapshots(run, {0.0: fn}, 2, prefix="b")[0].read_bytes()
        assert first == second
