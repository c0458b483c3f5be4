"""Artifact directory: atomic CSV and JSON writes for runs and studies."""

import csv
import json
import logging
import os
import re
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

from .diagnostics import TABLE_COLUMNS, ConvergenceRow, MassLedgerEntry, MeshStats
from .errors import ConfigError
from .fem import PiecewiseLinearFunction, sample
from .mesh import MeshLevel

logger = logging.getLogger(__name__)

DEFAULT_DIR = Path("runs")
RUN_NAME_PATTERN = re.compile(r"^[a-zA-Z0-9_.-]{1,128}$")

SNAPSHOT_COLUMNS = ("time", "x", "value")
TRAJECTORY_COLUMNS = ("step", "time", "node_index", "position")
LEDGER_COLUMNS = ("step", "time", "mass", "ledger_rhs", "residual")
MESH_STATS_COLUMNS = ("step", "time", "min_h", "max_h")


def _validate_run_name(name: str) -> str:
    """Validate a run name to prevent path traversal."""
    if not RUN_NAME_PATTERN.fullmatch(name) or name in (".", ".."):
        raise ConfigError(
            f"Invalid run name '{name}'. "
            "Use only letters, numbers, dots, hyphens and underscores (max 128 chars)."
        )
    return name


def _fmt(value) -> str:
    # repr keeps full precision and makes repeated runs byte-identical
    return repr(float(value))


class Storage:
    """Writes the artifacts of runs below ``base_dir/<run name>/``."""

    def __init__(self, base_dir: Optional[Path] = None):
        self.base_dir = Path(base_dir) if base_dir is not None else DEFAULT_DIR
        self.base_dir.mkdir(parents=True, exist_ok=True)

    def run_dir(self, name: str) -> Path:
        path = self.base_dir / _validate_run_name(name)
        path.mkdir(parents=True, exist_ok=True)
        return path

    def _atomic_write(self, path: Path, write: Callable) -> Path:
        """Write through a temp file, fsync, then rename over ``path``."""
        tmp_path = path.with_suffix(path.suffix + ".tmp")
        try:
            with open(tmp_path, "w", encoding="utf-8", newline="") as f:
                write(f)
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp_path, path)
        except Exception:
            if tmp_path.exists():
                try:
                    tmp_path.unlink()
                except OSError:
                    pass
            raise
        logger.debug("wrote %s", path)
        return path

    def write_json(self, path: Path, data: dict) -> Path:
        return self._atomic_write(path, lambda f: json.dump(data, f, indent=2))

    def write_text(self, path: Path, text: str) -> Path:
        return self._atomic_write(path, lambda f: f.write(text))

    def write_csv(self, path: Path, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
        def write(f):
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            writer.writerows(rows)

        return self._atomic_write(path, write)

    # Run artifacts

    def save_snapshots(
        self,
        run_dir: Path,
        snapshots: dict[float, PiecewiseLinearFunction],
        per_element: int = 0,
        prefix: str = "snapshot",
    ) -> list[Path]:
        """One CSV per requested time: node positions (plus interior samples) and values."""
        paths = []
        for i, t in enumerate(sorted(snapshots)):
            xs, values = sample(snapshots[t], per_element)
            rows = ((_fmt(t), _fmt(x), _fmt(v)) for x, v in zip(xs, values))
            path = run_dir / f"{prefix}_{i:02d}_t{t:g}.csv"
            paths.append(self.write_csv(path, SNAPSHOT_COLUMNS, rows))
        return paths

    def save_mesh_trajectory(self, run_dir: Path, levels: Sequence[MeshLevel], dt: float) -> Path:
        def rows():
            for level in levels:
                step = int(round(level.time / dt))
                for i, x in enumerate(level.points):
                    yield (step, _fmt(level.time), i, _fmt(x))

        return self.write_csv(run_dir / "mesh_trajectory.csv", TRAJECTORY_COLUMNS, rows())

    def save_ledger(self, run_dir: Path, ledger: Sequence[MassLedgerEntry]) -> Path:
        rows = (
            (e.step, _fmt(e.time), _fmt(e.mass), _fmt(e.rhs), _fmt(e.residual)) for e in ledger
        )
        return self.write_csv(run_dir / "mass_ledger.csv", LEDGER_COLUMNS, rows)

    def save_mesh_stats(self, run_dir: Path, stats: MeshStats) -> Path:
        rows = (
            (n, _fmt(t), _fmt(lo), _fmt(hi))
            for n, (t, lo, hi) in enumerate(zip(stats.times, stats.min_h, stats.max_h))
        )
        return self.write_csv(run_dir / "mesh_stats.csv", MESH_STATS_COLUMNS, rows)

    def save_convergence(self, run_dir: Path, rows: Sequence[ConvergenceRow]) -> Path:
        table = ([row.to_csv_row()[c] for c in TABLE_COLUMNS] for row in rows)
        return self.write_csv(run_dir / "convergence.csv", TABLE_COLUMNS, table)
