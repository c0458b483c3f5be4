"""Tests for experiment configuration, the flat file format and overrides."""

from dataclasses import replace

import pytest

from lgmm.config import (
    ExperimentConfig,
    apply_overrides,
    dump_config,
    load_config,
    parse_config_text,
    parse_value,
)
from lgmm.errors import ConfigError
from lgmm.fem import ExtensionPolicy
from lgmm.problems import PRESETS


class TestResolve:
    """Tests for preset resolution."""

    def test_example1_defaults(self):
        """nu = 0.01, N = 128, dt = 4 h0, unclamped ends."""
        cfg = ExperimentConfig().resolve()
        assert cfg.nu == 0.01
        assert cfg.nu_m == 0.01
        assert cfg.n == 128
        assert cfg.dt is None
        assert cfg.dt_factor == 4.0
        assert cfg.time_step == pytest.approx(0.0625)
        assert cfg.t_end == 0.5
        assert cfg.clamp_boundary is False
        assert cfg.snapshot_times == (0.0, 0.5)
        assert cfg.trajectory_every == 1

    def test_example2_defaults(self):
        """nu = 1e-5, N = 256, dt = 1e-4, clamped ends, snapshots at 0, 1, 2."""
        cfg = ExperimentConfig(preset="example2").resolve()
        assert cfg.nu == 1e-5
        assert cfg.n == 256
        assert cfg.dt == 1e-4
        assert cfg.dt_factor is None
        assert cfg.clamp_boundary is True
        assert cfg.snapshot_times == (0.0, 1.0, 2.0)
        assert cfg.trajectory_every == 100

    def test_custom_defaults(self):
        """The Gaussian pulse runs with dt = h0."""
        cfg = ExperimentConfig(preset="custom").resolve()
        assert cfg.time_step == pytest.approx(2.0 / 128)
        assert cfg.velocity == 0.5

    def test_idempotent(self):
        """Resolving twice changes nothing."""
        for preset in PRESETS:
            cfg = ExperimentConfig(preset=preset).resolve()
            assert cfg.resolve() == cfg

    def test_short_run_drops_late_snapshots(self):
        """Preset snapshot times after T are dropped, T itself is added."""
        cfg = ExperimentConfig(preset="example2", t_end=1.5).resolve()
        assert cfg.snapshot_times == (0.0, 1.0, 1.5)

    def test_explicit_dt_wins(self):
        """A fixed dt replaces the preset's dt_factor."""
        cfg = ExperimentConfig(dt=0.01).resolve()
        assert cfg.dt_factor is None
        assert cfg.time_step == 0.01

    def test_at_level(self):
        """dt follows h0 when it is a factor and stays fixed otherwise."""
        assert ExperimentConfig().resolve().at_level(256).time_step == pytest.approx(0.03125)
        assert ExperimentConfig(preset="example2").resolve().at_level(512).time_step == 1e-4

    def test_derived_configs(self):
        """Mesh and scheme configs carry the resolved values."""
        cfg = ExperimentConfig(preset="example2", extension="clamp-end-value").resolve()
        mesh = cfg.mesh_config()
        scheme = cfg.scheme_config()
        assert mesh.clamp_boundary is True
        assert mesh.dt == scheme.dt == 1e-4
        assert mesh.nu_m == 1e-5
        assert scheme.extension is ExtensionPolicy.CLAMP
        assert scheme.order == 2
        assert mesh.sor_omega is None
        assert ExperimentConfig(sor_omega=1.5).mesh_config().sor_omega == 1.5


class TestValidate:
    """Tests for invalid configurations."""

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"preset": "example3"},
            {"order": 3},
            {"nu": -1.0},
            {"n": 0},
            {"dt": 0.1, "dt_factor": 1.0},
            {"sor_omega": 2.5},
            {"extension": "bogus"},
            {"quadrature_points": 17},
            {"t_end": -1.0},
            {"workers": 0},
        ],
    )
    def test_invalid(self, kwargs):
        """Each invalid value raises ConfigError."""
        with pytest.raises(ConfigError):
            ExperimentConfig(**kwargs).validate()

    def test_dict_round_trip(self):
        """to_dict and from_dict are inverse."""
        cfg = ExperimentConfig(preset="example2").resolve()
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_dict_key(self):
        """Unknown keys are rejected."""
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"viscosity": 1.0})


# ---------------------------------------------------------------------------
# Flat file format
# ---------------------------------------------------------------------------


class TestFlatFormat:
    """Tests for the key = value format."""

    @pytest.mark.parametrize("preset", PRESETS)
    def test_dump_parse_round_trip(self, preset):
        """parse(dump(cfg)) reproduces a resolved config exactly."""
        cfg = ExperimentConfig(preset=preset, split_kinks=True).resolve()
        assert parse_config_text(dump_config(cfg)) == cfg

    def test_full_precision(self):
        """Floats are written with repr precision."""
        cfg = replace(ExperimentConfig().resolve(), nu=0.1 + 0.2)
        assert parse_config_text(dump_config(cfg)).nu == 0.1 + 0.2

    def test_comments_and_blank_lines(self):
        """'#' starts a comment; blank lines are skipped."""
        cfg = parse_config_text("# header\n\nnu = 0.02  # inline\nmoving = no\n")
        assert cfg.nu == 0.02
        assert cfg.moving is False

    def test_auto_means_preset(self):
        """'auto' leaves a value to the preset."""
        assert parse_value("dt", "auto") is None
        assert parse_value("sor_omega", "auto") is None
        assert parse_config_text("n = auto\n").resolve().n == 128

    @pytest.mark.parametrize(
        "text,line",
        [
            ("preset = example1\nnu = 0.01\nn = abc\n", 3),
            ("nu = 0.01\nviscosity = 1\n", 2),
            ("nu 0.01\n", 1),
            ("\n\norder = 3\n", 3),
            ("nu = 0.1\nnu = 0.2\n", 2),
            ("dt = nan\n", 1),
            ("dt = 0.1\ndt_factor = 2\n", 2),
        ],
    )
    def test_errors_carry_line_numbers(self, text, line):
        """Malformed lines raise ConfigError naming the line."""
        with pytest.raises(ConfigError) as exc:
            parse_config_text(text)
        assert exc.value.line == line
        assert str(exc.value).startswith(f"line {line}:")

    def test_load_missing_file(self, tmp_dir):
        """An unreadable file is a config error."""
        with pytest.raises(ConfigError):
            load_config(tmp_dir / "missing.txt")

    def test_load_file(self, tmp_dir):
        """Files parse like text."""
        path = tmp_dir / "exp.txt"
        path.write_text("preset = custom\nvelocity = 0.25\n")
        cfg = load_config(path)
        assert cfg.preset == "custom"
        assert cfg.velocity == 0.25


class TestOverrides:
    """Tests for --set style overrides."""

    def test_apply(self):
        """key=value strings replace fields."""
        cfg = apply_overrides(ExperimentConfig(), ["nu=0.5", "moving=false", "snapshot_times=0,0.25"])
        assert cfg.nu == 0.5
        assert cfg.moving is False
        assert cfg.snapshot_times == (0.0, 0.25)

    @pytest.mark.parametrize("item", ["nu", "viscosity=1", "order=x", "dt=-1"])
    def test_invalid(self, item):
        """Malformed, unknown or invalid overrides raise ConfigError."""
        with pytest.raises(ConfigError):
            apply_overrides(ExperimentConfig(), [item])
