"""Tests for config parsing, validation, model construction and artifact writing."""

import json

import numpy as np
import pytest

from delay_average.errors import ConfigError
from delay_average.io import (
    build_model,
    config_hash,
    dump_json,
    load_config,
    load_schema,
    parse_dotted,
    read_config,
    section,
    validate_config,
    write_csv,
    write_json,
)
from delay_average.model import NoiseKind
from tests.builders import ConfigBuilder, FunctionalBuilder, build_scalar_cubic_config

# ============ DOTTED CONFIGS ============


class TestParseDotted:
    """Tests for dotted key = value text."""

    def test_nested_keys(self):
        """Test that dots create nested sections and values parse as JSON literals."""
        config = parse_dotted("seed = 3\nmodel.preset = scalar-cubic\nmodel.params.sigma = 0.5\n")
        assert config == {"seed": 3, "model": {"preset": "scalar-cubic", "params": {"sigma": 0.5}}}

    def test_comments_and_blank_lines(self):
        """Test that comments and blank lines are skipped."""
        config = parse_dotted("# header\n\nseed = 1  # trailing\n")
        assert config == {"seed": 1}

    def test_lists(self):
        """Test JSON list literals and index keys."""
        config = parse_dotted("surface.g = [1, 2]\nterm.0.lag = -1\nterm.1.lag = 0\n")
        assert config["surface"]["g"] == [1, 2]
        assert config["term"] == [{"lag": -1}, {"lag": 0}]

    def test_booleans(self):
        """Test that true and false become booleans."""
        assert parse_dotted("simulate.record_path = true")["simulate"]["record_path"] is True

    def test_missing_equals(self):
        """Test that a line without '=' names its line number."""
        with pytest.raises(ConfigError, match="line 2"):
            parse_dotted("seed = 1\nmodel.preset\n")

    def test_duplicate_key(self):
        """Test that repeated keys are rejected."""
        with pytest.raises(ConfigError, match="duplicate"):
            parse_dotted("seed = 1\nseed = 2\n")

    def test_scalar_extended(self):
        """Test that a scalar cannot gain sub-keys."""
        with pytest.raises(ConfigError, match="scalar"):
            parse_dotted("model = 1\nmodel.preset = x\n")


class TestReadConfig:
    """Tests for reading and validating config files."""

    def test_json_and_dotted_agree(self, tmp_path):
        """Test that both spellings of a config read the same."""
        builder = ConfigBuilder().preset("scalar-markov", g=2.0).with_section("surface", r1=[0.5, 1.0])
        from_json = read_config(builder.write(tmp_path / "a.json"))
        from_text = read_config(builder.write_dotted(tmp_path / "a.cfg"))
        assert from_json == from_text

    def test_missing_file(self, tmp_path):
        """Test that a missing file raises ConfigError."""
        with pytest.raises(ConfigError, match="not found"):
            read_config(tmp_path / "absent.cfg")

    def test_invalid_json(self, tmp_path):
        """Test that malformed JSON raises ConfigError."""
        path = tmp_path / "broken.json"
        path.write_text("{ not json")
        with pytest.raises(ConfigError, match="Invalid JSON"):
            read_config(path)

    def test_load_valid(self, config_file):
        """Test that a valid config loads."""
        assert load_config(config_file)["model"]["preset"] == "scalar-cubic"

    def test_schema_violation_names_path(self):
        """Test that validation errors carry the dotted path."""
        config = ConfigBuilder().with_section("simulate", paths=0).build()
        with pytest.raises(ConfigError, match=r"simulate\.paths"):
            validate_config(config)

    def test_unknown_preset_rejected(self):
        """Test that the schema only knows catalog presets."""
        with pytest.raises(ConfigError):
            validate_config(ConfigBuilder().preset("pendulum").build())

    def test_markov_noise_needs_g(self):
        """Test the conditional requirement of the two-state noise."""
        with pytest.raises(ConfigError):
            validate_config(ConfigBuilder().with_noise("two-state-markov", sigma0=1.0).build())

    def test_schema_loads(self):
        """Test that the bundled schema requires model and seed."""
        assert set(load_schema()["required"]) == {"model", "seed"}


# ============ MODEL CONSTRUCTION ============


class TestBuildModel:
    """Tests for building models from configs."""

    def test_preset_with_overrides(self):
        """Test that params, epsilon and noise override the preset."""
        config = ConfigBuilder().preset("scalar-cubic", sigma=2.0).with_epsilon(0.1).with_noise(
            "exp-sum", components=[[1.0, 3.0]]
        ).build()
        model = build_model(config)
        assert model.epsilon == 0.1
        assert model.noise.kind is NoiseKind.EXP_SUM
        assert model.F.coefficients[0, 0] == 2.0

    def test_explicit_model(self):
        """Test a model spelled out term by term."""
        g = FunctionalBuilder().at_lags([-1.0]).term([3], [-1.0]).to_config()
        config = (
            ConfigBuilder()
            .explicit(1, [(-1.0, [-np.pi / 2])], F={"constant": [1.0]}, G=g, name="hand-written")
            .with_noise("two-state-markov", g=2.0, sigma0=0.5)
            .build()
        )
        validate_config(config)
        model = build_model(config)
        assert model.name == "hand-written"
        assert model.epsilon == 0.025
        assert model.G.degree == 3
        assert model.noise.integral() == pytest.approx(0.125)

    def test_explicit_matrix_size(self):
        """Test that flat matrices must have n^2 entries."""
        config = ConfigBuilder().explicit(2, [(-1.0, [1.0, 0.0, 0.0])]).build()
        with pytest.raises(ConfigError, match="entries"):
            build_model(config)

    def test_explicit_ode_horizon(self):
        """Test that an explicit lag-free model declares max_delay."""
        config = ConfigBuilder().explicit(1, [(0.0, [-1.0])]).build()
        config["model"]["L0"]["max_delay"] = 2.0
        assert build_model(config).max_delay == 2.0


# ============ ARTIFACTS ============


class TestArtifacts:
    """Tests for stamped CSV and JSON output."""

    def test_hash_is_canonical(self):
        """Test that key order does not change the hash."""
        assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
        assert config_hash({"a": 1}) != config_hash({"a": 2})

    def test_section_merges_defaults(self):
        """Test that config values win over defaults."""
        config = build_scalar_cubic_config()
        config["simulate"] = {"paths": 10}
        assert section(config, "simulate", {"paths": 1, "T": 2.0}) == {"paths": 10, "T": 2.0}
        assert section(config, "absent") == {}

    def test_csv_stamp_and_floats(self, tmp_path):
        """Test the provenance line and round-trip float formatting."""
        config = build_scalar_cubic_config()
        path = tmp_path / "out" / "table.csv"
        write_csv(path, ["t", "x1"], np.array([[0.0, 0.1], [1.0, 1 / 3]]), config=config, seed=5)
        lines = path.read_text().splitlines()
        assert lines[0] == f"# config_sha256={config_hash(config)} seed=5"
        assert lines[1] == "t,x1"
        assert lines[3] == f"1.0,{1 / 3!r}"

    def test_json_stamp_and_numpy(self, tmp_path):
        """Test the leading provenance key and numpy/complex conversion."""
        config = build_scalar_cubic_config()
        text = dump_json({"v": np.arange(2), "x": np.float64(0.5), "z": 1 + 2j}, config=config, seed=1)
        data = json.loads(text)
        assert next(iter(data)) == "#"
        assert data["#"]["seed"] == 1
        assert data["v"] == [0, 1]
        assert data["z"] == {"re": 1.0, "im": 2.0}
        write_json(tmp_path / "a.json", {"k": 1}, config=config, seed=1)
        assert json.loads((tmp_path / "a.json").read_text())["k"] == 1

    def test_json_rejects_unknown_types(self):
        """Test that unserializable values raise TypeError."""
        with pytest.raises(TypeError):
            dump_json({"s": {1, 2}}, config={}, seed=None)
