from pydantic import ValidationError
import pytest

from rbm_stationary.exceptions import ConfigError
from rbm_stationary.models.config import RunConfig, SkorokhodConfig
from .utils_test import to_asset_path, write_config


def test_defaults():
    config = RunConfig.parse_obj({"spec": {"name": "tandem-2d"}})
    assert config.schedule.exponent == 0.5
    assert config.noise.law == "standard_normal"
    assert config.sinks.histogram.bins == 2000
    assert config.sinks.histogram.x_max == 20.0
    assert config.sinks.reservoir_capacity == 2 ** 20
    assert config.threads == 1


def test_spec_needs_name_or_inline_data():
    with pytest.raises(ValidationError):
        RunConfig.parse_obj({"spec": {"drift": [-1.0, 0.0]}})
    with pytest.raises(ValidationError):
        RunConfig.parse_obj({"spec": {"name": "tandem-2d", "drift": [-1.0, 0.0]}})


def test_unknown_keys_are_rejected():
    with pytest.raises(ValidationError):
        RunConfig.parse_obj({"spec": {"name": "tandem-2d"}, "n_step": 10})


def test_explicit_schedule_needs_steps():
    with pytest.raises(ValidationError):
        RunConfig.parse_obj({"spec": {"name": "tandem-2d"}, "schedule": {"kind": "explicit"}})
    with pytest.raises(ValidationError):
        RunConfig.parse_obj({"spec": {"name": "tandem-2d"},
                             "schedule": {"kind": "explicit", "steps": [0.5, -0.1]}})


def test_alphas_range():
    with pytest.raises(ValidationError):
        RunConfig.parse_obj({"spec": {"name": "tandem-2d"}, "alphas": [0.5, 1.5]})


def test_config_hash():
    base = {"spec": {"name": "tandem-2d"}, "seed": 3}
    a = RunConfig.parse_obj(base)
    b = RunConfig.parse_obj({**base, "threads": 4, "output_dir": "/tmp/elsewhere"})
    c = RunConfig.parse_obj({**base, "seed": 4})
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()


def test_from_yaml_with_overrides(tmp_path):
    path = write_config(tmp_path, {"spec": {"name": "product-3d"}, "n_steps": 10, "seed": 1})
    config = RunConfig.from_yaml(path, {"n_steps": 25, "seed": None})
    assert config.n_steps == 25
    assert config.seed == 1


def test_from_yaml_asset():
    config = RunConfig.from_yaml(to_asset_path("tandem_smoke.yaml"))
    assert config.sinks.boundary
    assert [section.kind for section in config.sinks.test_functions] == ["coordinate", "half_square_norm"]


def test_from_yaml_errors():
    with pytest.raises(ConfigError):
        RunConfig.from_yaml(to_asset_path("malformed.yaml"))
    with pytest.raises(ConfigError):
        RunConfig.from_yaml(to_asset_path("does_not_exist.yaml"))
    with pytest.raises(ValidationError):
        RunConfig.from_yaml(to_asset_path("unknown_key.yaml"))


def test_events_for():
    assert SkorokhodConfig().events_for(8) == 128
    assert SkorokhodConfig(max_events=5).events_for(8) == 5
