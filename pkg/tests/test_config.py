import json
from pathlib import Path

import numpy as np
import pytest

from mmslam.config import ConfigError, default_scenario, load_config, parse_config
from mmslam.models import LandmarkType


SCENARIO_FILE = Path(__file__).parent.parent / "config" / "scenario.json"


def test_default_scenario_room():
    config = default_scenario()
    assert config.bs_position == [0.0, 0.0, 10.0]
    assert [s.surface_type for s in config.surfaces] == [
        LandmarkType.SM, LandmarkType.MR, LandmarkType.MR, LandmarkType.VR
    ]
    assert config.steps == 40
    assert config.dt == 0.5
    assert config.likelihood_mode == "all_paths"


def test_default_scenario_states():
    config = default_scenario()
    truth = config.truth_state()
    assert truth.speed == 22.22
    assert truth.turn_rate == pytest.approx(np.pi / 10)
    assert truth.clock_bias == 300.0
    prior = config.prior_mean()
    np.testing.assert_allclose(prior.position, [71.6285, 0.9, 0.0])
    assert prior.heading == pytest.approx(np.pi / 2 + 0.09)
    assert prior.clock_bias == pytest.approx(300.9)


def test_map_params_follow_config():
    config = parse_config({"p_S": 0.95, "birth_weight": 0.01, "scan": {"p_D": 0.7}})
    params = config.map_params()
    assert params.survival_prob == 0.95
    assert params.birth_weight == 0.01
    assert params.detection_prob == 0.7
    assert params.pruning.max_hypotheses == 10


def test_aliases_and_field_names_are_equivalent():
    q = np.diag([0.01] * 6).tolist()
    by_alias = parse_config({"Q": q, "p_S": 0.9, "scan": {"p_D": 0.8}})
    by_name = parse_config({"process_noise": q, "survival_prob": 0.9, "scan": {"detection_prob": 0.8}})
    assert by_alias.echo() == by_name.echo()


def test_echo_round_trips():
    config = parse_config({"seed": 7, "particle_count": 20})
    assert parse_config(config.echo()).echo() == config.echo()


def test_steps_must_be_positive():
    with pytest.raises(ConfigError, match="steps"):
        parse_config({"steps": 0})


def test_unknown_field_rejected():
    with pytest.raises(ConfigError, match="particles"):
        parse_config({"particles": 10})


def test_error_lists_field_path():
    surfaces = [s.model_dump(mode="json") for s in default_scenario().surfaces]
    surfaces[0]["unit_normal"] = [1.0, 1.0, 0.0]
    with pytest.raises(ConfigError, match=r"surfaces\.0\.unit_normal"):
        parse_config({"surfaces": surfaces})


def test_error_lists_every_problem():
    with pytest.raises(ConfigError) as excinfo:
        parse_config({"steps": 0, "dt": -1.0})
    assert "steps" in str(excinfo.value)
    assert "dt" in str(excinfo.value)


def test_surface_cannot_be_bs():
    surfaces = [{"point_on_plane": [1, 0, 0], "unit_normal": [1, 0, 0], "surface_type": "BS"}]
    with pytest.raises(ConfigError, match="surface_type"):
        parse_config({"surfaces": surfaces})


def test_process_noise_shape():
    with pytest.raises(ConfigError, match="process_noise|Q"):
        parse_config({"Q": np.eye(7).tolist()})


def test_unknown_likelihood_mode():
    with pytest.raises(ConfigError, match="likelihood_mode"):
        parse_config({"likelihood_mode": "diffuse_only"})


def test_scenario_file_matches_defaults():
    loaded = load_config(SCENARIO_FILE).echo()
    defaults = default_scenario().echo()
    np.testing.assert_allclose(loaded.pop("process_noise"), defaults.pop("process_noise"))
    assert loaded == defaults


def test_load_config_malformed_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{\"steps\": 3,", encoding="utf-8")
    with pytest.raises(ConfigError, match="Malformed JSON"):
        load_config(path)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="Cannot read"):
        load_config(tmp_path / "missing.json")


def test_load_config_requires_object(tmp_path):
    path = tmp_path / "list.json"
    path.write_text(json.dumps([1, 2, 3]), encoding="utf-8")
    with pytest.raises(ConfigError, match="JSON object"):
        load_config(path)
