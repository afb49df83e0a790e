"""Run configuration loading and validation."""

import json
import os

import pytest

from innoscape.config import DEFAULT_MASTER_SEED, load_config
from innoscape.errors import ConfigError, LagMismatchError


def fixture_doc():
    path = os.path.join(os.path.dirname(__file__), "data", "config.json")
    return json.loads(open(path).read()), os.path.dirname(path)


def write_variant(tmp_path, mutate):
    doc, data_dir = fixture_doc()
    mutate(doc)
    # point relative sources back at the fixture corpus
    for k, v in doc.get("sources", {}).items():
        doc["sources"][k] = os.path.join(data_dir, v)
    for k, v in doc.get("poi_sources", {}).items():
        doc["poi_sources"][k] = os.path.join(data_dir, v)
    if "polygons" in doc:
        doc["polygons"] = os.path.join(data_dir, doc["polygons"])
    p = tmp_path / "config.json"
    p.write_text(json.dumps(doc))
    return str(p)


class TestLoad:
    def test_fixture_config(self, config_path):
        cfg = load_config(config_path)
        assert cfg.states == ["MA", "NY"]
        assert (cfg.base_year, cfg.outcome_year) == (2012, 2016)
        assert cfg.master_seed == 20160101
        assert cfg.forest.n_trees == 1000
        assert cfg.map_columns == ["patents_per_1000", "sfr"]

    def test_default_seed_constant(self):
        assert DEFAULT_MASTER_SEED == 20160101

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_config("/nonexistent/config.json")

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(str(p))

    def test_lag_mismatch_rejected(self, tmp_path):
        path = write_variant(tmp_path, lambda d: d.update(outcome_year=2015))
        with pytest.raises(LagMismatchError):
            load_config(path)

    def test_lag_override_accepted(self, tmp_path):
        path = write_variant(
            tmp_path,
            lambda d: d.update(outcome_year=2015, allow_custom_lag=True),
        )
        cfg = load_config(path)
        assert cfg.outcome_year == 2015 and cfg.allow_custom_lag

    def test_empty_states_rejected(self, tmp_path):
        path = write_variant(tmp_path, lambda d: d.update(states=[]))
        with pytest.raises(ConfigError):
            load_config(path)

    def test_bad_state_code_rejected(self, tmp_path):
        path = write_variant(tmp_path, lambda d: d.update(states=["MAS"]))
        with pytest.raises(ConfigError):
            load_config(path)

    def test_duplicate_states_rejected(self, tmp_path):
        path = write_variant(tmp_path, lambda d: d.update(states=["MA", "MA"]))
        with pytest.raises(ConfigError):
            load_config(path)

    def test_missing_source_rejected(self, tmp_path):
        def mutate(d):
            del d["sources"]["census"]

        with pytest.raises(ConfigError):
            load_config(write_variant(tmp_path, mutate))

    def test_unknown_poi_kind_rejected(self, tmp_path):
        def mutate(d):
            d["poi_sources"]["statue"] = "poi_school.csv"

        with pytest.raises(ConfigError):
            load_config(write_variant(tmp_path, mutate))

    def test_unknown_h1b_status_rejected(self, tmp_path):
        path = write_variant(
            tmp_path, lambda d: d.update(h1b_statuses=["certified", "maybe"])
        )
        with pytest.raises(ConfigError):
            load_config(path)

    def test_missing_input_file_rejected(self, tmp_path):
        def mutate(d):
            d["sources"]["census"] = "missing_census.csv"

        path = write_variant(tmp_path, mutate)
        with pytest.raises(ConfigError):
            load_config(path)

    def test_bad_forest_params_rejected(self, tmp_path):
        path = write_variant(
            tmp_path, lambda d: d.update(forest={"n_trees": 0})
        )
        with pytest.raises(ConfigError):
            load_config(path)


class TestResolve:
    def test_relative_paths_resolve_against_config_dir(self, config_path):
        cfg = load_config(config_path)
        paths = cfg.input_paths()
        assert set(paths) == {
            "census", "patents", "sfr", "rnd", "h1b", "bizreg",
            "poi_bus_stop", "poi_cafe", "poi_innovation_space", "poi_park",
            "poi_school", "poi_square", "poi_university", "polygons",
        }
        for p in paths.values():
            assert os.path.isabs(p) and os.path.exists(p)

    def test_echo_is_machine_independent(self, config_path):
        cfg = load_config(config_path)
        echo = cfg.echo()
        assert echo["sources"]["census"] == "census.csv"
        assert "config_dir" not in echo
        assert "out" not in echo
        blob = json.dumps(echo)
        assert "/root" not in blob

    def test_echo_excludes_runtime_knobs(self, config_path):
        echo = load_config(config_path).echo()
        assert "threads" not in json.dumps(echo)
