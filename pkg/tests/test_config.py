"""Tests for run-configuration loading, key mapping, and validation."""

import json

import pytest

from ssodlab.config import ENV_VAR, RunConfig, from_dict, load_config, resolve_config
from ssodlab.errors import ConfigError


class TestDefaults:
    def test_empty_dict_gives_defaults(self):
        config = from_dict({})
        assert config == RunConfig()
        assert config.pipeline.percentile == 35.0
        assert config.scene.object_count == 24
        assert config.anchor_strides == (8, 16, 32, 64, 128)
        assert config.scene_count == 8

    def test_default_anchor_grid_size(self):
        assert len(RunConfig().anchors()) == 65472


class TestKeyMapping:
    def test_short_pipeline_keys(self):
        config = from_dict({"pipeline": {
            "alpha": 2.0, "p": 40.0, "k": 3, "floor": 0.4,
            "bg_thr": 0.8, "s_max": 0.4, "ema_momentum": 0.99,
            "labeled_per_batch": 2, "unlabeled_per_batch": 8,
        }})
        assert config.pipeline.alpha == 2.0
        assert config.pipeline.percentile == 40.0
        assert config.pipeline.top_k == 3
        assert config.pipeline.floor == 0.4
        assert config.pipeline.bg_threshold == 0.8
        assert config.pipeline.hard_score_max == 0.4
        assert config.pipeline.ema_momentum == 0.99
        assert config.pipeline.labeled_per_batch == 2
        assert config.pipeline.unlabeled_per_batch == 8

    def test_scene_and_teacher_sections(self):
        config = from_dict({
            "scene": {"image_size": [512, 256], "object_count": 10,
                      "small_side": [10.0, 20.0]},
            "teacher": {"miss_rate_small": 0.5, "small_score": [3.0, 2.0]},
        })
        assert config.scene.image_size == (512, 256)
        assert config.scene.small_side == (10.0, 20.0)
        assert config.teacher.miss_rate_small == 0.5
        assert config.teacher.small_score == (3.0, 2.0)

    def test_anchor_section(self):
        config = from_dict({"anchors": {"strides": [16, 32], "scale": 4.0,
                                        "ratios": [1.0]}})
        assert config.anchor_strides == (16, 32)
        assert config.anchor_scale == 4.0
        assert config.anchor_ratios == (1.0,)

    def test_round_trip(self):
        original = from_dict({
            "pipeline": {"p": 45.0, "k": 1},
            "scene": {"object_count": 6},
            "anchors": {"strides": [16], "scale": 2.0, "ratios": [0.5, 2.0]},
            "scene_count": 3,
        })
        assert from_dict(original.to_dict()) == original

    def test_to_dict_is_json_safe(self):
        payload = json.dumps(RunConfig().to_dict())
        assert "percentile" not in payload  # file uses the short key "p"
        assert '"p": 35.0' in payload


class TestRejection:
    @pytest.mark.parametrize("data,fragment", [
        ({"bogus": 1}, "bogus"),
        ({"pipeline": {"percentile": 35}}, "pipeline.percentile"),
        ({"scene": {"width": 512}}, "scene.width"),
        ({"teacher": {"strength": 1}}, "teacher.strength"),
        ({"anchors": {"stride": 8}}, "anchors.stride"),
    ])
    def test_unknown_keys(self, data, fragment):
        with pytest.raises(ConfigError, match=fragment.replace(".", r"\.")):
            from_dict(data)

    @pytest.mark.parametrize("data,fragment", [
        ({"pipeline": {"p": 150.0}}, "pipeline"),
        ({"scene": {"object_count": -2}}, "scene"),
        ({"teacher": {"loss_mean": 0.0}}, "teacher"),
    ])
    def test_invalid_values_prefixed(self, data, fragment):
        with pytest.raises(ConfigError, match=fragment):
            from_dict(data)

    def test_bad_pairs(self):
        with pytest.raises(ConfigError, match="image_size"):
            from_dict({"scene": {"image_size": [512]}})
        with pytest.raises(ConfigError, match="small_side"):
            from_dict({"scene": {"small_side": "wide"}})

    def test_bad_anchor_values(self):
        with pytest.raises(ConfigError, match="strides"):
            from_dict({"anchors": {"strides": []}})
        with pytest.raises(ConfigError, match="scale"):
            from_dict({"anchors": {"scale": "big"}})
        with pytest.raises(ConfigError, match="anchors"):
            from_dict({"anchors": {"scale": -1.0}})

    def test_bad_scene_count(self):
        with pytest.raises(ConfigError, match="scene_count"):
            from_dict({"scene_count": -1})
        with pytest.raises(ConfigError, match="scene_count"):
            from_dict({"scene_count": True})

    def test_section_must_be_object(self):
        with pytest.raises(ConfigError, match="pipeline"):
            from_dict({"pipeline": [1, 2]})

    def test_top_level_must_be_object(self):
        with pytest.raises(ConfigError):
            from_dict([1, 2])


class TestFiles:
    def test_load_valid_file(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"scene_count": 2}))
        assert load_config(path).scene_count == 2

    def test_invalid_json_mentions_location(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="line"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_config(tmp_path / "absent.json")

    def test_resolve_defaults(self, monkeypatch):
        monkeypatch.delenv(ENV_VAR, raising=False)
        assert resolve_config(None) == RunConfig()

    def test_resolve_env_fallback(self, tmp_path, monkeypatch):
        path = tmp_path / "env.json"
        path.write_text(json.dumps({"scene_count": 5}))
        monkeypatch.setenv(ENV_VAR, str(path))
        assert resolve_config(None).scene_count == 5

    def test_explicit_path_beats_env(self, tmp_path, monkeypatch):
        env_path = tmp_path / "env.json"
        env_path.write_text(json.dumps({"scene_count": 5}))
        cli_path = tmp_path / "cli.json"
        cli_path.write_text(json.dumps({"scene_count": 9}))
        monkeypatch.setenv(ENV_VAR, str(env_path))
        assert resolve_config(str(cli_path)).scene_count == 9
