import json

import pytest

from berrypick.config import (
    DEFAULTS,
    build_cut,
    build_localization,
    build_rig,
    build_robot,
    build_scenario,
    build_scene,
    config_hash,
    load_config,
    resolve_config,
)
from berrypick.errors import ConfigError


class TestResolve:
    def test_empty_config_uses_defaults(self):
        cfg = resolve_config({})
        assert cfg["localization"]["tol"] == 0.02
        assert cfg["robot"]["velocity_scale"] == 0.5
        assert cfg["scene"]["n_straw"] == 9

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match="scene.fruitiness"):
            resolve_config({"scene": {"fruitiness": 1}})

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="lasers"):
            resolve_config({"lasers": {}})

    def test_negative_s_min_named(self):
        with pytest.raises(ConfigError, match="localization.s_min"):
            resolve_config({"localization": {"s_min": -3}})

    def test_window_ordering_checked(self):
        with pytest.raises(ConfigError, match="localization.x_minus"):
            resolve_config({"localization": {"x_minus": 0.9}})

    def test_bad_units(self):
        with pytest.raises(ConfigError, match="units"):
            resolve_config({"units": "furlong"})

    def test_seeds_must_be_integers(self):
        with pytest.raises(ConfigError, match="seeds"):
            resolve_config({"seeds": [1.5]})

    def test_velocity_scale_range(self):
        with pytest.raises(ConfigError, match="robot.velocity_scale"):
            resolve_config({"robot": {"velocity_scale": 1.5}})

    def test_boxes_source(self):
        with pytest.raises(ConfigError, match="boxes.source"):
            resolve_config({"boxes": {"source": "psychic"}})


class TestUnits:
    def test_cm_config_matches_meter_defaults(self):
        # the stock crop window expressed in centimeters
        cm_cfg = resolve_config(
            {
                "units": "cm",
                "localization": {
                    "x_plus": 55, "x_minus": 25,
                    "y_plus": 30, "y_minus": -30,
                    "z_plus": 50, "z_minus": 30,
                    "tol": 2,
                },
                "tool": {
                    "groove_width": 3.5, "trapper_width": 3.0,
                    "focal_length": 25, "lens_stroke": 0.6,
                    "interrupter_drop": 5,
                },
            }
        )
        m_cfg = resolve_config({})
        for key, value in m_cfg["localization"].items():
            assert cm_cfg["localization"][key] == pytest.approx(value)
        for key, value in m_cfg["tool"].items():
            assert cm_cfg["tool"][key] == pytest.approx(value)
        assert cm_cfg["units"] == "m"

    def test_color_thresholds_not_scaled(self):
        cfg = resolve_config({"units": "mm"})
        assert cfg["localization"]["r_th"] == 100

    def test_mm_scaling(self):
        cfg = resolve_config({"units": "mm", "tool": {"trapper_width": 30, "groove_width": 35}})
        assert cfg["tool"]["trapper_width"] == pytest.approx(0.030)


class TestHash:
    def test_stable(self):
        a = config_hash(resolve_config({}))
        b = config_hash(resolve_config({}))
        assert a == b
        assert len(a) == 64

    def test_sensitive_to_values(self):
        a = config_hash(resolve_config({}))
        b = config_hash(resolve_config({"robot": {"velocity_scale": 0.75}}))
        assert a != b

    def test_key_order_does_not_matter(self):
        a = resolve_config({"robot": {"max_speed": 0.2, "velocity_scale": 0.5}})
        b = resolve_config({"robot": {"velocity_scale": 0.5, "max_speed": 0.2}})
        assert config_hash(a) == config_hash(b)


class TestBuilders:
    def test_build_scene_uses_run_seed_when_null(self):
        cfg = resolve_config({"scene": {"seed": None, "n_straw": 3}})
        a = build_scene(cfg, 11)
        b = build_scene(cfg, 12)
        assert a.rng_seed == 11
        assert b.rng_seed == 12
        assert a != b

    def test_build_scene_fixed_seed(self):
        cfg = resolve_config({"scene": {"seed": 5, "n_straw": 3}})
        assert build_scene(cfg, 99).rng_seed == 5

    def test_build_rig_frames(self):
        rig = build_rig(resolve_config({}))
        assert rig.cam1.frame == "cam1"
        assert rig.cam2.frame == "cam2"

    def test_build_localization_defaults(self):
        p = build_localization(resolve_config({}))
        assert (p.s_min, p.s_max) == (20, 1000)

    def test_build_robot_workspace_margin(self):
        cfg = resolve_config({})
        robot = build_robot(cfg)
        loc = cfg["localization"]
        assert robot.workspace.min.x == pytest.approx(loc["x_minus"] - 0.10)
        assert robot.workspace.max.z == pytest.approx(loc["z_plus"] + 0.10)
        assert robot.tool_pos == robot.home

    def test_build_cut_duty_modes(self):
        cut, derive = build_cut(resolve_config({}))
        assert derive is True
        cut2, derive2 = build_cut(resolve_config({"cut": {"duty": 0.8}}))
        assert derive2 is False
        assert cut2.duty == 0.8

    def test_build_scenario_bundle(self):
        built = build_scenario(resolve_config({}), 1)
        assert built.dt == 0.01
        assert built.laser_timeout == 10.0
        assert built.box_source == "cameras"


class TestLoadConfig:
    def test_load_from_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"name": "mini", "scene": {"n_straw": 2}}))
        cfg = load_config(path)
        assert cfg["name"] == "mini"
        assert cfg["scene"]["n_straw"] == 2

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(path)

    def test_defaults_are_valid(self):
        resolve_config(json.loads(json.dumps(DEFAULTS)))
