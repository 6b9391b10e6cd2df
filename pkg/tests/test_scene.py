import math

import pytest

from berrypick.errors import ConfigError, StateError
from berrypick.geometry import Aabb, Vec3
from berrypick.scene import (
    MAX_STEM_BEND,
    Scene,
    StrawberryTruth,
    detach_fruit,
    generate_scene,
    load_scene,
    sample_surfaces,
    save_scene,
    scene_from_dict,
    scene_to_dict,
)


class TestStrawberryTruth:
    def test_invariants(self):
        with pytest.raises(ValueError):
            StrawberryTruth(0, Vec3(0.4, 0, 0.4), 0.03, True, Vec3(0.5, 0, 0.48), 0.0, 0.003)
        with pytest.raises(ValueError):
            StrawberryTruth(0, Vec3(0.4, 0, 0.5), 0.015, True, Vec3(0.5, 0, 0.48), 0.0, 0.003)
        with pytest.raises(ValueError):
            StrawberryTruth(0, Vec3(0.4, 0, 0.4), 0.015, True, Vec3(0.5, 0, 0.48), 0.0, 0.010)

    def test_stem_attach(self):
        s = StrawberryTruth(0, Vec3(0.4, 0.0, 0.40), 0.015, True, Vec3(0.5, 0, 0.48), 0.0, 0.003)
        assert (s.stem_attach.x, s.stem_attach.y) == (0.4, 0.0)
        assert s.stem_attach.z == pytest.approx(0.415, abs=1e-12)


class TestGenerateScene:
    def test_empty(self):
        scene = generate_scene(1, 0)
        assert scene.strawberries == ()

    def test_nine_ripe_in_workspace(self):
        scene = generate_scene(7, 9, ripe_fraction=1.0)
        assert len(scene.strawberries) == 9
        assert all(s.ripe for s in scene.strawberries)
        assert all(scene.workspace.contains(s.center) for s in scene.strawberries)

    def test_deterministic(self):
        a = generate_scene(42, 9, 0.7, 0.004)
        b = generate_scene(42, 9, 0.7, 0.004)
        assert a == b

    def test_different_seeds_differ(self):
        assert generate_scene(1, 5) != generate_scene(2, 5)

    def test_capacity_error(self):
        with pytest.raises(ConfigError):
            generate_scene(1, 12, spacing=0.06)

    def test_ripe_fraction(self):
        scene = generate_scene(3, 8, ripe_fraction=0.5)
        assert sum(s.ripe for s in scene.strawberries) == 4

    def test_bend_clamped(self):
        scene = generate_scene(5, 9, bend_sigma=0.05)
        for s in scene.strawberries:
            assert abs(s.stem_bend) <= MAX_STEM_BEND + 1e-12
            assert abs(s.center.y - s.stem_top.y) <= MAX_STEM_BEND + 1e-12

    def test_fruits_hang_below_lip(self):
        scene = generate_scene(11, 9)
        for s in scene.strawberries:
            assert s.stem_top.z > s.center.z
            assert s.stem_top.z == pytest.approx(scene.trough_height - scene.base_height)

    def test_unique_ids_enforced(self):
        s = StrawberryTruth(0, Vec3(0.4, 0, 0.4), 0.015, True, Vec3(0.5, 0, 0.48), 0.0, 0.003)
        with pytest.raises(ValueError):
            Scene(strawberries=(s, s), rng_seed=0)

    def test_ripe_outside_workspace_rejected(self):
        s = StrawberryTruth(
            0, Vec3(0.4, 0, 0.4), 0.015, True, Vec3(0.5, 0, 0.48), 0.0, 0.003
        )
        with pytest.raises(ValueError):
            Scene(strawberries=(s,), rng_seed=0, workspace=Aabb(Vec3(0, 0, 0), Vec3(0.1, 0.1, 0.1)))


class TestSampleSurfaces:
    def test_fruit_points_on_sphere(self):
        scene = generate_scene(2, 1)
        fruit = scene.strawberries[0]
        pts = sample_surfaces(scene, 30000.0)
        fruit_pts = [p for p in pts if p.owner.kind == "fruit"]
        assert fruit_pts
        for p in fruit_pts:
            d = math.dist(
                (p.position.x, p.position.y, p.position.z),
                (fruit.center.x, fruit.center.y, fruit.center.z),
            )
            assert abs(d - fruit.radius) <= 1e-9

    def test_visible_hemisphere_count(self):
        # a large fruit sampled at the default density keeps the front
        # hemisphere above the minimum cluster size
        scene = generate_scene(2, 1, radius_band=(0.0175, 0.0175))
        fruit = scene.strawberries[0]
        pts = sample_surfaces(scene, scene.surface_density)
        front = [
            p for p in pts
            if p.owner.kind == "fruit" and p.position.x <= fruit.center.x
        ]
        assert len(front) >= 20

    def test_tiny_density_no_error(self):
        scene = generate_scene(2, 1)
        pts = sample_surfaces(scene, 0.001)
        assert isinstance(pts, list)

    def test_ripe_and_unripe_color_bands(self):
        scene = generate_scene(4, 6, ripe_fraction=0.5)
        ripe_ids = {s.id for s in scene.strawberries if s.ripe}
        for p in sample_surfaces(scene, 20000.0):
            if p.owner.kind == "fruit":
                if p.owner.id in ripe_ids:
                    assert p.color.r > 100 and p.color.g < 70 and p.color.b < 70
                else:
                    assert not (p.color.r > 100 and p.color.g < 70 and p.color.b < 70)
            elif p.owner.kind in ("stem", "trough"):
                assert not (p.color.r > 100 and p.color.g < 70 and p.color.b < 70)

    def test_stem_points_near_segment(self):
        scene = generate_scene(6, 2)
        by_id = {s.id: s for s in scene.strawberries}
        from oracles import point_to_segment_distance

        for p in sample_surfaces(scene, 40000.0):
            if p.owner.kind != "stem":
                continue
            s = by_id[p.owner.id]
            d = point_to_segment_distance(
                p.position.to_array(), s.stem_top.to_array(), s.stem_attach.to_array()
            )
            assert d == pytest.approx(s.stem_diameter / 2, abs=1e-9)

    def test_sampling_deterministic(self):
        scene = generate_scene(2, 3)
        a = sample_surfaces(scene, 5000.0)
        b = sample_surfaces(scene, 5000.0)
        assert a == b

    def test_density_validation(self):
        with pytest.raises(ValueError):
            sample_surfaces(generate_scene(1, 1), 0.0)


class TestDetach:
    def test_detach_marks_only_target(self):
        scene = generate_scene(9, 4)
        out = detach_fruit(scene, 2)
        assert out.fruit(2).detached
        assert not any(s.detached for s in out.strawberries if s.id != 2)
        # original untouched
        assert not scene.fruit(2).detached

    def test_double_detach(self):
        scene = detach_fruit(generate_scene(9, 4), 1)
        with pytest.raises(StateError):
            detach_fruit(scene, 1)

    def test_unknown_id(self):
        with pytest.raises(StateError):
            detach_fruit(generate_scene(9, 4), 99)

    def test_sampling_unchanged_for_other_fruits(self):
        scene = generate_scene(12, 3)
        before = sample_surfaces(scene, 8000.0)
        after = sample_surfaces(detach_fruit(scene, 0), 8000.0)
        assert before == after  # sampling ignores the detached flag


class TestSerialization:
    def test_dict_round_trip(self):
        scene = generate_scene(21, 7, ripe_fraction=0.8, bend_sigma=0.002)
        scene = detach_fruit(scene, 3)
        back = scene_from_dict(scene_to_dict(scene))
        assert back == scene

    def test_file_round_trip(self, tmp_path):
        scene = generate_scene(22, 5)
        path = tmp_path / "scene.json"
        save_scene(scene, path)
        assert load_scene(path) == scene

    def test_units_field_required(self):
        d = scene_to_dict(generate_scene(1, 1))
        d["units"] = "cm"
        with pytest.raises(ConfigError):
            scene_from_dict(d)
