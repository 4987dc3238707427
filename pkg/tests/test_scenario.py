import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from vgswarm.core.batch import scenario_for, with_distance
from vgswarm.core.camera import NoiseModel
from vgswarm.core.metrics import sector_of
from vgswarm.core.scenario import (PRESETS, ObstacleSpec, PolicyKind, Scenario, TargetController, TargetPolicy,
                                   TargetSpec, build_preset, build_world, describe_presets, evade_policy,
                                   load_scenario, poisson_disc, save_scenario, scenario_from_dict,
                                   scenario_to_dict, validate)
from vgswarm.core.world import Body, BodyKind, Pose3
from vgswarm.errors import ScenarioError
from vgswarm.utils.rng import stream


def target_body(position=(0.0, 0.0, -5.0)):
    return Body(9, BodyKind.TARGET, Pose3(position), 0.35, max_speed=3.0)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_validate(name):
    scenario = build_preset(name)
    assert scenario.name == name
    assert scenario.captors and scenario.targets
    assert scenario.description


def test_unknown_preset():
    with pytest.raises(ScenarioError):
        build_preset("open-99v1")


def test_describe_presets():
    assert [p["name"] for p in describe_presets()] == list(PRESETS)


def test_body_ids_follow_file_order():
    world = build_world(build_preset("narrow-parallel"))
    kinds = [b.kind for b in world.bodies]
    assert kinds[:4] == [BodyKind.CAPTOR] * 4
    assert kinds[4] is BodyKind.TARGET
    assert set(kinds[5:]) == {BodyKind.OBSTACLE}


def test_json_round_trip_keeps_policy_chain():
    scenario = build_preset("escape-recapture", seed=4)
    again = scenario_from_dict(json.loads(json.dumps(scenario_to_dict(scenario))))
    assert again.seed == 4
    assert [link.kind for link in again.targets[0].policy.chain()] == [PolicyKind.STATIC, PolicyKind.WAYPOINTS]
    assert again.targets[0].policy.then.start_tick == 300
    assert np.allclose([c.position for c in again.captors], [c.position for c in scenario.captors])
    assert again.grn == scenario.grn
    assert again.scheme == scenario.scheme


@pytest.mark.parametrize("patch", [
    {"colour": "red"},
    {"grn": {"theta": 0.5, "sigma": 1.0}},
    {"noise": {"sigma": 2.0}},
    {"targets": [{"position": [0, 0, -5], "policy": {"kind": "teleport"}}]},
    {"targets": [{"position": [0, 0, -5], "speed": 1.0}]},
])
def test_bad_keys_are_rejected(patch):
    data = scenario_to_dict(build_preset("open-4v1"))
    data.update(patch)
    with pytest.raises(ScenarioError):
        scenario_from_dict(data)


def test_missing_name():
    data = scenario_to_dict(build_preset("open-4v1"))
    del data["name"]
    with pytest.raises(ScenarioError):
        scenario_from_dict(data)


def test_validate_catches_bad_layouts():
    base = build_preset("open-4v1")
    with pytest.raises(ScenarioError):
        validate(replace(base, bounds=(-5.0, -5.0, 5.0, 5.0)))
    with pytest.raises(ScenarioError):
        validate(replace(base, failures=[(10, 7)]))
    with pytest.raises(ScenarioError):
        validate(replace(base, profile="warp"))
    with pytest.raises(ScenarioError):
        validate(replace(base, obstacles=[ObstacleSpec(center=(0.0, 0.0))]))
    fast = TargetSpec(pose=Pose3([0.0, 0.0, -5.0]), policy=TargetPolicy(kind=PolicyKind.WAYPOINTS,
                                                                       waypoints=((5.0, 0.0, -5.0),), speed=4.0))
    with pytest.raises(ScenarioError):
        validate(replace(base, targets=[fast]))


def test_obstacles_may_sit_outside_bounds():
    scenario = build_preset("narrow-parallel")
    xmin, _, xmax, _ = scenario.bounds
    assert all(abs(o.center[0]) > xmax for o in scenario.obstacles)


def test_evade_pushes_away_from_close_captors():
    v = evade_policy(target_body(), [np.array([-1.0, 0.0, -5.0])], gain=1.5)
    assert np.allclose(v, [1.5, 0.0, 0.0])
    assert not evade_policy(target_body(), [np.array([-4.0, 0.0, -5.0])], gain=1.5).any()
    balanced = [np.array([-1.0, 0.0, -5.0]), np.array([1.0, 0.0, -5.0])]
    assert not evade_policy(target_body(), balanced, gain=1.5).any()


def test_waypoint_controller_reaches_and_holds():
    policy = TargetPolicy(kind=PolicyKind.WAYPOINTS, waypoints=((0.0, 0.3, -5.0),), speed=2.0)
    ctrl = TargetController(TargetSpec(pose=Pose3([0.0, 0.0, -5.0]), policy=policy), stream(0, "target/9"))
    body = target_body()
    v = ctrl.velocity(body, 0, [], 0.05)
    assert np.allclose(v, [0.0, 2.0, 0.0])
    body.pose.position = np.array([0.0, 0.25, -5.0])
    v = ctrl.velocity(body, 1, [], 0.05)
    assert np.allclose(v * 0.05, [0.0, 0.05, 0.0])
    assert not ctrl.velocity(body, 2, [], 0.05).any()


def test_chained_policy_switches_on_start_tick():
    policy = build_preset("escape-recapture").targets[0].policy
    assert policy.active(299).kind is PolicyKind.STATIC
    assert policy.active(300).kind is PolicyKind.WAYPOINTS
    assert policy.peak_speed() == 3.0


def test_poisson_disc_spacing():
    points = poisson_disc(stream(2, "scenario"), 10, 15.0, 4.0, keep_out=[((0.0, 0.0), 5.0)])
    assert len(points) == 10
    for i, p in enumerate(points):
        assert np.hypot(*p) >= 5.0
        for q in points[i + 1:]:
            assert np.hypot(*(p - q)) >= 4.0


def test_random_obstacles_depend_on_seed():
    a = build_preset("random-obstacles", seed=1).obstacles
    b = build_preset("random-obstacles", seed=1).obstacles
    c = build_preset("random-obstacles", seed=2).obstacles
    assert a == b
    assert a != c


def test_load_scenario(tmp_path):
    path = tmp_path / "mine.json"
    save_scenario(build_preset("open-10v1"), path)
    loaded = load_scenario(path, seed=11)
    assert loaded.name == "open-10v1" and loaded.seed == 11
    assert len(loaded.captors) == 10
    with pytest.raises(FileNotFoundError):
        load_scenario(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ScenarioError):
        load_scenario(bad)


def test_preset_distance():
    scenario = build_preset("open-4v1", distance=6.0)
    assert scenario.mean_initial_distance() == pytest.approx(6.0)
    ranges = [np.hypot(*c.position[:2]) for c in scenario.captors]
    assert np.allclose(ranges, 6.0)


def test_with_distance_rescales_file_scenarios():
    scenario = Scenario(name="custom", captors=[Pose3([0.0, -10.0, -5.0]), Pose3([6.0, 8.0, -5.0])],
                        targets=[TargetSpec(pose=Pose3([0.0, 0.0, -5.0]))])
    moved = with_distance(scenario, 5.0)
    assert [np.hypot(*c.position[:2]) for c in moved.captors] == pytest.approx([5.0, 5.0])
    assert moved.initial_distance == 5.0
    assert scenario_for(scenario, None, seed=3).seed == 3
    assert scenario_for(build_preset("open-4v1"), 14.0, seed=2, preset=True).mean_initial_distance() == 14.0


def test_shipped_example_scenario():
    path = Path(__file__).resolve().parents[1] / "scenarios" / "two-pillars.json"
    scenario = load_scenario(path)
    assert len(scenario.captors) == 4
    assert len(scenario.obstacles) == 2
    assert scenario.targets[0].policy.kind is PolicyKind.EVADE


@pytest.mark.parametrize("name", ["open-4v1", "open-10v1", "random-obstacles", "failure-injection",
                                  "escape-recapture"])
def test_open_presets_start_in_every_sector(name):
    scenario = build_preset(name)
    captors = [c.position for c in scenario.captors]
    assert set(sector_of(captors, scenario.targets[0].pose.position)) == {0, 1, 2}


def test_field_search_starts_out_of_range():
    scenario = build_preset("field-search")
    target = scenario.targets[0]
    assert scenario.profile == "real"
    assert scenario.captor_max_speed == 1.0
    for pose in scenario.captors:
        offset = pose.position[:2] - target.pose.position[:2]
        assert np.hypot(*offset) > NoiseModel().range_m
        assert offset[1] < 0.0
    policy = target.policy
    assert policy.active(199).kind is PolicyKind.STATIC
    assert policy.active(200).kind is PolicyKind.WAYPOINTS
    assert policy.peak_speed() <= 1.0
