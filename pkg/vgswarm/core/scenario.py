"""
Scenario description, JSON round trip, target policies and the shipped presets.

Body ids are assigned in file order: captors first, then targets, then obstacles.
Captors fly at 5 m altitude (NED z = -5); obstacles are vertical cylinders
standing on the ground.
"""

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from vgswarm.core.camera import NoiseModel
from vgswarm.core.fsm import BehaviorParams
from vgswarm.core.grn import GrnParams
from vgswarm.core.planner import PlannerParams, SamplingScheme
from vgswarm.core.world import (CAPTOR_MAX_SPEED, CAPTOR_RADIUS, TARGET_MAX_SPEED, Body, BodyKind, Pose3,
                                WorldState, check_collisions, clamp_speed)
from vgswarm.errors import ScenarioError
from vgswarm.utils.rng import stream

ALTITUDE = 5.0
CALIBRATION_SOURCES = ("expansion", "ground_truth")


class PolicyKind(str, Enum):
    STATIC = "static"
    WAYPOINTS = "waypoints"
    EVADE = "evade"
    RANDOM = "random"


@dataclass
class TargetPolicy:
    kind: PolicyKind = PolicyKind.STATIC
    waypoints: Tuple[Tuple[float, float, float], ...] = ()
    speed: float = 1.0
    gain: float = 1.5
    trigger_radius: float = 3.0
    # degrees per sqrt(second), random drift only
    turn_sigma_deg: float = 30.0
    start_tick: int = 0
    then: Optional["TargetPolicy"] = None

    def __post_init__(self):
        self.kind = PolicyKind(self.kind)
        self.waypoints = tuple(tuple(float(v) for v in wp) for wp in self.waypoints)
        if any(len(wp) != 3 for wp in self.waypoints):
            raise ValueError("waypoints are (x, y, z) triples")
        if self.kind is PolicyKind.WAYPOINTS and not self.waypoints:
            raise ValueError("waypoints policy needs at least one waypoint")
        if self.speed < 0 or self.gain < 0:
            raise ValueError("policy speed and gain must be non-negative")
        if self.then is not None and self.then.start_tick < self.start_tick:
            raise ValueError("chained policies must start in tick order")

    def chain(self):
        link = self
        while link is not None:
            yield link
            link = link.then

    def active(self, tick) -> Optional["TargetPolicy"]:
        current = None
        for link in self.chain():
            if link.start_tick <= tick:
                current = link
        return current

    def peak_speed(self):
        speeds = {PolicyKind.STATIC: lambda p: 0.0, PolicyKind.EVADE: lambda p: p.gain,
                  PolicyKind.WAYPOINTS: lambda p: p.speed, PolicyKind.RANDOM: lambda p: p.speed}
        return max(speeds[link.kind](link) for link in self.chain())


@dataclass
class TargetSpec:
    pose: Pose3
    policy: TargetPolicy = field(default_factory=TargetPolicy)
    radius: float = CAPTOR_RADIUS
    max_speed: float = TARGET_MAX_SPEED


@dataclass(frozen=True)
class ObstacleSpec:
    center: Tuple[float, float]
    radius: float = 0.5
    height: float = 6.0


@dataclass
class Scenario:
    name: str
    captors: List[Pose3] = field(default_factory=list)
    targets: List[TargetSpec] = field(default_factory=list)
    obstacles: List[ObstacleSpec] = field(default_factory=list)
    bounds: Tuple[float, float, float, float] = (-40.0, -40.0, 40.0, 40.0)
    noise: NoiseModel = field(default_factory=NoiseModel)
    grn: GrnParams = field(default_factory=GrnParams)
    planner: PlannerParams = field(default_factory=PlannerParams)
    scheme: SamplingScheme = field(default_factory=SamplingScheme)
    behavior: BehaviorParams = field(default_factory=BehaviorParams)
    dt: float = 0.05
    max_ticks: int = 400
    seed: int = 0
    failures: List[Tuple[int, int]] = field(default_factory=list)
    profile: str = "sim"
    latency_ticks: int = 0
    calibration_source: str = "expansion"
    initial_distance: Optional[float] = None
    description: str = ""

    @property
    def captor_max_speed(self):
        return CAPTOR_MAX_SPEED[self.profile]

    @property
    def hold_altitude(self):
        return self.captors[0].altitude if self.captors else ALTITUDE

    def mean_initial_distance(self):
        if self.initial_distance is not None:
            return float(self.initial_distance)
        if not self.captors or not self.targets:
            return 0.0
        target = self.targets[0].pose.position
        return float(np.mean([np.hypot(*(c.position[:2] - target[:2])) for c in self.captors]))


def build_world(scenario: Scenario) -> WorldState:
    bodies = []
    next_id = 0
    for pose in scenario.captors:
        bodies.append(Body(next_id, BodyKind.CAPTOR, pose.copy(), CAPTOR_RADIUS,
                           max_speed=scenario.captor_max_speed))
        next_id += 1
    for spec in scenario.targets:
        bodies.append(Body(next_id, BodyKind.TARGET, spec.pose.copy(), spec.radius, max_speed=spec.max_speed))
        next_id += 1
    for obs in scenario.obstacles:
        bodies.append(Body(next_id, BodyKind.OBSTACLE, Pose3([obs.center[0], obs.center[1], 0.0]),
                           obs.radius, height=obs.height))
        next_id += 1
    return WorldState(tuple(bodies), tick=0, dt=scenario.dt)


def validate(scenario: Scenario):
    """Raise ScenarioError unless the scenario can be run."""
    if scenario.profile not in CAPTOR_MAX_SPEED:
        raise ScenarioError(f"unknown speed profile {scenario.profile!r}")
    if scenario.calibration_source not in CALIBRATION_SOURCES:
        raise ScenarioError(f"unknown calibration source {scenario.calibration_source!r}")
    if not scenario.dt > 0 or scenario.max_ticks < 0 or scenario.latency_ticks < 0:
        raise ScenarioError("dt must be positive, max_ticks and latency_ticks non-negative")
    xmin, ymin, xmax, ymax = scenario.bounds
    if not (xmin < xmax and ymin < ymax):
        raise ScenarioError("bounds must be (xmin, ymin, xmax, ymax) with positive extent")
    poses = list(scenario.captors) + [t.pose for t in scenario.targets]
    for pose in poses:
        x, y = pose.position[:2]
        if not (xmin <= x <= xmax and ymin <= y <= ymax):
            raise ScenarioError(f"body at ({x:.2f}, {y:.2f}) starts outside the scenario bounds")
    for spec in scenario.targets:
        if spec.max_speed > TARGET_MAX_SPEED or spec.policy.peak_speed() > spec.max_speed:
            raise ScenarioError(f"target speeds are capped at {TARGET_MAX_SPEED} m/s")
    n_captors = len(scenario.captors)
    for tick, captor_id in scenario.failures:
        if not 0 <= captor_id < n_captors:
            raise ScenarioError(f"failure references unknown captor {captor_id}")
    try:
        world = build_world(scenario)
    except ValueError as e:
        raise ScenarioError(str(e)) from e
    hits = check_collisions(world)
    if hits:
        raise ScenarioError(f"bodies collide at tick 0: {hits}")
    return scenario


# -- target policies --------------------------------------------------------------

def evade_policy(target: Body, captor_positions: Sequence, gain, trigger_radius=3.0,
                 max_speed=TARGET_MAX_SPEED) -> np.ndarray:
    """Flee along the normalized sum of (target - captor) over captors inside the trigger radius."""
    push = np.zeros(3)
    for pos in captor_positions:
        offset = target.position - np.asarray(pos, dtype=float)
        offset[2] = 0.0
        if np.linalg.norm(offset) <= trigger_radius:
            push += offset
    norm = float(np.linalg.norm(push))
    if norm < 1e-9:
        return np.zeros(3)
    return clamp_speed(gain * push / norm, max_speed)


class TargetController:
    """Runs one target's policy chain; waypoint progress and drift heading live here."""

    def __init__(self, spec: TargetSpec, rng):
        self.spec = spec
        self.rng = rng
        self._waypoint_index: Dict[int, int] = {}
        self._drift_heading = float(rng.uniform(0.0, 2.0 * math.pi))

    def velocity(self, body: Body, tick, captor_positions, dt) -> np.ndarray:
        link = self.spec.policy.active(tick)
        if link is None or link.kind is PolicyKind.STATIC:
            return np.zeros(3)
        if link.kind is PolicyKind.EVADE:
            return evade_policy(body, captor_positions, link.gain, link.trigger_radius, self.spec.max_speed)
        if link.kind is PolicyKind.RANDOM:
            sigma = math.radians(link.turn_sigma_deg) * math.sqrt(dt)
            self._drift_heading += float(self.rng.normal(0.0, sigma))
            v = link.speed * np.array([math.cos(self._drift_heading), math.sin(self._drift_heading), 0.0])
            return clamp_speed(v, self.spec.max_speed)
        return self._follow_waypoints(link, body, dt)

    def _follow_waypoints(self, link: TargetPolicy, body: Body, dt):
        key = id(link)
        index = self._waypoint_index.get(key, 0)
        if index >= len(link.waypoints):
            return np.zeros(3)
        offset = np.asarray(link.waypoints[index]) - body.position
        dist = float(np.linalg.norm(offset))
        reach = link.speed * dt
        if dist <= reach:
            self._waypoint_index[key] = index + 1
            return offset / dt
        return clamp_speed(offset * (link.speed / dist), self.spec.max_speed)


# -- JSON ----------------------------------------------------------------------------

def _params_from(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ScenarioError(f"{where}: expected an object")
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ScenarioError(f"{where}: unknown keys {unknown}")
    values = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    try:
        return cls(**values)
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"{where}: {e}") from e


def _check_keys(data, allowed, where):
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ScenarioError(f"{where}: unknown keys {unknown}")


def _pose_from(data, where):
    if not isinstance(data, dict):
        raise ScenarioError(f"{where}: expected an object")
    _check_keys(data, {"position", "heading"}, where)
    try:
        return Pose3(data["position"], heading=float(data.get("heading", 0.0)))
    except (KeyError, TypeError, ValueError) as e:
        raise ScenarioError(f"{where}: {e}") from e


def _policy_from(data, where):
    if data is None:
        return TargetPolicy()
    if not isinstance(data, dict):
        raise ScenarioError(f"{where}: expected an object")
    data = dict(data)
    then = data.pop("then", None)
    policy = _params_from(TargetPolicy, data, where)
    if then is not None:
        try:
            policy = replace(policy, then=_policy_from(then, f"{where}.then"))
        except ValueError as e:
            raise ScenarioError(f"{where}: {e}") from e
    return policy


def scenario_from_dict(data) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    allowed = {f.name for f in fields(Scenario)}
    _check_keys(data, allowed, "scenario")
    if "name" not in data:
        raise ScenarioError("scenario: missing name")

    targets = []
    for i, t in enumerate(data.get("targets", [])):
        where = f"targets[{i}]"
        if not isinstance(t, dict):
            raise ScenarioError(f"{where}: expected an object")
        _check_keys(t, {"position", "heading", "policy", "radius", "max_speed"}, where)
        pose = _pose_from({k: t[k] for k in ("position", "heading") if k in t}, where)
        targets.append(TargetSpec(pose=pose, policy=_policy_from(t.get("policy"), f"{where}.policy"),
                                  radius=float(t.get("radius", CAPTOR_RADIUS)),
                                  max_speed=float(t.get("max_speed", TARGET_MAX_SPEED))))

    scalars = {k: data[k] for k in ("dt", "max_ticks", "seed", "profile", "latency_ticks",
                                    "calibration_source", "initial_distance", "description") if k in data}
    try:
        scenario = Scenario(
            name=str(data["name"]),
            captors=[_pose_from(c, f"captors[{i}]") for i, c in enumerate(data.get("captors", []))],
            targets=targets,
            obstacles=[_params_from(ObstacleSpec, o, f"obstacles[{i}]")
                       for i, o in enumerate(data.get("obstacles", []))],
            bounds=tuple(float(v) for v in data.get("bounds", (-40.0, -40.0, 40.0, 40.0))),
            noise=_params_from(NoiseModel, data.get("noise"), "noise"),
            grn=_params_from(GrnParams, data.get("grn"), "grn"),
            planner=_params_from(PlannerParams, data.get("planner"), "planner"),
            scheme=_params_from(SamplingScheme, data.get("scheme"), "scheme"),
            behavior=_params_from(BehaviorParams, data.get("behavior"), "behavior"),
            failures=[(int(t), int(c)) for t, c in data.get("failures", [])],
            **scalars,
        )
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"scenario: {e}") from e
    return validate(scenario)


def _policy_to_dict(policy: TargetPolicy):
    out = {"kind": policy.kind.value, "waypoints": [list(wp) for wp in policy.waypoints],
           "speed": policy.speed, "gain": policy.gain, "trigger_radius": policy.trigger_radius,
           "turn_sigma_deg": policy.turn_sigma_deg, "start_tick": policy.start_tick}
    if policy.then is not None:
        out["then"] = _policy_to_dict(policy.then)
    return out


def _pose_to_dict(pose: Pose3):
    return {"position": [float(v) for v in pose.position], "heading": float(pose.heading)}


def scenario_to_dict(scenario: Scenario):
    return {
        "name": scenario.name,
        "description": scenario.description,
        "bounds": list(scenario.bounds),
        "dt": scenario.dt,
        "max_ticks": scenario.max_ticks,
        "seed": scenario.seed,
        "profile": scenario.profile,
        "latency_ticks": scenario.latency_ticks,
        "calibration_source": scenario.calibration_source,
        "initial_distance": scenario.initial_distance,
        "captors": [_pose_to_dict(p) for p in scenario.captors],
        "targets": [dict(_pose_to_dict(t.pose), policy=_policy_to_dict(t.policy), radius=t.radius,
                         max_speed=t.max_speed) for t in scenario.targets],
        "obstacles": [{"center": list(o.center), "radius": o.radius, "height": o.height}
                      for o in scenario.obstacles],
        "failures": [list(f) for f in scenario.failures],
        "noise": asdict(scenario.noise),
        "grn": asdict(scenario.grn),
        "planner": asdict(scenario.planner),
        "scheme": {"radii": list(scenario.scheme.radii), "n_directions": scenario.scheme.n_directions},
        "behavior": asdict(scenario.behavior),
    }


def load_scenario_file(path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: invalid JSON ({e})") from e
    return scenario_from_dict(data)


def save_scenario(scenario: Scenario, path):
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2))


# -- presets -------------------------------------------------------------------------

def facing(position, target):
    d = np.asarray(target, dtype=float)[:2] - np.asarray(position, dtype=float)[:2]
    return math.atan2(d[0], d[1])


def arc_captors(n, distance, target=(0.0, 0.0), spread_deg=120.0, bearing_deg=180.0):
    """n captors on an arc around the target, noses on the target."""
    if n == 1:
        bearings = [bearing_deg]
    else:
        bearings = np.linspace(bearing_deg - spread_deg / 2.0, bearing_deg + spread_deg / 2.0, n)
    poses = []
    for b in bearings:
        rad = math.radians(b)
        pos = (target[0] + distance * math.cos(rad), target[1] + distance * math.sin(rad), -ALTITUDE)
        poses.append(Pose3(pos, heading=facing(pos, target)))
    return poses


def _target(policy=None, position=(0.0, 0.0, -ALTITUDE)):
    return TargetSpec(pose=Pose3(position), policy=policy or TargetPolicy())


def _pillar_line(x_of_y, y_from, y_to, spacing=1.5, radius=0.5):
    ys = np.arange(y_from, y_to + 1e-9, spacing)
    return [ObstacleSpec(center=(float(x_of_y(y)), float(y)), radius=radius) for y in ys]


def _corridor_captors(n, distance, half_width=2.4):
    xs = np.linspace(-half_width, half_width, n) if n > 1 else [0.0]
    poses = []
    for x in xs:
        pos = (float(x), -distance, -ALTITUDE)
        poses.append(Pose3(pos, heading=facing(pos, (0.0, 0.0))))
    return poses


def ring_captors(n, distance, target=(0.0, 0.0), bearing_deg=45.0):
    """n captors evenly spaced on a full circle, the first at `bearing_deg`."""
    return arc_captors(n, distance, target, spread_deg=360.0 * (n - 1) / n,
                       bearing_deg=bearing_deg + 180.0 * (n - 1) / n)


def open_4v1(distance=10.0, seed=0):
    return Scenario(
        name="open-4v1",
        description="Open field, 4 captors on the diagonals, target holds until a captor comes close, then evades",
        captors=ring_captors(4, distance),
        targets=[_target(TargetPolicy(kind=PolicyKind.EVADE, gain=1.5, trigger_radius=3.0))],
        bounds=(-30.0, -30.0, 30.0, 30.0),
        max_ticks=400,
        seed=seed,
        initial_distance=distance,
    )


def open_10v1(distance=10.0, seed=0):
    return Scenario(
        name="open-10v1",
        description="Open field, 10 captors on a half circle around a static target",
        captors=arc_captors(10, distance, spread_deg=180.0),
        targets=[_target()],
        bounds=(-30.0, -30.0, 30.0, 30.0),
        max_ticks=500,
        seed=seed,
        initial_distance=distance,
    )


def narrow_parallel(distance=10.0, seed=0):
    walls = _pillar_line(lambda y: -5.0, -25.0, 25.0) + _pillar_line(lambda y: 5.0, -25.0, 25.0)
    return Scenario(
        name="narrow-parallel",
        description="Corridor between two straight pillar rows 10 m apart",
        captors=_corridor_captors(4, distance),
        targets=[_target()],
        obstacles=walls,
        bounds=(-4.3, -25.0, 4.3, 25.0),
        max_ticks=500,
        seed=seed,
        initial_distance=distance,
    )


def narrow_conical(distance=10.0, seed=0):
    def half_width(y):
        return 5.0 - 0.15 * y

    walls = _pillar_line(lambda y: -half_width(y), -20.0, 20.0) + _pillar_line(half_width, -20.0, 20.0)
    return Scenario(
        name="narrow-conical",
        description="Pillar rows converging toward +y",
        captors=_corridor_captors(4, distance),
        targets=[_target()],
        obstacles=walls,
        bounds=(-7.5, -20.0, 7.5, 18.0),
        max_ticks=500,
        seed=seed,
        initial_distance=distance,
    )


def poisson_disc(rng, n, extent, min_spacing, keep_out=(), attempts=5000):
    """Dart throwing: uniform candidates rejected when closer than min_spacing to a kept point."""
    points = []
    for _ in range(attempts):
        if len(points) >= n:
            break
        p = rng.uniform(-extent, extent, size=2)
        if any(np.hypot(*(p - q)) < min_spacing for q in points):
            continue
        if any(np.hypot(*(p - np.asarray(c))) < r for c, r in keep_out):
            continue
        points.append(p)
    return points


def random_obstacles(distance=10.0, seed=0, count=14):
    captors = ring_captors(4, distance)
    keep_out = [((0.0, 0.0), 5.5)] + [(tuple(c.position[:2]), 2.0) for c in captors]
    rng = stream(seed, "scenario")
    centers = poisson_disc(rng, count, 15.0, 4.0, keep_out)
    return Scenario(
        name="random-obstacles",
        description="Poisson-disc pillar scatter around a static target",
        captors=captors,
        targets=[_target()],
        obstacles=[ObstacleSpec(center=(float(x), float(y))) for x, y in centers],
        bounds=(-25.0, -25.0, 25.0, 25.0),
        max_ticks=500,
        seed=seed,
        initial_distance=distance,
    )


def failure_injection(distance=10.0, seed=0):
    scenario = open_10v1(distance, seed)
    scenario.name = "failure-injection"
    scenario.description = "10 captors, three of them land at mid-run"
    scenario.max_ticks = 700
    scenario.failures = [(350, 1), (350, 4), (350, 7)]
    return scenario


def escape_recapture(distance=8.0, seed=0):
    # a dash through the gap between the two leading captors
    escape = TargetPolicy(kind=PolicyKind.WAYPOINTS, waypoints=((0.0, 2.0, -ALTITUDE),), speed=3.0,
                          start_tick=300)
    return Scenario(
        name="escape-recapture",
        description="Target holds, dashes 2 m at 3 m/s at 15 s, then holds again",
        captors=ring_captors(4, distance),
        targets=[_target(TargetPolicy(kind=PolicyKind.STATIC, then=escape))],
        bounds=(-30.0, -30.0, 30.0, 30.0),
        max_ticks=900,
        seed=seed,
        initial_distance=distance,
    )


def field_search(distance=15.0, seed=0):
    """Flight-test layout: captors start behind the target, beyond camera range, on the real speed profile."""
    captors = []
    for x in (-3.0, -1.0, 1.0, 3.0):
        pos = (x, -distance, -ALTITUDE)
        captors.append(Pose3(pos, heading=facing(pos, (0.0, 0.0))))
    walk = TargetPolicy(kind=PolicyKind.WAYPOINTS, waypoints=((0.0, 8.0, -ALTITUDE), (4.0, 12.0, -ALTITUDE)),
                        speed=0.5, start_tick=200)
    return Scenario(
        name="field-search",
        description="Captors start out of range behind the target at 1 m/s; the target walks off after 10 s",
        captors=captors,
        targets=[_target(TargetPolicy(kind=PolicyKind.STATIC, then=walk))],
        bounds=(-20.0, -25.0, 20.0, 25.0),
        max_ticks=1200,
        seed=seed,
        profile="real",
        initial_distance=distance,
    )


def unreachable(distance=10.0, seed=0):
    return Scenario(
        name="unreachable",
        description="Target hovers 20 m above the captors, out of camera range",
        captors=arc_captors(4, distance),
        targets=[_target(position=(0.0, 0.0, -25.0))],
        bounds=(-30.0, -30.0, 30.0, 30.0),
        max_ticks=200,
        seed=seed,
        initial_distance=distance,
    )


PRESETS: Dict[str, Callable[..., Scenario]] = {
    "open-4v1": open_4v1,
    "open-10v1": open_10v1,
    "narrow-parallel": narrow_parallel,
    "narrow-conical": narrow_conical,
    "random-obstacles": random_obstacles,
    "failure-injection": failure_injection,
    "escape-recapture": escape_recapture,
    "field-search": field_search,
    "unreachable": unreachable,
}


def build_preset(name, distance=None, seed=0) -> Scenario:
    try:
        builder = PRESETS[name]
    except KeyError:
        raise ScenarioError(f"unknown preset {name!r}") from None
    scenario = builder(seed=seed) if distance is None else builder(distance=float(distance), seed=seed)
    return validate(scenario)


def describe_presets():
    return [{"name": name, "description": builder().description} for name, builder in PRESETS.items()]


def load_scenario(ref, distance=None, seed=None) -> Scenario:
    """A preset name or a JSON file path."""
    path = Path(str(ref))
    if path.is_file():
        scenario = load_scenario_file(path)
        if seed is not None:
            scenario.seed = int(seed)
        return scenario
    if str(ref) in PRESETS:
        return build_preset(str(ref), distance, 0 if seed is None else int(seed))
    raise FileNotFoundError(f"no scenario file or preset named {ref!r}")
