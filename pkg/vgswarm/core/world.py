"""
Ground-truth world model.

World frame is North-East-Down. An observer's local frame has its y-axis along
the nose, x-axis across, and z up (relative altitude), so for heading h and NED
offset (dx, dy, dz):

    local = (cos h * dx - sin h * dy,  sin h * dx + cos h * dy,  -dz)
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import combinations
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from vgswarm.errors import UnknownBodyError

CAPTOR_MAX_SPEED = {"sim": 5.0, "real": 1.0}
TARGET_MAX_SPEED = 3.0
CAPTOR_RADIUS = 0.35


class BodyKind(str, Enum):
    CAPTOR = "captor"
    TARGET = "target"
    OBSTACLE = "obstacle"


def normalize_heading(heading):
    """Wrap to [-pi, pi)."""
    return (float(heading) + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(eq=False)
class Pose3:
    position: np.ndarray
    heading: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.heading = normalize_heading(self.heading)

    @property
    def altitude(self):
        return -float(self.position[2])

    def copy(self):
        return Pose3(self.position.copy(), self.heading)


@dataclass(eq=False)
class Body:
    id: int
    kind: BodyKind
    pose: Pose3
    radius: float
    max_speed: float = 0.0
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    height: float = 0.0
    failed: bool = False

    def __post_init__(self):
        self.velocity = np.asarray(self.velocity, dtype=float).reshape(3)
        if self.radius <= 0:
            raise ValueError(f"body {self.id}: radius must be positive")
        if self.kind is BodyKind.OBSTACLE:
            self.velocity = np.zeros(3)
            self.max_speed = 0.0

    @property
    def position(self):
        return self.pose.position

    @property
    def mobile(self):
        return self.kind is not BodyKind.OBSTACLE

    def copy(self):
        return replace(self, pose=self.pose.copy(), velocity=self.velocity.copy())


@dataclass(eq=False)
class WorldState:
    bodies: Tuple[Body, ...]
    tick: int = 0
    dt: float = 0.05

    def __post_init__(self):
        self.bodies = tuple(sorted(self.bodies, key=lambda b: b.id))
        ids = [b.id for b in self.bodies]
        if len(ids) != len(set(ids)):
            raise ValueError("body ids must be unique")
        self._index = {b.id: b for b in self.bodies}

    def body(self, body_id) -> Body:
        try:
            return self._index[body_id]
        except KeyError:
            raise UnknownBodyError(body_id) from None

    def of_kind(self, kind: BodyKind) -> List[Body]:
        return [b for b in self.bodies if b.kind is kind]


def _yaw_matrix(heading):
    c, s = math.cos(heading), math.sin(heading)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, -1.0]])


def world_to_local(observer: Pose3, point) -> np.ndarray:
    offset = np.asarray(point, dtype=float) - observer.position
    return _yaw_matrix(observer.heading) @ offset


def local_to_world(observer: Pose3, point) -> np.ndarray:
    # the yaw matrix is orthogonal, so its transpose inverts it
    return _yaw_matrix(observer.heading).T @ np.asarray(point, dtype=float) + observer.position


def local_to_world_vector(observer: Pose3, vector) -> np.ndarray:
    return _yaw_matrix(observer.heading).T @ np.asarray(vector, dtype=float)


def world_to_local_vector(observer: Pose3, vector) -> np.ndarray:
    return _yaw_matrix(observer.heading) @ np.asarray(vector, dtype=float)


def clamp_speed(velocity, max_speed):
    velocity = np.asarray(velocity, dtype=float)
    speed = float(np.linalg.norm(velocity))
    if speed > max_speed:
        return velocity * (max_speed / speed) if speed > 0 else velocity
    return velocity


def step_kinematics(world: WorldState, commands: Mapping[int, Sequence[float]]) -> WorldState:
    """Point-mass velocity-command step. Uncommanded or failed bodies hover in place."""
    for body_id in commands:
        world.body(body_id)

    bodies = []
    for body in world.bodies:
        nxt = body.copy()
        if body.mobile and not body.failed and body.id in commands:
            velocity = clamp_speed(commands[body.id], body.max_speed)
            nxt.velocity = velocity
            nxt.pose.position = body.position + velocity * world.dt
        else:
            nxt.velocity = np.zeros(3)
        bodies.append(nxt)
    return WorldState(tuple(bodies), tick=world.tick + 1, dt=world.dt)


def _obstacle_contact(obstacle: Body, other: Body):
    planar = float(np.linalg.norm(other.position[:2] - obstacle.position[:2]))
    if planar >= obstacle.radius + other.radius:
        return False
    # cylinder spans NED z in [base - height, base]; the other body overlaps it vertically
    top = obstacle.position[2] - obstacle.height
    base = obstacle.position[2]
    return top - other.radius < other.position[2] < base + other.radius


def check_collisions(world: WorldState) -> List[Tuple[int, int]]:
    pairs = []
    for a, b in combinations(world.bodies, 2):
        if a.kind is BodyKind.OBSTACLE and b.kind is BodyKind.OBSTACLE:
            continue
        if a.kind is BodyKind.OBSTACLE:
            hit = _obstacle_contact(a, b)
        elif b.kind is BodyKind.OBSTACLE:
            hit = _obstacle_contact(b, a)
        else:
            hit = float(np.linalg.norm(a.position - b.position)) < a.radius + b.radius
        if hit:
            pairs.append((a.id, b.id))
    return pairs


def planar_distance(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.hypot(a[0] - b[0], a[1] - b[1]))


def positions_by_id(world: WorldState) -> Dict[int, np.ndarray]:
    return {b.id: b.position.copy() for b in world.bodies}
