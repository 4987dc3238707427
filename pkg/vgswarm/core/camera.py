"""
Synthetic omnidirectional perception.

Four cameras mounted at 0/90/180/270 degrees from the nose project bodies with
an FOV-linear mapping: a point at camera-frame lateral offset Xc and range D
lands at pixel offset cx = Xc * W / (2 D sin(fov_h / 2)), which is exactly the
inverse of the decomposition used by the estimator. Pixel offsets are measured
from the image center, x to the right and y up.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from vgswarm.core.world import CAPTOR_RADIUS, Body, BodyKind, Pose3, WorldState, world_to_local

MOUNT_YAWS = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)


@dataclass(frozen=True)
class CameraRig:
    mount_yaws: Tuple[float, ...] = MOUNT_YAWS
    fov_h: float = math.radians(120.0)
    fov_v: float = math.radians(90.0)
    width: int = 640
    height: int = 480
    rate: float = 20.0

    def __post_init__(self):
        if not 0 < self.fov_h < math.pi or not 0 < self.fov_v < math.pi:
            raise ValueError("camera FOV must lie in (0, pi)")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")

    @property
    def px_per_sine_h(self):
        return self.width / (2.0 * math.sin(self.fov_h / 2.0))

    @property
    def px_per_sine_v(self):
        return self.height / (2.0 * math.sin(self.fov_v / 2.0))


@dataclass(frozen=True)
class NoiseModel:
    sigma_px: float = 2.0
    p_miss: float = 0.05
    p_false: float = 0.0
    range_m: float = 10.0

    @classmethod
    def ideal(cls, range_m=10.0):
        return cls(sigma_px=0.0, p_miss=0.0, p_false=0.0, range_m=range_m)


@dataclass(frozen=True)
class Detection:
    camera_index: int
    cx: float
    cy: float
    w_px: float
    h_px: float
    kind: BodyKind
    tick: int
    bbox: Tuple[float, float, float, float]
    truncated: bool = False

    @property
    def area(self):
        return self.w_px * self.h_px


def camera_frame(local, mount_yaw):
    """Rotate a body-local point into a camera's frame (boresight on +y)."""
    c, s = math.cos(mount_yaw), math.sin(mount_yaw)
    x, y, z = local
    return np.array([x * c - y * s, x * s + y * c, z])


def body_frame(cam_point, mount_yaw):
    c, s = math.cos(mount_yaw), math.sin(mount_yaw)
    x, y, z = cam_point
    return np.array([x * c + y * s, -x * s + y * c, z])


def apparent_center(observer: Pose3, body: Body):
    """Point the camera sees as the body's center; pillars are cut at the observer's altitude."""
    if body.kind is not BodyKind.OBSTACLE:
        return body.position
    top = body.position[2] - body.height
    z = min(max(observer.position[2], top), body.position[2])
    return np.array([body.position[0], body.position[1], z])


def is_occluded(observer: Pose3, point, occluders: Sequence[Body], skip_id=None):
    start = observer.position
    seg = np.asarray(point, dtype=float) - start
    seg_len2 = float(seg[0] ** 2 + seg[1] ** 2)
    for obstacle in occluders:
        if obstacle.id == skip_id:
            continue
        rel = obstacle.position[:2] - start[:2]
        t = 0.0 if seg_len2 == 0 else min(max(float(rel @ seg[:2]) / seg_len2, 0.0), 1.0)
        closest = start + t * seg
        if np.hypot(*(closest[:2] - obstacle.position[:2])) >= obstacle.radius:
            continue
        top = obstacle.position[2] - obstacle.height
        if top <= closest[2] <= obstacle.position[2]:
            return True
    return False


def _clip_box(rig: CameraRig, cx, cy, w, h):
    half_w, half_h = rig.width / 2.0, rig.height / 2.0
    x0, x1 = max(cx - w / 2.0, -half_w), min(cx + w / 2.0, half_w)
    y0, y1 = max(cy - h / 2.0, -half_h), min(cy + h / 2.0, half_h)
    truncated = (x0, x1, y0, y1) != (cx - w / 2.0, cx + w / 2.0, cy - h / 2.0, cy + h / 2.0)
    return (x0, y0, x1, y1), truncated


def project(rig: CameraRig, observer: Pose3, body: Body, noise: NoiseModel, rng,
            camera_index=0, tick=0, occluders: Sequence[Body] = ()) -> Optional[Detection]:
    center = apparent_center(observer, body)
    local = world_to_local(observer, center)
    cam = camera_frame(local, rig.mount_yaws[camera_index])
    distance = float(np.linalg.norm(cam))

    if cam[1] <= 0 or distance <= body.radius or distance > noise.range_m:
        return None
    if abs(cam[0]) / distance > math.sin(rig.fov_h / 2.0):
        return None
    if abs(cam[2]) / distance > math.sin(rig.fov_v / 2.0):
        return None
    if occluders and is_occluded(observer, center, occluders, skip_id=body.id):
        return None

    if noise.p_miss > 0 and rng.random() < noise.p_miss:
        return None

    cx = cam[0] * rig.px_per_sine_h / distance
    cy = cam[2] * rig.px_per_sine_v / distance
    w = 2.0 * body.radius * rig.px_per_sine_h / distance
    h = 2.0 * body.radius * rig.px_per_sine_v / distance

    if noise.sigma_px > 0:
        dcx, dcy, dw, dh = rng.normal(0.0, noise.sigma_px, size=4)
        cx, cy = cx + dcx, cy + dcy
        w, h = max(w + dw, 1.0), max(h + dh, 1.0)
        cx = min(max(cx, -rig.width / 2.0), rig.width / 2.0)
        cy = min(max(cy, -rig.height / 2.0), rig.height / 2.0)

    bbox, truncated = _clip_box(rig, cx, cy, w, h)
    return Detection(
        camera_index=camera_index,
        cx=float(cx),
        cy=float(cy),
        w_px=float(bbox[2] - bbox[0]),
        h_px=float(bbox[3] - bbox[1]),
        kind=body.kind,
        tick=tick,
        bbox=tuple(float(v) for v in bbox),
        truncated=truncated,
    )


def _false_positive(rig: CameraRig, noise: NoiseModel, rng, camera_index, tick) -> Detection:
    kinds = (BodyKind.TARGET, BodyKind.CAPTOR, BodyKind.OBSTACLE)
    kind = kinds[int(rng.integers(len(kinds)))]
    distance = rng.uniform(1.0, noise.range_m)
    w = 2.0 * CAPTOR_RADIUS * rig.px_per_sine_h / distance
    h = 2.0 * CAPTOR_RADIUS * rig.px_per_sine_v / distance
    cx = rng.uniform(-rig.width / 2.0, rig.width / 2.0)
    cy = rng.uniform(-rig.height / 2.0, rig.height / 2.0)
    bbox, truncated = _clip_box(rig, cx, cy, w, h)
    return Detection(camera_index, float(cx), float(cy), float(bbox[2] - bbox[0]),
                     float(bbox[3] - bbox[1]), kind, tick, tuple(float(v) for v in bbox), truncated)


def sense(rig: CameraRig, observer: Body, world: WorldState, noise: NoiseModel, rng,
          tick=None) -> List[Detection]:
    """All detections of one tick, ordered by (camera_index, body id)."""
    tick = world.tick if tick is None else tick
    occluders = world.of_kind(BodyKind.OBSTACLE)
    others = [b for b in world.bodies if b.id != observer.id]
    detections = []
    for camera_index in range(len(rig.mount_yaws)):
        for body in others:
            det = project(rig, observer.pose, body, noise, rng, camera_index, tick, occluders)
            if det is not None:
                detections.append(det)
        if noise.p_false > 0 and rng.random() < noise.p_false:
            detections.append(_false_positive(rig, noise, rng, camera_index, tick))
    return detections
