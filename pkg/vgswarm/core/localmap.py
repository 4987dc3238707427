"""Per-agent short-term object memory: IoU association and lost-counter pruning."""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from vgswarm.core.camera import Detection
from vgswarm.core.estimation import DepthFilter, RelPosition, kalman_update
from vgswarm.core.world import BodyKind

DEFAULT_N_MAX = 10


class ObjectType(str, Enum):
    TARGET = "target"
    OBSTACLE = "obstacle"
    NEIGHBOR = "neighbor"

    @classmethod
    def of(cls, kind: BodyKind):
        return {BodyKind.TARGET: cls.TARGET,
                BodyKind.OBSTACLE: cls.OBSTACLE,
                BodyKind.CAPTOR: cls.NEIGHBOR}[kind]


@dataclass
class ObjectRecord:
    record_id: int
    X: float
    Y: float
    Z: float
    x: float
    y: float
    W_box: float
    H_box: float
    T: ObjectType
    camera_index: int
    bbox: Tuple[float, float, float, float]
    filter: DepthFilter
    N: int = 0
    last_tick: int = 0

    @property
    def position(self):
        return np.array([self.X, self.Y, self.Z])


@dataclass
class LocalMap:
    records: List[ObjectRecord] = field(default_factory=list)
    N_max: int = DEFAULT_N_MAX
    next_id: int = 0
    q: float = 0.5
    range_proportional: float = 0.08

    def apply_ego_motion(self, displacement):
        """Shift records by the observer's own displacement (given in its local frame)."""
        dx, dy, dz = (float(v) for v in displacement)
        for rec in self.records:
            rec.X -= dx
            rec.Y -= dy
            rec.Z -= dz

    def has(self, kind: ObjectType):
        return any(r.T is kind for r in self.records)


def iou(box_a, box_b):
    ax0, ay0, ax1, ay1 = box_a
    bx0, by0, bx1, by1 = box_b
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return inter / union


def _candidate_pairs(records: Sequence[ObjectRecord], detections: Sequence[Detection]):
    pairs = []
    for d_idx, det in enumerate(detections):
        kind = ObjectType.of(det.kind)
        for rec in records:
            if rec.T is not kind or rec.camera_index != det.camera_index:
                continue
            score = iou(rec.bbox, det.bbox)
            if score > 0:
                pairs.append((score, rec.record_id, d_idx, rec))
    # descending IoU, ties to the older record, then detection order
    pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
    return pairs


def _refresh(rec: ObjectRecord, det: Detection, pos: RelPosition, tick, dt):
    rec.filter = kalman_update(rec.filter, pos.D, dt)
    scale = rec.filter.state / pos.D if pos.D > 0 else 1.0
    rec.X, rec.Y, rec.Z = pos.X * scale, pos.Y * scale, pos.Z * scale
    rec.x, rec.y = det.cx, det.cy
    rec.W_box, rec.H_box = det.w_px, det.h_px
    rec.bbox = det.bbox
    rec.N = 0
    rec.last_tick = tick


def associate(lmap: LocalMap, detections: Sequence[Detection], positions: Sequence[RelPosition],
              tick=0, dt=0.05) -> LocalMap:
    """Greedy one-to-one IoU matching, spawn unmatched detections, age and prune unmatched records."""
    if len(detections) != len(positions):
        raise ValueError("detections and positions must align 1:1")

    matched_records, matched_dets = set(), set()
    for _, record_id, d_idx, rec in _candidate_pairs(lmap.records, detections):
        if record_id in matched_records or d_idx in matched_dets:
            continue
        matched_records.add(record_id)
        matched_dets.add(d_idx)
        _refresh(rec, detections[d_idx], positions[d_idx], tick, dt)

    survivors = []
    for rec in lmap.records:
        if rec.record_id not in matched_records:
            rec.N += 1
        if rec.N <= lmap.N_max:
            survivors.append(rec)

    next_id = lmap.next_id
    for d_idx, (det, pos) in enumerate(zip(detections, positions)):
        if d_idx in matched_dets:
            continue
        survivors.append(ObjectRecord(
            record_id=next_id,
            X=pos.X, Y=pos.Y, Z=pos.Z,
            x=det.cx, y=det.cy, W_box=det.w_px, H_box=det.h_px,
            T=ObjectType.of(det.kind),
            camera_index=det.camera_index,
            bbox=det.bbox,
            filter=DepthFilter.start(pos.D, q=lmap.q, range_proportional=lmap.range_proportional),
            N=0,
            last_tick=tick,
        ))
        next_id += 1

    return replace(lmap, records=survivors, next_id=next_id)


def snapshot(lmap: LocalMap):
    """Live record positions split by type: (targets, obstacles, neighbors)."""
    targets, obstacles, neighbors = [], [], []
    buckets = {ObjectType.TARGET: targets, ObjectType.OBSTACLE: obstacles, ObjectType.NEIGHBOR: neighbors}
    for rec in lmap.records:
        buckets[rec.T].append(rec.position)
    return targets, obstacles, neighbors


def nearest_target(lmap: LocalMap) -> Optional[ObjectRecord]:
    targets = [r for r in lmap.records if r.T is ObjectType.TARGET]
    if not targets:
        return None
    return min(targets, key=lambda r: (r.X * r.X + r.Y * r.Y, r.record_id))
