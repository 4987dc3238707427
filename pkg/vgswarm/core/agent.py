"""
One captor's onboard loop.

The agent sees only its own camera detections and its own odometry. Everything
it knows about other bodies comes through its local map.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from vgswarm.core.camera import CameraRig, Detection
from vgswarm.core.estimation import PowerLawFit, estimate_all
from vgswarm.core.fsm import AgentBehavior, AgentState, BehaviorParams, act, log_state, transition
from vgswarm.core.grn import FieldSet, GrnParams, compute_fields
from vgswarm.core.localmap import LocalMap, associate, nearest_target, snapshot
from vgswarm.core.planner import MotionCommand, PlannerParams, SamplingScheme
from vgswarm.core.world import BodyKind, Pose3, local_to_world_vector, world_to_local_vector


@dataclass(eq=False)
class Odometry:
    """The agent's own pose and its world displacement since the previous tick."""
    pose: Pose3
    displacement: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(eq=False)
class AgentOutput:
    command: MotionCommand
    world_velocity: np.ndarray
    state: AgentState
    C_C: Optional[float]
    C_P: Optional[float]
    pattern_r: Optional[float]
    has_target: bool
    fields: Optional[FieldSet] = None


class CaptorAgent:
    def __init__(self, agent_id, fits: Dict[BodyKind, PowerLawFit], rng, dt, max_speed,
                 hold_altitude, rig: CameraRig = None, grn: GrnParams = None,
                 planner: PlannerParams = None, scheme: SamplingScheme = None,
                 behavior: BehaviorParams = None, bounds: Optional[Tuple[float, float, float, float]] = None,
                 n_max=10, corrected=False):
        self.agent_id = agent_id
        self.fits = fits
        self.rng = rng
        self.dt = dt
        self.max_speed = max_speed
        self.hold_altitude = hold_altitude
        self.rig = rig or CameraRig()
        self.grn = grn or GrnParams()
        self.planner = planner or PlannerParams()
        self.scheme = scheme or SamplingScheme()
        self.bounds = bounds
        self.corrected = corrected
        self.behavior = AgentBehavior(params=behavior or BehaviorParams())
        self.local_map = LocalMap(N_max=n_max)
        self.fields: Optional[FieldSet] = None

    @property
    def state(self):
        return self.behavior.state

    def step(self, tick, detections: Sequence[Detection], odometry: Odometry) -> AgentOutput:
        pose = odometry.pose
        moved = world_to_local_vector(pose, odometry.displacement)
        self.local_map.apply_ego_motion(moved)

        positions = estimate_all(detections, self.fits, self.rig, self.corrected)
        self.local_map = associate(self.local_map, detections, positions, tick=tick, dt=self.dt)

        targets, obstacles, neighbors = snapshot(self.local_map)
        tracked = nearest_target(self.local_map)
        previous, self.fields = self.fields, None
        if tracked is not None:
            self.fields = compute_fields(targets, obstacles, neighbors, self.grn,
                                         previous=previous, target=tracked.position, displacement=moved)
        has_target = self.fields is not None and self.fields.pattern is not None

        C_C = self.fields.C_C if has_target else None
        C_P = self.fields.C_P if has_target else None
        self.behavior = transition(self.behavior, has_target, C_C, C_P)
        log_state(tick, self.agent_id, self.behavior, C_C, C_P)

        if tracked is not None:
            delta_h = tracked.Z
        else:
            delta_h = self.hold_altitude - pose.altitude
        self.behavior, command = act(self.behavior, self.fields, self.scheme, self.planner, self.rng,
                                     self.dt, self.max_speed, pose, delta_h=delta_h, bounds=self.bounds)

        return AgentOutput(
            command=command,
            world_velocity=local_to_world_vector(pose, command.velocity),
            state=self.behavior.state,
            C_C=C_C,
            C_P=C_P,
            pattern_r=self.fields.pattern.mean_radius if has_target else None,
            has_target=has_target,
            fields=self.fields,
        )
