"""Per-agent behaviour states and the triggers between them."""

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from vgswarm.core.grn import FieldSet
from vgswarm.core.planner import PlannerParams, SamplingScheme, make_command, plan_motion
from vgswarm.core.world import Pose3, local_to_world_vector, world_to_local_vector
from vgswarm.utils.logger import logger


class AgentState(str, Enum):
    INIT = "init"
    SEARCHING = "searching"
    APPROACHING = "approaching"
    DEPARTING = "departing"
    KEEPING = "keeping"


@dataclass(frozen=True)
class BehaviorParams:
    epsilon_c: float = 0.02
    # random-walk turn noise, degrees per sqrt(second)
    turn_sigma_deg: float = 15.0

    def __post_init__(self):
        if self.epsilon_c < 0:
            raise ValueError("epsilon_c must be non-negative")
        if self.turn_sigma_deg < 0:
            raise ValueError("turn_sigma_deg must be non-negative")


@dataclass(frozen=True)
class AgentBehavior:
    state: AgentState = AgentState.INIT
    params: BehaviorParams = BehaviorParams()
    # local-frame search heading, same convention as the motion vector
    search_heading: float = 0.0

    @property
    def epsilon_c(self):
        return self.params.epsilon_c


def classify(C_C, C_P, epsilon_c) -> AgentState:
    if C_C > C_P + epsilon_c:
        return AgentState.APPROACHING
    if C_C < C_P - epsilon_c:
        return AgentState.DEPARTING
    return AgentState.KEEPING


def transition(behavior: AgentBehavior, has_target: bool, C_C=None, C_P=None) -> AgentBehavior:
    if behavior.state is AgentState.INIT or not has_target:
        return replace(behavior, state=AgentState.SEARCHING)
    if C_C is None or C_P is None or not (math.isfinite(C_C) and math.isfinite(C_P)):
        raise ValueError("C_C and C_P must be finite while a target is tracked")
    return replace(behavior, state=classify(C_C, C_P, behavior.epsilon_c))


def heading_vector(theta):
    return np.array([math.sin(theta), math.cos(theta), 0.0])


def reflect_heading(theta, pose: Pose3, step, bounds: Optional[Tuple[float, float, float, float]]):
    """Mirror the world-frame component of the search heading that would carry the agent out of bounds."""
    if bounds is None:
        return theta
    world = local_to_world_vector(pose, heading_vector(theta))
    nxt = pose.position[:2] + step * world[:2]
    xmin, ymin, xmax, ymax = bounds
    flipped = False
    if not xmin <= nxt[0] <= xmax:
        world[0] = -world[0]
        flipped = True
    if not ymin <= nxt[1] <= ymax:
        world[1] = -world[1]
        flipped = True
    if not flipped:
        return theta
    local = world_to_local_vector(pose, world)
    return math.atan2(local[0], local[1]) % (2.0 * math.pi)


def search_step(behavior: AgentBehavior, rng, dt, s_max, pose: Pose3, bounds=None):
    """Persistent heading with Gaussian turn noise scaled by sqrt(dt); returns (behavior, theta)."""
    sigma = math.radians(behavior.params.turn_sigma_deg) * math.sqrt(dt)
    theta = behavior.search_heading
    if sigma > 0:
        theta += float(rng.normal(0.0, sigma))
    theta = reflect_heading(theta % (2.0 * math.pi), pose, s_max, bounds)
    return replace(behavior, search_heading=theta), theta


def act(behavior: AgentBehavior, fields: Optional[FieldSet], scheme: SamplingScheme,
        params: PlannerParams, rng, dt, max_speed, pose: Pose3, delta_h=0.0, bounds=None):
    """Command for the current state; returns (behavior, MotionCommand)."""
    if behavior.state is AgentState.INIT:
        raise ValueError("no command is issued from the init state")
    if behavior.state is AgentState.SEARCHING or fields is None or fields.pattern is None:
        s_max = max_speed * dt if params.s_max is None else params.s_max
        behavior, theta = search_step(behavior, rng, dt, s_max, pose, bounds)
        return behavior, make_command(theta, delta_h, params, s_max, dt, max_speed)
    command = plan_motion(fields, scheme, params, dt, max_speed, delta_h=delta_h,
                          departing=behavior.state is AgentState.DEPARTING,
                          keeping=behavior.state is AgentState.KEEPING)
    return behavior, command


def log_state(tick, agent_id, behavior: AgentBehavior, C_C, C_P):
    cc = "-" if C_C is None else f"{C_C:.4f}"
    cp = "-" if C_P is None else f"{C_P:.4f}"
    logger.debug(f"fsm tick={tick} agent={agent_id} state={behavior.state.value} C_C={cc} C_P={cp}")
