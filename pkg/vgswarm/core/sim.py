"""
Experiment engine.

Each tick every live captor senses the frozen world, runs its own onboard loop
and returns a velocity; targets follow their policies; then all commands are
applied together and collisions are recorded.
"""

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Optional

import numpy as np

from vgswarm.core.agent import CaptorAgent, Odometry
from vgswarm.core.camera import CameraRig, sense
from vgswarm.core.estimation import calibrate
from vgswarm.core.fsm import AgentState
from vgswarm.core.grn import FieldSet
from vgswarm.core.runlog import RunLog
from vgswarm.core.scenario import Scenario, TargetController, build_world, validate
from vgswarm.core.world import BodyKind, check_collisions, step_kinematics
from vgswarm.utils.logger import logger
from vgswarm.utils.rng import stream

LANDING_RATE = 1.0
FAILED = "failed"

FieldSink = Callable[[int, int, FieldSet], None]


def build_agents(scenario: Scenario, world, fits, seed, rig: CameraRig) -> Dict[int, CaptorAgent]:
    agents = {}
    for body in world.of_kind(BodyKind.CAPTOR):
        agents[body.id] = CaptorAgent(
            agent_id=body.id,
            fits=fits,
            rng=stream(seed, f"agent/{body.id}"),
            dt=scenario.dt,
            max_speed=body.max_speed,
            hold_altitude=body.pose.altitude,
            rig=rig,
            grn=scenario.grn,
            planner=scenario.planner,
            scheme=scenario.scheme,
            behavior=scenario.behavior,
            bounds=scenario.bounds,
        )
    return agents


def _row(tick, body, state, velocity, out=None):
    return {
        "tick": tick,
        "body_id": body.id,
        "kind": body.kind.value,
        "state": state,
        "x": float(body.position[0]),
        "y": float(body.position[1]),
        "z": float(body.position[2]),
        "vx": float(velocity[0]),
        "vy": float(velocity[1]),
        "vz": float(velocity[2]),
        "C_C": None if out is None else out.C_C,
        "C_P": None if out is None else out.C_P,
        "pattern_r": None if out is None else out.pattern_r,
        "has_target": False if out is None else out.has_target,
    }


def run(scenario: Scenario, seed=None, parallel=False, workers=None, latency_ticks=None, max_ticks=None,
        fits=None, field_sink: Optional[FieldSink] = None, dump_agent=0) -> RunLog:
    validate(scenario)
    seed = scenario.seed if seed is None else int(seed)
    latency = scenario.latency_ticks if latency_ticks is None else int(latency_ticks)
    max_ticks = scenario.max_ticks if max_ticks is None else int(max_ticks)
    rig = CameraRig()

    if fits is None:
        fits, _ = calibrate(rig, scenario.noise, stream(seed, "calibration"),
                            source=scenario.calibration_source)

    world = build_world(scenario)
    agents = build_agents(scenario, world, fits, seed, rig)
    cameras = {i: stream(seed, f"camera/{i}") for i in agents}
    queues = {i: deque() for i in agents}
    controllers = {b.id: TargetController(spec, stream(seed, f"target/{b.id}"))
                   for b, spec in zip(world.of_kind(BodyKind.TARGET), scenario.targets)}
    failures = {}
    for tick, captor_id in scenario.failures:
        failures.setdefault(tick, []).append(captor_id)

    log = RunLog(scenario=scenario.name, seed=seed, dt=scenario.dt,
                 initial_distance=scenario.mean_initial_distance(),
                 safe_distance=scenario.grn.safe_distance,
                 captor_max_speed=scenario.captor_max_speed)
    previous = {b.id: b.position.copy() for b in world.bodies}

    logger.info(f"🚀 run {scenario.name} seed={seed}: {len(agents)} captors, "
                f"{len(controllers)} targets, {len(world.of_kind(BodyKind.OBSTACLE))} obstacles, "
                f"{max_ticks} ticks")

    pool = ThreadPoolExecutor(max_workers=workers) if parallel and agents else None
    try:
        for tick in range(max_ticks):
            for captor_id in failures.get(tick, ()):
                world.body(captor_id).failed = True
                logger.info(f"captor {captor_id} lands at tick {tick}")

            live = [b for b in world.of_kind(BodyKind.CAPTOR) if not b.failed]
            inputs = {}
            for body in live:
                detections = sense(rig, body, world, scenario.noise, cameras[body.id], tick=tick)
                for det in detections:
                    log.detections.append({
                        "tick": tick, "observer_id": body.id, "camera_index": det.camera_index,
                        "kind": det.kind.value, "cx": det.cx, "cy": det.cy, "w_px": det.w_px,
                        "h_px": det.h_px, "truncated": det.truncated,
                    })
                queue = queues[body.id]
                queue.append(detections)
                delivered = queue.popleft() if len(queue) > latency else []
                odometry = Odometry(pose=body.pose.copy(), displacement=body.position - previous[body.id])
                inputs[body.id] = (delivered, odometry)

            ids = [b.id for b in live]
            if pool is not None:
                results = list(pool.map(lambda i: agents[i].step(tick, *inputs[i]), ids))
            else:
                results = [agents[i].step(tick, *inputs[i]) for i in ids]
            outputs = dict(zip(ids, results))

            if field_sink is not None and dump_agent in outputs and outputs[dump_agent].fields is not None:
                field_sink(tick, dump_agent, outputs[dump_agent].fields)

            commands = {i: out.world_velocity for i, out in outputs.items()}
            captor_positions = [b.position for b in world.of_kind(BodyKind.CAPTOR)]
            for target in world.of_kind(BodyKind.TARGET):
                commands[target.id] = controllers[target.id].velocity(target, tick, captor_positions,
                                                                      scenario.dt)

            for body in world.bodies:
                if body.kind is BodyKind.CAPTOR:
                    out = outputs.get(body.id)
                    if out is None:
                        log.rows.append(_row(tick, body, FAILED, np.zeros(3)))
                    else:
                        log.rows.append(_row(tick, body, out.state.value, out.world_velocity, out))
                elif body.kind is BodyKind.TARGET:
                    link = controllers[body.id].spec.policy.active(tick)
                    state = "idle" if link is None else link.kind.value
                    log.rows.append(_row(tick, body, state, commands[body.id]))

            previous = {b.id: b.position.copy() for b in world.bodies}
            world = step_kinematics(world, commands)
            for body in world.of_kind(BodyKind.CAPTOR):
                if body.failed:
                    body.pose.position[2] = min(-body.radius, body.position[2] + LANDING_RATE * scenario.dt)

            for a, b in check_collisions(world):
                log.collisions.append({"tick": world.tick, "body_a": a, "body_b": b})
    finally:
        if pool is not None:
            pool.shutdown(wait=True)

    if log.collisions:
        logger.warning(f"run {scenario.name} seed={seed}: {len(log.collisions)} collision records")
    logger.info(f"✅ run {scenario.name} seed={seed} finished after {max_ticks} ticks")
    return log


def searching_states():
    return {AgentState.INIT.value, AgentState.SEARCHING.value, FAILED}
