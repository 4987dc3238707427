"""Repeated runs over seeds and initial distances, shared by the CLI and the HTTP layer."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import List, Sequence

import numpy as np
import pandas as pd

from vgswarm.core import metrics
from vgswarm.core.scenario import PRESETS, Scenario, build_preset, validate
from vgswarm.core.sim import run
from vgswarm.core.world import Pose3
from vgswarm.utils.logger import logger
from vgswarm.utils.rng import batch_seeds


def with_distance(scenario: Scenario, distance) -> Scenario:
    """Rescale captor offsets from the first target so their mean planar range is `distance`."""
    if not scenario.captors or not scenario.targets:
        return replace(scenario, initial_distance=float(distance))
    center = scenario.targets[0].pose.position
    ranges = [np.hypot(*(p.position[:2] - center[:2])) for p in scenario.captors]
    scale = float(distance) / float(np.mean(ranges))
    captors = []
    for pose in scenario.captors:
        pos = pose.position.copy()
        pos[:2] = center[:2] + scale * (pos[:2] - center[:2])
        captors.append(Pose3(pos, pose.heading))
    return validate(replace(scenario, captors=captors, initial_distance=float(distance)))


def scenario_for(base: Scenario, distance=None, seed=0, preset=False) -> Scenario:
    """Rebuild a preset for the distance and seed, or rescale a file scenario."""
    if preset and base.name in PRESETS:
        return build_preset(base.name, distance if distance is not None else base.initial_distance, seed)
    scenario = base if distance is None else with_distance(base, distance)
    return replace(scenario, seed=int(seed))


def run_once(scenario: Scenario, seed=None, strict=False, run_id=0, **kwargs):
    log = run(scenario, seed=seed, **kwargs)
    rep = metrics.report(log, strict=strict)
    return log, rep, metrics.report_row(rep, log, run_id)


def _job(args):
    base, distance, seed, strict, run_id, preset = args
    scenario = scenario_for(base, distance, seed, preset)
    _, _, row = run_once(scenario, seed=seed, strict=strict, run_id=run_id)
    return row


def run_batch(base: Scenario, n_seeds, distances: Sequence[float], base_seed=0, workers=1, strict=False,
              checkpoints=metrics.DEFAULT_CHECKPOINTS, preset=False):
    """Per-run report rows and the success-rate table."""
    if n_seeds < 1:
        raise ValueError("need at least one seed")
    seeds = batch_seeds(base_seed, n_seeds)
    jobs = []
    for distance in distances:
        for seed in seeds:
            jobs.append((base, float(distance), seed, strict, len(jobs), preset))
    logger.info(f"batch {base.name}: {len(jobs)} runs over distances {list(distances)} "
                f"with {workers} worker(s)")

    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows: List[dict] = list(pool.map(_job, jobs))
    else:
        rows = [_job(job) for job in jobs]

    reports = pd.DataFrame(rows, columns=metrics.REPORT_COLUMNS)
    return reports, metrics.summarize(reports, checkpoints)
