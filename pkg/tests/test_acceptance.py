"""Long multi-seed runs; deselected by default, run with `pytest -m slow`."""

import numpy as np
import pytest

from vgswarm.core import metrics
from vgswarm.core.scenario import build_preset
from vgswarm.core.sim import run

SEEDS = range(20)

pytestmark = pytest.mark.slow


def runs(preset, max_ticks, distance=None, seeds=SEEDS):
    return [run(build_preset(preset, distance=distance, seed=seed), max_ticks=max_ticks) for seed in seeds]


def collision_free(logs):
    clean = sum(metrics.report(log).collisions == 0 for log in logs)
    return clean >= 0.95 * len(logs)


@pytest.mark.parametrize("distance", [6.0, 10.0, 14.0])
def test_open_field_entrapment_within_fourteen_seconds(distance):
    logs = runs("open-4v1", 280, distance)
    successes = sum(metrics.report(log).success_tick is not None for log in logs)
    assert successes >= 18
    assert collision_free(logs)


def test_ring_error_stays_small_after_success():
    for log in runs("open-4v1", 400, 10.0, seeds=range(10)):
        rep = metrics.report(log)
        if rep.success_tick is None:
            continue
        frame = log.frame()
        target = frame[frame["kind"] == "target"].set_index("tick")
        static = target.index[np.hypot(target["vx"], target["vy"]) == 0.0]
        tail = rep.d_bar[(rep.d_bar.index >= rep.success_tick) & rep.d_bar.index.isin(static)]
        if len(tail):
            assert (tail <= 1.0).mean() >= 0.8


def test_recapture_after_escape():
    logs = runs("escape-recapture", 600)
    # the dash starts at tick 300 and covers 2 m at 3 m/s
    recaptured = sum(metrics.report(log, from_tick=315).success_tick is not None for log in logs)
    assert recaptured >= 16
    assert collision_free(logs)


def test_survivors_finish_after_failures():
    logs = runs("failure-injection", 700)
    successes = sum(metrics.report(log, from_tick=350).success_tick is not None for log in logs)
    assert successes >= 16
    assert collision_free(logs)
