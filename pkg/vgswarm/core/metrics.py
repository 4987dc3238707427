"""
Entrapment metrics over a RunLog: ring distance error, the three-sector success
test, average speed and the success-rate table.
"""

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd

from vgswarm.core.runlog import RunLog
from vgswarm.core.sim import FAILED, searching_states

SECTORS = 3
DEFAULT_CHECKPOINTS = (6.0, 10.0, 14.0)
REPORT_COLUMNS = ["run_id", "scenario", "seed", "initial_distance_m", "dt", "success_tick", "success_time_s",
                  "avg_speed_mps", "mean_dbar_after_success", "collisions"]


def ring_errors(captor_positions, target_position, R):
    pts = np.atleast_2d(np.asarray(captor_positions, dtype=float))[:, :2]
    target = np.asarray(target_position, dtype=float)[:2]
    return np.abs(np.linalg.norm(pts - target, axis=1) - R)


def distance_error(captor_positions, target_position, R) -> float:
    """Mean |planar range - R| over the captors."""
    if len(captor_positions) == 0:
        raise ValueError("need at least one captor")
    return float(ring_errors(captor_positions, target_position, R).mean())


def sector_of(captor_positions, target_position, sector_origin=0.0):
    pts = np.atleast_2d(np.asarray(captor_positions, dtype=float))[:, :2]
    d = pts - np.asarray(target_position, dtype=float)[:2]
    bearing = (np.arctan2(d[:, 1], d[:, 0]) - sector_origin) % (2.0 * np.pi)
    width = 2.0 * np.pi / SECTORS
    # tolerance keeps bearings such as 120 deg, rebuilt from cos/sin, in their own sector
    return np.floor((bearing + 1e-9) / width).astype(int) % SECTORS


def is_success(captor_positions, target_position, R, band=0.5, speeds=None, stop_speed=math.inf,
               strict=False, sector_origin=0.0) -> bool:
    """Every 120 deg sector holds a stopped captor within `band` of the ring (two each when strict)."""
    if len(captor_positions) == 0:
        return False
    errors = ring_errors(captor_positions, target_position, R)
    ok = errors <= band
    if speeds is not None:
        ok &= np.asarray(speeds, dtype=float) <= stop_speed
    counts = np.bincount(sector_of(captor_positions, target_position, sector_origin)[ok], minlength=SECTORS)
    need = 2 if strict else 1
    return bool(np.all(counts >= need))


@dataclass
class EntrapmentReport:
    d_bar: pd.Series
    d_i: pd.DataFrame
    success_tick: Optional[int]
    avg_speed: float
    collisions: int
    mean_dbar_after_success: Optional[float]
    engaged_tick: Optional[int] = None
    ring_radius: pd.Series = field(default_factory=lambda: pd.Series(dtype=float))


def _collision_count(log: RunLog):
    kinds = {r["body_id"]: r["kind"] for r in log.rows}
    pairs = set()
    for c in log.collisions:
        ka, kb = kinds.get(c["body_a"], "obstacle"), kinds.get(c["body_b"], "obstacle")
        if "captor" in (ka, kb) and "target" not in (ka, kb):
            pairs.add((c["body_a"], c["body_b"]))
    return len(pairs)


def report(log: RunLog, band=0.5, strict=False, stop_window=5, stop_fraction=0.1,
           from_tick=0) -> EntrapmentReport:
    """Entrapment metrics of a run; `success_tick` is the first success at or after `from_tick`."""
    df = log.frame()
    captors = df[df["kind"] == "captor"].copy()
    targets = df[df["kind"] == "target"]
    empty = pd.Series(dtype=float)
    if captors.empty or targets.empty:
        return EntrapmentReport(empty, pd.DataFrame(), None, 0.0, _collision_count(log), None)

    captors["speed"] = np.sqrt(captors["vx"] ** 2 + captors["vy"] ** 2 + captors["vz"] ** 2)
    captors["stop_speed"] = (captors.groupby("body_id")["speed"]
                             .transform(lambda s: s.rolling(stop_window, min_periods=1).mean()))
    target_id = targets["body_id"].min()
    target_by_tick = targets[targets["body_id"] == target_id].set_index("tick")[["x", "y"]]
    stop_speed = stop_fraction * log.captor_max_speed

    d_bar, radii, d_rows = {}, {}, []
    success_tick = None
    for tick, group in captors.groupby("tick", sort=True):
        live = group[group["state"] != FAILED]
        if live.empty or tick not in target_by_tick.index:
            continue
        target = target_by_tick.loc[tick].to_numpy(dtype=float)
        pattern_r = pd.to_numeric(live["pattern_r"], errors="coerce").dropna()
        R = float(pattern_r.mean()) if len(pattern_r) else log.safe_distance
        pts = live[["x", "y"]].to_numpy(dtype=float)
        errors = ring_errors(pts, target, R)
        d_bar[tick] = float(errors.mean())
        radii[tick] = R
        d_rows.extend({"tick": tick, "body_id": b, "d_i": e} for b, e in zip(live["body_id"], errors))
        if success_tick is None and tick >= from_tick and is_success(
                pts, target, R, band, live["stop_speed"].to_numpy(), stop_speed, strict):
            success_tick = int(tick)

    engaged = captors[~captors["state"].isin(searching_states())]
    engaged_tick = int(engaged["tick"].min()) if not engaged.empty else None
    avg_speed = 0.0
    if engaged_tick is not None:
        end = success_tick if success_tick is not None else int(captors["tick"].max())
        window = captors[(captors["tick"] >= engaged_tick) & (captors["tick"] <= end)
                         & (captors["state"] != FAILED)]
        avg_speed = float(window["speed"].mean()) if not window.empty else 0.0

    d_bar = pd.Series(d_bar, name="d_bar", dtype=float)
    after = None
    if success_tick is not None:
        tail = d_bar[d_bar.index >= success_tick]
        after = float(tail.mean()) if len(tail) else None

    return EntrapmentReport(
        d_bar=d_bar,
        d_i=pd.DataFrame(d_rows, columns=["tick", "body_id", "d_i"]),
        success_tick=success_tick,
        avg_speed=avg_speed,
        collisions=_collision_count(log),
        mean_dbar_after_success=after,
        engaged_tick=engaged_tick,
        ring_radius=pd.Series(radii, name="R", dtype=float),
    )


def report_row(rep: EntrapmentReport, log: RunLog, run_id=0):
    return {
        "run_id": run_id,
        "scenario": log.scenario,
        "seed": log.seed,
        "initial_distance_m": log.initial_distance,
        "dt": log.dt,
        "success_tick": rep.success_tick,
        "success_time_s": None if rep.success_tick is None else rep.success_tick * log.dt,
        "avg_speed_mps": rep.avg_speed,
        "mean_dbar_after_success": rep.mean_dbar_after_success,
        "collisions": rep.collisions,
    }


def checkpoint_column(seconds):
    return f"rate_at_{float(seconds):g}s"


def summarize(rows, checkpoints: Sequence[float] = DEFAULT_CHECKPOINTS) -> pd.DataFrame:
    """Success rate (%) by initial distance at each checkpoint, plus mean speed of successful runs."""
    columns = ["initial_distance_m"] + [checkpoint_column(c) for c in checkpoints] + ["avg_speed_mps", "runs"]
    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows), columns=REPORT_COLUMNS)
    if frame.empty:
        return pd.DataFrame(columns=columns)

    out = []
    for distance, group in frame.groupby("initial_distance_m", sort=True):
        times = pd.to_numeric(group["success_time_s"], errors="coerce")
        row = {"initial_distance_m": float(distance)}
        for c in checkpoints:
            row[checkpoint_column(c)] = 100.0 * float((times <= c + 1e-9).sum()) / len(group)
        succeeded = group[times.notna()]
        row["avg_speed_mps"] = float(succeeded["avg_speed_mps"].mean()) if len(succeeded) else float("nan")
        row["runs"] = len(group)
        out.append(row)
    return pd.DataFrame(out, columns=columns)


def plot_data(log: RunLog, rep: EntrapmentReport) -> pd.DataFrame:
    df = log.frame()[["tick", "body_id", "kind", "x", "y"]].copy()
    df.insert(1, "t_s", df["tick"] * log.dt)
    df["d_bar"] = df["tick"].map(rep.d_bar)
    return df[["tick", "t_s", "body_id", "kind", "x", "y", "d_bar"]]


def load_reports(paths: Iterable) -> pd.DataFrame:
    frames = [pd.read_csv(p) for p in paths]
    if not frames:
        return pd.DataFrame(columns=REPORT_COLUMNS)
    return pd.concat(frames, ignore_index=True)
