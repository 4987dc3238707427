"""Per-run record of poses, states and events, and its CSV files."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List

import pandas as pd

from vgswarm.errors import OutputExistsError

RUNLOG_COLUMNS = ["tick", "body_id", "kind", "state", "x", "y", "z", "vx", "vy", "vz",
                  "C_C", "C_P", "pattern_r", "has_target"]
COLLISION_COLUMNS = ["tick", "body_a", "body_b"]
DETECTION_COLUMNS = ["tick", "observer_id", "camera_index", "kind", "cx", "cy", "w_px", "h_px", "truncated"]

FLOAT_FORMAT = "%.6f"


@dataclass
class RunLog:
    scenario: str
    seed: int
    dt: float
    initial_distance: float
    safe_distance: float
    captor_max_speed: float
    rows: List[Dict] = field(default_factory=list)
    collisions: List[Dict] = field(default_factory=list)
    detections: List[Dict] = field(default_factory=list)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=RUNLOG_COLUMNS)

    def collision_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.collisions, columns=COLLISION_COLUMNS)

    def detection_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.detections, columns=DETECTION_COLUMNS)

    @property
    def n_ticks(self):
        return 1 + max((r["tick"] for r in self.rows), default=-1)


def prepare_output(path, force=False):
    """Refuse to clobber an existing file unless forced; create parent directories."""
    path = Path(path)
    if path.exists() and not force:
        raise OutputExistsError(f"{path} already exists (use --force to overwrite)")
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_frame(frame: pd.DataFrame, path, force=False):
    path = prepare_output(path, force)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def write_runlog(log: RunLog, out_dir, force=False):
    out_dir = Path(out_dir)
    targets = {
        "runlog.csv": log.frame(),
        "collisions.csv": log.collision_frame(),
        "detections.csv": log.detection_frame(),
    }
    for name in targets:
        prepare_output(out_dir / name, force)
    return [write_frame(frame, out_dir / name, force=True) for name, frame in targets.items()]


def read_runlog(out_dir) -> pd.DataFrame:
    return pd.read_csv(Path(out_dir) / "runlog.csv")
