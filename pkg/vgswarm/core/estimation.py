"""
Monocular relative position estimation from bounding boxes.

Pipeline per detection: box area -> distance through a fitted power law
D = alpha * A**beta, smoothed by a scalar Kalman filter, then split into local
X/Y/Z from the box center offset and the camera FOV.
"""

import math
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
import pandas as pd

from vgswarm.core.camera import CameraRig, Detection, NoiseModel, body_frame, project
from vgswarm.core.world import CAPTOR_RADIUS, Body, BodyKind, Pose3
from vgswarm.errors import FitError, RejectedSampleError, UndefinedExpansionError
from vgswarm.utils.logger import logger


@dataclass(frozen=True)
class PowerLawFit:
    alpha: float
    beta: float
    rmse: float
    n_samples: int = 0

    def __post_init__(self):
        if not self.alpha > 0 or not self.beta < 0:
            raise FitError(f"non-physical fit alpha={self.alpha:.4g} beta={self.beta:.4g}")

    def predict(self, area):
        return self.alpha * float(area) ** self.beta


@dataclass(frozen=True)
class DepthFilter:
    state: float
    variance: float
    q: float = 0.5
    r: float = 0.0
    range_proportional: float = 0.08

    @classmethod
    def start(cls, measurement, q=0.5, range_proportional=0.08):
        r = (range_proportional * measurement) ** 2
        return cls(state=float(measurement), variance=max(r, 1e-6), q=q, r=r,
                   range_proportional=range_proportional)


@dataclass(frozen=True)
class RelPosition:
    X: float
    Y: float
    Z: float
    D: float
    clamped: bool = False

    @property
    def vector(self):
        return np.array([self.X, self.Y, self.Z])


def depth_from_expansion(s_i, s_j, cz_motion):
    """
    Depth at observation i from the expansion of the box between i and j.

    cz_motion is the observer's displacement toward the object between the two
    observations (negative when moving away).
    """
    if s_i <= 0 or s_j <= 0:
        raise RejectedSampleError("box areas must be positive")
    ratio = math.sqrt(s_i / s_j)
    if ratio == 1.0:
        raise UndefinedExpansionError("equal box areas carry no depth")
    depth = cz_motion / (1.0 - ratio)
    if not depth > 0:
        raise RejectedSampleError(f"expansion depth {depth:.3f} m contradicts the motion")
    return depth


MIN_FIT_SAMPLES = 8
MIN_FIT_SPAN = 4.0


def fit_power_law(samples: Iterable[Tuple[float, float]], strict=False) -> PowerLawFit:
    """
    Least-squares fit of log D = log alpha + beta log A.

    A fit on fewer than MIN_FIT_SAMPLES samples, or over less than a
    MIN_FIT_SPAN distance ratio, raises FitError when `strict` and only warns
    otherwise.
    """
    data = np.asarray(list(samples), dtype=float)
    if data.ndim != 2 or len(data) < 2:
        raise FitError("need at least two (area, distance) samples")
    areas, dists = data[:, 0], data[:, 1]
    if np.any(areas <= 0) or np.any(dists <= 0):
        raise FitError("areas and distances must be positive")
    log_a = np.log(areas)
    if np.ptp(log_a) == 0:
        raise FitError("degenerate samples: all areas equal")
    if len(data) < MIN_FIT_SAMPLES or dists.max() < MIN_FIT_SPAN * dists.min():
        message = (f"power-law fit on {len(data)} samples spanning "
                   f"{dists.min():.2f}-{dists.max():.2f} m is under-constrained")
        if strict:
            raise FitError(message)
        logger.warning(message)
    beta, log_alpha = np.polyfit(log_a, np.log(dists), 1)
    alpha = float(np.exp(log_alpha))
    pred = alpha * areas ** beta
    rmse = float(np.sqrt(np.mean((pred - dists) ** 2)))
    return PowerLawFit(alpha=alpha, beta=float(beta), rmse=rmse, n_samples=len(data))


def decompose(det: Detection, D, rig: CameraRig, corrected=False) -> RelPosition:
    if D <= 0:
        raise ValueError("distance must be positive")
    X = 2.0 * det.cx * D * math.sin(rig.fov_h / 2.0) / rig.width
    Z = 2.0 * det.cy * D * math.sin(rig.fov_v / 2.0) / rig.height
    planar2 = D * D - X * X - (Z * Z if corrected else 0.0)
    clamped = planar2 < 0
    if clamped:
        logger.debug(f"clamped Y for detection cam={det.camera_index} cx={det.cx:.1f} D={D:.2f}")
    Y = math.sqrt(max(0.0, planar2))
    x, y, z = body_frame((X, Y, Z), rig.mount_yaws[det.camera_index])
    return RelPosition(X=float(x), Y=float(y), Z=float(z), D=float(D), clamped=clamped)


def kalman_update(f: DepthFilter, measurement, dt) -> DepthFilter:
    if not math.isfinite(measurement):
        raise ValueError("measurement must be finite")
    variance = f.variance + f.q * dt
    r = (f.range_proportional * measurement) ** 2 if f.range_proportional else f.r
    gain = variance / (variance + r) if variance + r > 0 else 1.0
    state = f.state + gain * (measurement - f.state)
    return replace(f, state=state, variance=max((1.0 - gain) * variance, 1e-12), r=r)


# -- calibration -----------------------------------------------------------------

CALIBRATION_RADIUS = {
    BodyKind.TARGET: CAPTOR_RADIUS,
    BodyKind.CAPTOR: CAPTOR_RADIUS,
    BodyKind.OBSTACLE: 0.5,
}


def approach_observations(rig: CameraRig, noise: NoiseModel, rng, radius,
                          kind=BodyKind.TARGET, start=12.0, stop=1.0, speed=1.0, dt=0.05,
                          odometry_sigma=0.0):
    """
    Fly straight at a static body on the front boresight and record (area, travelled, true distance).

    travelled is what odometry reports, optionally with Gaussian error.
    """
    body = Body(id=-1, kind=kind, pose=Pose3([0.0, 0.0, 0.0]), radius=radius)
    frames = []
    travelled = 0.0
    n_steps = int(round((start - stop) / (speed * dt)))
    for step in range(n_steps + 1):
        true_travel = step * speed * dt
        observer = Pose3([0.0, -(start - true_travel), 0.0], heading=0.0)
        det = project(rig, observer, body, noise, rng, camera_index=0, tick=step)
        if step:
            travelled += speed * dt + (rng.normal(0.0, odometry_sigma) if odometry_sigma else 0.0)
        if det is not None:
            frames.append((det.area, travelled, start - true_travel))
    return frames


def expansion_samples(frames, max_ratio=0.7):
    """
    Pair every frame with the final (closest, largest) frame of the approach.

    Far frames then have a small area ratio, which keeps the depth well
    conditioned; pairs whose ratio exceeds max_ratio are skipped.
    """
    samples, rejected = [], 0
    if len(frames) < 2:
        return samples, rejected
    s_j, travel_j, _ = frames[-1]
    for s_i, travel_i, _ in frames[:-1]:
        if math.sqrt(s_i / s_j) > max_ratio:
            continue
        try:
            samples.append((s_i, depth_from_expansion(s_i, s_j, travel_j - travel_i)))
        except (RejectedSampleError, UndefinedExpansionError):
            rejected += 1
    return samples, rejected


def calibrate_kind(rig: CameraRig, noise: NoiseModel, rng, kind, radius=None,
                   source="expansion", odometry_sigma=0.0):
    radius = CALIBRATION_RADIUS[kind] if radius is None else radius
    frames = approach_observations(rig, noise, rng, radius, kind=kind, odometry_sigma=odometry_sigma)
    if source == "ground_truth":
        samples = [(area, dist) for area, _, dist in frames]
    elif source == "expansion":
        samples, rejected = expansion_samples(frames)
        if rejected:
            logger.debug(f"calibration {kind.value}: {rejected} expansion samples rejected")
    else:
        raise ValueError(f"unknown calibration source {source!r}")
    return fit_power_law(samples, strict=True), samples


def calibrate(rig: CameraRig, noise: NoiseModel, rng, radii=None, source="expansion",
              odometry_sigma=0.0):
    """Per-kind power-law fits plus the raw calibration table."""
    radii = radii or {}
    fits: Dict[BodyKind, PowerLawFit] = {}
    rows = []
    for kind in (BodyKind.TARGET, BodyKind.CAPTOR, BodyKind.OBSTACLE):
        fit, samples = calibrate_kind(rig, noise, rng, kind, radii.get(kind), source, odometry_sigma)
        fits[kind] = fit
        rows.extend({"kind": kind.value, "area_px2": a, "dist_m": d} for a, d in samples)
    return fits, pd.DataFrame(rows, columns=["kind", "area_px2", "dist_m"])


def fits_from_table(table: pd.DataFrame) -> Dict[BodyKind, PowerLawFit]:
    fits = {}
    for kind_name, group in table.groupby("kind", sort=True):
        fits[BodyKind(kind_name)] = fit_power_law(zip(group["area_px2"], group["dist_m"]))
    return fits


def fits_to_dict(fits: Dict[BodyKind, PowerLawFit]):
    return {k.value: {"alpha": f.alpha, "beta": f.beta, "rmse": f.rmse, "n_samples": f.n_samples}
            for k, f in sorted(fits.items(), key=lambda kv: kv[0].value)}


def estimate(det: Detection, fits: Dict[BodyKind, PowerLawFit], rig: CameraRig,
             corrected=False) -> RelPosition:
    return decompose(det, fits[det.kind].predict(det.area), rig, corrected=corrected)


def estimate_all(detections: Sequence[Detection], fits, rig, corrected=False) -> List[RelPosition]:
    return [estimate(d, fits, rig, corrected) for d in detections]
