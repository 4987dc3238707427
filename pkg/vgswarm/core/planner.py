"""
Bottom-layer actuation: pick a heading by sampling a field on concentric circles
around the agent, size the step, and turn both into a velocity command.

By default the sampled field is the fused concentration M and the step follows
the concentration gap |C_C - C_P|. A departing agent climbs M instead of
descending it. The contour-distance guidance field and the line-search step are
opt-in variants.

Headings follow the motion-vector convention: theta is measured from the local
+Y (nose) axis toward +X, so a unit step is (sin theta, cos theta).
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from vgswarm.core.contour import resample_closed
from vgswarm.core.grn import FieldGrid, FieldSet, GridGeometry, sample

STEP_LAWS = ("concentration", "line_search")
DIRECTION_FIELDS = ("concentration", "guidance")


@dataclass(frozen=True)
class SamplingScheme:
    radii: Tuple[float, ...] = (0.5, 1.1, 1.7, 2.3, 2.9)
    n_directions: int = 180

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        object.__setattr__(self, "radii", radii)
        if not radii or radii[0] <= 0 or any(b <= a for a, b in zip(radii, radii[1:])):
            raise ValueError("sampling radii must be positive and strictly increasing")
        if self.n_directions < 8:
            raise ValueError("need at least 8 sampling directions")

    @property
    def angles(self):
        return 2.0 * np.pi * np.arange(self.n_directions) / self.n_directions


@dataclass(frozen=True)
class PlannerParams:
    k_scale: float = 1.0
    # per-tick step ceiling in meters; None means max speed * dt
    s_max: Optional[float] = None
    step_law: str = "concentration"
    direction_field: str = "concentration"
    line_search_samples: int = 26
    # line-search step scale while keeping
    keep_gain: float = 0.3
    min_step: float = 0.01
    delta_c_ref: float = 0.5
    altitude_deadband: float = 0.3
    w_obstacle: float = 5.0
    w_neighbor: float = 2.0
    window: float = 3.5

    def __post_init__(self):
        if self.step_law not in STEP_LAWS:
            raise ValueError(f"unknown step law {self.step_law!r}, expected one of {STEP_LAWS}")
        if self.direction_field not in DIRECTION_FIELDS:
            raise ValueError(f"unknown direction field {self.direction_field!r}, "
                             f"expected one of {DIRECTION_FIELDS}")
        if not self.k_scale > 0:
            raise ValueError("k_scale must be positive")
        if self.line_search_samples < 2:
            raise ValueError("line search needs at least 2 samples")


@dataclass(eq=False)
class MotionCommand:
    theta_dir: float
    step: float
    k_scale: float
    delta_h: float
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def speed(self):
        return float(np.linalg.norm(self.velocity))


def ray_points(theta, radii, origin=(0.0, 0.0)):
    radii = np.asarray(radii, dtype=float)
    return np.column_stack([origin[0] + radii * math.sin(theta), origin[1] + radii * math.cos(theta)])


def direction_sums(grid: FieldGrid, scheme: SamplingScheme, origin=(0.0, 0.0)):
    angles = scheme.angles
    radii = np.asarray(scheme.radii)
    xs = origin[0] + np.sin(angles)[:, None] * radii[None, :]
    ys = origin[1] + np.cos(angles)[:, None] * radii[None, :]
    values = sample(grid, np.column_stack([xs.ravel(), ys.ravel()]))
    return values.reshape(len(angles), len(radii)).sum(axis=1)


def select_direction(grid: FieldGrid, scheme: SamplingScheme, origin=(0.0, 0.0)) -> float:
    """Ray angle with the smallest summed field over the sampling circles; ties go to the smallest angle."""
    sums = direction_sums(grid, scheme, origin)
    best = sums.min()
    tol = 1e-12 * max(1.0, abs(best))
    return float(scheme.angles[np.flatnonzero(sums <= best + tol)[0]])


def guidance_field(fields: FieldSet, params: PlannerParams) -> FieldGrid:
    """
    Distance to the pattern contour plus weighted obstacle and neighbor fields,
    on a window around the agent.

    The raw source fields are smooth where the fused field is step-like, so the
    minimum band of this field is the contour itself with soft repulsion added.
    """
    full = fields.M.geometry
    h = full.h
    half = int(math.ceil(params.window / h))
    c_row, c_col = full.node_of((0.0, 0.0))
    r0, r1 = max(c_row - half, 0), min(c_row + half, full.shape[0] - 1)
    c0, c1 = max(c_col - half, 0), min(c_col + half, full.shape[1] - 1)
    window = GridGeometry(shape=(r1 - r0 + 1, c1 - c0 + 1), h=h,
                          origin=(full.origin[0] + c0 * h, full.origin[1] + r0 * h))

    xs, ys = window.coords()
    gx, gy = np.meshgrid(xs, ys)
    nodes = np.column_stack([gx.ravel(), gy.ravel()])

    contour = fields.pattern.contour
    perimeter = float(np.linalg.norm(np.diff(np.vstack([contour, contour[:1]]), axis=0), axis=1).sum())
    dense = resample_closed(contour, max(len(contour), int(math.ceil(perimeter / (h / 4.0)))))
    distance, _ = cKDTree(dense).query(nodes)

    values = distance.reshape(window.shape)
    values += params.w_obstacle * fields.O.values[r0:r1 + 1, c0:c1 + 1]
    values += params.w_neighbor * fields.N.values[r0:r1 + 1, c0:c1 + 1]
    return FieldGrid(window.origin, h, values)


def line_search_step(grid: FieldGrid, theta, s_max, samples=26, origin=(0.0, 0.0)):
    """Distance along the ray, within [0, s_max], where the field is lowest."""
    if s_max <= 0:
        return 0.0
    steps = np.linspace(0.0, s_max, samples)
    values = sample(grid, ray_points(theta, steps, origin), clip=True)
    return float(steps[int(np.argmin(values))])


def concentration_step(C_C, C_P, s_max, delta_c_ref):
    return s_max * min(1.0, abs(C_C - C_P) / delta_c_ref)


def make_command(theta_dir, delta_h, params: PlannerParams, step, dt, max_speed) -> MotionCommand:
    """Velocity [k s sin(theta), k s cos(theta), k dh] / dt in the local frame, clamped to max_speed."""
    if abs(delta_h) < params.altitude_deadband:
        delta_h = 0.0
    k = params.k_scale
    velocity = np.array([k * step * math.sin(theta_dir), k * step * math.cos(theta_dir), k * delta_h]) / dt
    speed = float(np.linalg.norm(velocity))
    if speed > max_speed:
        velocity *= max_speed / speed
    return MotionCommand(theta_dir=float(theta_dir), step=float(step), k_scale=k,
                         delta_h=float(delta_h), velocity=velocity)


def climbing(grid: FieldGrid) -> FieldGrid:
    """The field mirrored in value, so its lowest rays are the original's highest."""
    return FieldGrid(grid.origin, grid.h, -grid.values)


def direction_grid(fields: FieldSet, params: PlannerParams, departing=False) -> FieldGrid:
    if params.direction_field == "guidance":
        return guidance_field(fields, params)
    return climbing(fields.M) if departing else fields.M


def plan_motion(fields: FieldSet, scheme: SamplingScheme, params: PlannerParams, dt, max_speed,
                delta_h=0.0, departing=False, keeping=False) -> MotionCommand:
    s_max = max_speed * dt if params.s_max is None else params.s_max
    grid = direction_grid(fields, params, departing=departing)
    theta = select_direction(grid, scheme)
    if params.step_law == "concentration":
        step = concentration_step(fields.C_C, fields.C_P, s_max, params.delta_c_ref)
    else:
        step = line_search_step(grid, theta, s_max, params.line_search_samples)
        if keeping:
            step *= params.keep_gain
    if step < params.min_step:
        step = 0.0
    return make_command(theta, delta_h, params, step, dt, max_speed)
