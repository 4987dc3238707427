"""
Morphogen fields on an agent-centered grid.

Each source kind (targets, obstacles, neighbors) diffuses and decays to the
steady state of

    0 = lap(u) + gamma - u

where gamma is a point forcing at each source node. The three per-kind sums are
fused through sigmoids into M, whose low basin around a target is bounded by the
entrapping contour.

The grid is node based: node (row, col) sits at origin + (col * h, row * h) in
the agent's local frame, values[row, col], rows along local y. Boundaries are
zero-flux with the ghost node equal to the edge node.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import ndimage, sparse
from scipy.sparse.linalg import splu
from scipy.special import expit

from vgswarm.core.contour import (contains_point, is_simple, marching_squares, point_segment_distance,
                                  polygon_area, quadrant_shares, resample_closed)
from vgswarm.errors import GridBoundsError, PatternUnavailableError, SolverError
from vgswarm.utils.logger import logger

SOLVERS = ("kernel", "sor", "direct", "transient")


@dataclass(frozen=True)
class GridGeometry:
    shape: Tuple[int, int]
    h: float
    origin: Tuple[float, float]

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("grid resolution must be positive")
        if min(self.shape) < 2:
            raise ValueError("grid needs at least 2x2 nodes")

    @classmethod
    def centered(cls, size=121, h=0.25):
        half = (size - 1) / 2.0 * h
        return cls(shape=(int(size), int(size)), h=float(h), origin=(-half, -half))

    @property
    def extent(self):
        rows, cols = self.shape
        x0, y0 = self.origin
        return (x0, y0, x0 + (cols - 1) * self.h, y0 + (rows - 1) * self.h)

    def coords(self):
        rows, cols = self.shape
        xs = self.origin[0] + np.arange(cols) * self.h
        ys = self.origin[1] + np.arange(rows) * self.h
        return xs, ys

    def node_of(self, point):
        """Nearest node (row, col), clamped into the grid."""
        rows, cols = self.shape
        col = int(round((float(point[0]) - self.origin[0]) / self.h))
        row = int(round((float(point[1]) - self.origin[1]) / self.h))
        return min(max(row, 0), rows - 1), min(max(col, 0), cols - 1)

    def contains(self, point, margin=0.0):
        x0, y0, x1, y1 = self.extent
        x, y = float(point[0]), float(point[1])
        eps = 1e-9
        return (x0 + margin - eps <= x <= x1 - margin + eps) and (y0 + margin - eps <= y <= y1 - margin + eps)


@dataclass(eq=False)
class FieldGrid:
    origin: Tuple[float, float]
    h: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not self.h > 0:
            raise ValueError("grid resolution must be positive")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @classmethod
    def zeros(cls, geometry: GridGeometry):
        return cls(geometry.origin, geometry.h, np.zeros(geometry.shape))

    @property
    def geometry(self):
        return GridGeometry(tuple(self.values.shape), self.h, tuple(self.origin))

    @property
    def size(self):
        return self.values.shape

    def same_geometry(self, other):
        return (self.values.shape == other.values.shape and self.h == other.h
                and tuple(self.origin) == tuple(other.origin))


@dataclass(frozen=True)
class GrnParams:
    theta: float = 0.5
    k_sig: float = 20.0
    source_amplitude: Optional[float] = None
    target_amplitude: Optional[float] = None
    obstacle_amplitude: Optional[float] = None
    neighbor_amplitude: Optional[float] = None
    # distance from a lone source at which its sigmoid crosses the midpoint
    target_radius: Optional[float] = None
    obstacle_radius: float = 1.5
    neighbor_radius: float = 1.0
    safe_distance: float = 2.0
    solver: str = "sor"
    solver_tol: float = 1e-6
    max_iters: int = 5000
    omega: float = 1.7
    transient_time: float = 12.0
    level_step: float = 0.05
    quadrant_min: float = 0.15
    quadrant_max: float = 0.35
    contour_points: int = 180
    grid_size: int = 121
    resolution: float = 0.25

    def __post_init__(self):
        if not self.k_sig > 0:
            raise ValueError("k_sig must be positive")
        if not self.safe_distance > 0:
            raise ValueError("safe_distance must be positive")
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}, expected one of {SOLVERS}")
        if not 0 < self.omega < 2:
            raise ValueError("omega must lie in (0, 2)")
        if not self.level_step > 0:
            raise ValueError("level_step must be positive")
        if self.grid_size < 3 or self.grid_size % 2 == 0:
            raise ValueError("grid_size must be odd so the agent sits on the center node")
        if not 0 <= self.quadrant_min < 0.25 < self.quadrant_max <= 1:
            raise ValueError("quadrant bounds must straddle 0.25")

    def geometry(self):
        return GridGeometry.centered(self.grid_size, self.resolution)

    @property
    def effective_target_radius(self):
        return 2.0 * self.safe_distance if self.target_radius is None else self.target_radius


# -- solvers ---------------------------------------------------------------------

def _forcing(sources, geometry: GridGeometry, amplitude):
    """Point forcing shared bilinearly among the four nodes around each source."""
    gamma = np.zeros(geometry.shape)
    rows, cols = geometry.shape
    for src in sources:
        if not geometry.contains(src):
            row, col = geometry.node_of(src)
            gamma[row, col] += amplitude
            continue
        fx = (float(src[0]) - geometry.origin[0]) / geometry.h
        fy = (float(src[1]) - geometry.origin[1]) / geometry.h
        c0 = min(max(int(math.floor(fx)), 0), cols - 2)
        r0 = min(max(int(math.floor(fy)), 0), rows - 2)
        tx, ty = min(max(fx - c0, 0.0), 1.0), min(max(fy - r0, 0.0), 1.0)
        gamma[r0, c0] += amplitude * (1.0 - tx) * (1.0 - ty)
        gamma[r0, c0 + 1] += amplitude * tx * (1.0 - ty)
        gamma[r0 + 1, c0] += amplitude * (1.0 - tx) * ty
        gamma[r0 + 1, c0 + 1] += amplitude * tx * ty
    return gamma


def _kernel_size(n, h):
    # room for the mirror images plus ~30 decay lengths before the periodic wrap
    need = max(4 * n, int(math.ceil(60.0 / h)))
    return 1 << (need - 1).bit_length()


@lru_cache(maxsize=8)
def _lattice_kernel(size, h):
    """Green's function of the discrete operator on an unbounded lattice, centered at (size//2, size//2)."""
    a = 1.0 / (h * h)
    k = 2.0 * np.pi * np.fft.fftfreq(size)
    symbol = 1.0 + a * (4.0 - 2.0 * np.cos(k)[:, None] - 2.0 * np.cos(k)[None, :])
    kernel = np.fft.fftshift(np.fft.ifft2(1.0 / symbol).real)
    kernel.setflags(write=False)
    return kernel


def _mirror_images(index, n):
    return (index, -1 - index, 2 * n - 1 - index)


def _solve_kernel(gamma, h):
    rows, cols = gamma.shape
    size = _kernel_size(max(rows, cols), h)
    kernel = _lattice_kernel(size, h)
    c = size // 2
    u = np.zeros_like(gamma)
    for si, sj in zip(*np.nonzero(gamma)):
        amp = gamma[si, sj]
        for ri in _mirror_images(int(si), rows):
            for rj in _mirror_images(int(sj), cols):
                u += amp * kernel[c - ri:c - ri + rows, c - rj:c - rj + cols]
    return u


def _solve_sor(gamma, h, omega, tol, max_iters, initial=None):
    a = 1.0 / (h * h)
    diag = 1.0 + 4.0 * a
    u = np.zeros_like(gamma) if initial is None else np.array(initial, dtype=float)
    rows, cols = gamma.shape
    ii, jj = np.indices((rows, cols))
    red = (ii + jj) % 2 == 0
    delta = float("inf")
    for it in range(1, max_iters + 1):
        delta = 0.0
        for mask in (red, ~red):
            p = np.pad(u, 1, mode="edge")
            nbr = p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:]
            update = omega * ((gamma + a * nbr) / diag - u)
            delta = max(delta, float(np.abs(update[mask]).max()))
            u[mask] += update[mask]
        if delta < tol:
            return u, it
    raise SolverError("over-relaxed Gauss-Seidel did not converge", delta, max_iters)


def _neumann_second_difference(n):
    main = np.full(n, -2.0)
    main[0] = main[-1] = -1.0
    off = np.ones(n - 1)
    return sparse.diags([off, main, off], [-1, 0, 1])


@lru_cache(maxsize=8)
def _direct_factor(rows, cols, h):
    a = 1.0 / (h * h)
    lap = sparse.kron(sparse.identity(rows), _neumann_second_difference(cols)) \
        + sparse.kron(_neumann_second_difference(rows), sparse.identity(cols))
    operator = sparse.identity(rows * cols) - a * lap
    return splu(operator.tocsc())


def _solve_direct(gamma, h):
    rows, cols = gamma.shape
    return _direct_factor(rows, cols, h).solve(gamma.ravel()).reshape(rows, cols)


def _solve_transient(gamma, h, total_time, initial=None):
    a = 1.0 / (h * h)
    dt = 1.0 / (1.0 + 8.0 * a)
    u = np.zeros_like(gamma) if initial is None else np.array(initial, dtype=float)
    for _ in range(int(math.ceil(total_time / dt))):
        u = u + dt * (a * ndimage.laplace(u, mode="nearest") + gamma - u)
    return u


def solve_source_field(sources: Sequence, geometry: GridGeometry, params: GrnParams = None,
                       amplitude=None, initial: Optional[FieldGrid] = None) -> FieldGrid:
    """
    Steady-state field of point sources at the given local (x, y[, z]) positions.

    A source between nodes is shared bilinearly among its four neighbours, so the
    field moves continuously with it; sources outside the grid are clamped onto
    the nearest node. `initial` warm starts the iterative solver.
    """
    params = params or GrnParams()
    amplitude = params.source_amplitude if amplitude is None else amplitude
    amplitude = 1.0 if amplitude is None else float(amplitude)

    gamma = _forcing(sources, geometry, amplitude)
    if not gamma.any():
        return FieldGrid.zeros(geometry)

    warm = initial.values if initial is not None and initial.values.shape == gamma.shape else None
    if params.solver == "kernel":
        values = _solve_kernel(gamma, geometry.h)
    elif params.solver == "direct":
        values = _solve_direct(gamma, geometry.h)
    elif params.solver == "transient":
        values = _solve_transient(gamma, geometry.h, params.transient_time, warm)
    else:
        values, iterations = _solve_sor(gamma, geometry.h, params.omega, params.solver_tol,
                                        params.max_iters, warm)
        logger.debug(f"sor converged in {iterations} sweeps for {len(sources)} sources")
    return FieldGrid(geometry.origin, geometry.h, values)


def shifted(grid: Optional[FieldGrid], displacement) -> Optional[FieldGrid]:
    """
    Re-center a previous field after the agent moved by `displacement` (local x, y).

    Only the translation is applied; edge values are held. Used to warm start
    the iterative solver on the next tick.
    """
    if grid is None or displacement is None:
        return grid
    dx, dy = float(displacement[0]), float(displacement[1])
    if dx == 0.0 and dy == 0.0:
        return grid
    values = ndimage.shift(grid.values, (-dy / grid.h, -dx / grid.h), order=1, mode="nearest")
    return FieldGrid(grid.origin, grid.h, values)


# -- amplitude calibration ------------------------------------------------------

@lru_cache(maxsize=32)
def unit_profile_at(h, radius):
    """Field of a unit forcing on the unbounded lattice, read at `radius` meters along an axis."""
    size = _kernel_size(int(math.ceil(radius / h)) + 2, h)
    kernel = _lattice_kernel(size, h)
    c = size // 2
    profile = kernel[c, c:]
    return float(np.interp(radius / h, np.arange(len(profile)), profile))


def calibrated_amplitude(h, radius, midpoint):
    """Amplitude whose lone-source field squared equals `midpoint` at `radius`."""
    if not radius > 0 or not 0 < midpoint:
        raise ValueError("radius and midpoint must be positive")
    return math.sqrt(midpoint) / unit_profile_at(h, radius)


def amplitudes(params: GrnParams, h=None):
    """(target, obstacle, neighbor) amplitudes; explicit values win over calibration."""
    h = params.resolution if h is None else h

    def pick(explicit, radius, midpoint):
        if explicit is not None:
            return float(explicit)
        if params.source_amplitude is not None:
            return float(params.source_amplitude)
        return calibrated_amplitude(h, radius, midpoint)

    return (
        pick(params.target_amplitude, params.effective_target_radius, 1.0 - params.theta),
        pick(params.obstacle_amplitude, params.obstacle_radius, params.theta),
        pick(params.neighbor_amplitude, params.neighbor_radius, params.theta),
    )


# -- fusion and sampling --------------------------------------------------------

def sigmoid(x, theta, k):
    return expit(k * (np.asarray(x, dtype=float) - theta))


def fuse(T_sum: FieldGrid, O_sum: FieldGrid, N_sum: FieldGrid, params: GrnParams) -> FieldGrid:
    if not (T_sum.same_geometry(O_sum) and T_sum.same_geometry(N_sum)):
        raise ValueError("fields must share one grid geometry")
    theta, k = params.theta, params.k_sig
    m = (sigmoid(1.0 - T_sum.values ** 2, theta, k)
         + sigmoid(O_sum.values ** 2, theta, k)
         + sigmoid(N_sum.values ** 2, theta, k))
    return FieldGrid(T_sum.origin, T_sum.h, m)


def sample(grid: FieldGrid, points, clip=False):
    """Bilinear interpolation at (k, 2) local points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))[:, :2]
    rows, cols = grid.values.shape
    fx = (pts[:, 0] - grid.origin[0]) / grid.h
    fy = (pts[:, 1] - grid.origin[1]) / grid.h
    eps = 1e-9
    outside = (fx < -eps) | (fx > cols - 1 + eps) | (fy < -eps) | (fy > rows - 1 + eps)
    if np.any(outside) and not clip:
        bad = pts[np.argmax(outside)]
        raise GridBoundsError(f"point ({bad[0]:.2f}, {bad[1]:.2f}) lies outside the field grid")
    fx = np.clip(fx, 0.0, cols - 1)
    fy = np.clip(fy, 0.0, rows - 1)
    j0 = np.minimum(np.floor(fx).astype(int), cols - 2)
    i0 = np.minimum(np.floor(fy).astype(int), rows - 2)
    tx, ty = fx - j0, fy - i0
    v = grid.values
    return ((1 - ty) * ((1 - tx) * v[i0, j0] + tx * v[i0, j0 + 1])
            + ty * ((1 - tx) * v[i0 + 1, j0] + tx * v[i0 + 1, j0 + 1]))


def concentration_at(grid: FieldGrid, point) -> float:
    return float(sample(grid, [point])[0])


# -- entrapping pattern ---------------------------------------------------------

@dataclass(eq=False)
class EntrapPattern:
    contour: np.ndarray
    level: float
    target_ref: np.ndarray
    fallback: bool = False

    def __post_init__(self):
        self.contour = np.asarray(self.contour, dtype=float)
        self.target_ref = np.asarray(self.target_ref, dtype=float)[:2]

    @property
    def radii(self):
        return np.linalg.norm(self.contour - self.target_ref, axis=1)

    @property
    def mean_radius(self):
        return float(self.radii.mean())

    def quadrant_shares(self):
        return quadrant_shares(self.contour, self.target_ref)


def pattern_violation(contour, target, params: GrnParams) -> Optional[str]:
    """Reason the contour cannot serve as an entrapping pattern, or None."""
    if len(contour) < 3:
        return "degenerate contour"
    if not contains_point(contour, target):
        return "contour does not enclose the target"
    clearance = float(point_segment_distance([target], contour)[0])
    if clearance < params.safe_distance:
        return f"clearance {clearance:.2f} m below safe distance"
    shares = quadrant_shares(contour, target)
    if shares.min() < params.quadrant_min or shares.max() > params.quadrant_max:
        return "quadrants unbalanced " + "/".join(f"{s:.2f}" for s in shares)
    if not is_simple(contour):
        return "self-intersecting contour"
    return None


def _circle(center, radius, n):
    angles = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return np.column_stack([center[0] + radius * np.cos(angles), center[1] + radius * np.sin(angles)])


def _enclosing_loop(M: FieldGrid, level, target):
    closed, _ = marching_squares(M.values, level)
    best, best_area = None, float("inf")
    for loop in closed:
        poly = np.asarray(M.origin) + loop * M.h
        if not contains_point(poly, target):
            continue
        area = abs(polygon_area(poly))
        if area < best_area:
            best, best_area = poly, area
    return best


def extract_pattern(M: FieldGrid, target, params: GrnParams) -> EntrapPattern:
    """Innermost valid iso-contour around the target, scanning levels upward from the safe circle."""
    target = np.asarray(target, dtype=float)[:2]
    geometry = M.geometry
    if not geometry.contains(target):
        raise GridBoundsError(f"target ({target[0]:.2f}, {target[1]:.2f}) lies outside the field grid")
    if not geometry.contains(target, margin=params.safe_distance):
        raise PatternUnavailableError("safe circle leaves the field grid")

    floor = float(sample(M, _circle(target, params.safe_distance, 72)).max())
    top = float(M.values.max())
    last_reason = "no level above the safe circle"
    level = floor + params.level_step
    while level < top:
        loop = _enclosing_loop(M, level, target)
        if loop is None:
            last_reason = f"no closed contour at level {level:.3f}"
        else:
            contour = resample_closed(loop, params.contour_points)
            reason = pattern_violation(contour, target, params)
            if reason is None:
                return EntrapPattern(contour=contour, level=level, target_ref=target)
            last_reason = reason
        level += params.level_step
    raise PatternUnavailableError(last_reason)


def fallback_pattern(M: FieldGrid, target, params: GrnParams) -> EntrapPattern:
    """Safe-distance circle around the target, leveled at the mean field along it."""
    target = np.asarray(target, dtype=float)[:2]
    contour = _circle(target, params.safe_distance, params.contour_points)
    level = float(sample(M, contour, clip=True).mean())
    return EntrapPattern(contour=contour, level=level, target_ref=target, fallback=True)


# -- per-agent field bundle -------------------------------------------------------

@dataclass(eq=False)
class FieldSet:
    T: FieldGrid
    O: FieldGrid
    N: FieldGrid
    M: FieldGrid
    pattern: Optional[EntrapPattern] = None
    pattern_error: Optional[str] = field(default=None)

    @property
    def C_C(self):
        return concentration_at(self.M, (0.0, 0.0))

    @property
    def C_P(self):
        return None if self.pattern is None else self.pattern.level


def compute_fields(targets, obstacles, neighbors, params: GrnParams,
                   previous: Optional[FieldSet] = None, target=None, displacement=None) -> FieldSet:
    """
    Solve, fuse and extract the pattern around `target` (or the nearest target).

    `previous` warm starts the solver, shifted by the agent's local
    `displacement` since it was computed.

    Extraction failures fall back to the safe-distance circle; the failure
    reason is kept on the result.
    """
    geometry = params.geometry()
    a_t, a_o, a_n = amplitudes(params, geometry.h)
    prev = previous or FieldSet(None, None, None, None)
    T = solve_source_field(targets, geometry, params, amplitude=a_t, initial=shifted(prev.T, displacement))
    O = solve_source_field(obstacles, geometry, params, amplitude=a_o, initial=shifted(prev.O, displacement))
    N = solve_source_field(neighbors, geometry, params, amplitude=a_n, initial=shifted(prev.N, displacement))
    M = fuse(T, O, N, params)

    result = FieldSet(T, O, N, M)
    if target is None and targets:
        target = min(targets, key=lambda p: float(p[0]) ** 2 + float(p[1]) ** 2)
    if target is None:
        return result
    try:
        result.pattern = extract_pattern(M, target, params)
    except (PatternUnavailableError, GridBoundsError) as e:
        result.pattern_error = str(e)
        if geometry.contains(target):
            result.pattern = fallback_pattern(M, target, params)
    return result


def field_dump_frame(fields: FieldSet) -> pd.DataFrame:
    rows, cols = fields.M.values.shape
    ii, jj = np.indices((rows, cols))
    return pd.DataFrame({
        "row": ii.ravel(),
        "col": jj.ravel(),
        "T": fields.T.values.ravel(),
        "O": fields.O.values.ravel(),
        "N": fields.N.values.ravel(),
        "M": fields.M.values.ravel(),
    })
