import math

import numpy as np
import pytest
from scipy.special import expit, k0

from vgswarm.core.contour import contains_point, is_simple, point_segment_distance
from vgswarm.core.grn import (FieldGrid, GridGeometry, GrnParams, amplitudes, compute_fields,
                              concentration_at, extract_pattern, fallback_pattern, field_dump_frame, fuse,
                              sample, shifted, solve_source_field)
from vgswarm.core.scenario import build_preset
from vgswarm.errors import GridBoundsError, PatternUnavailableError, SolverError

SMALL = GridGeometry.centered(41, 0.25)
SOURCES = [np.array([0.0, 0.0, 0.0]), np.array([1.0, -0.5, 0.0])]


def solve(sources, solver, geometry=SMALL, **kwargs):
    return solve_source_field(sources, geometry, GrnParams(solver=solver, **kwargs), amplitude=1.0)


def test_kernel_matches_direct_solve():
    ref = solve(SOURCES, "direct").values
    got = solve(SOURCES, "kernel").values
    assert np.allclose(got, ref, atol=1e-6 * ref.max())


def test_kernel_matches_direct_near_the_wall():
    # second reflections are dropped; on this 10 m grid they sit about 11 m away
    sources = [np.array([-4.75, 4.5, 0.0])]
    ref = solve(sources, "direct").values
    assert np.allclose(solve(sources, "kernel").values, ref, atol=1e-4 * ref.max())


def test_sor_converges_to_direct():
    ref = solve(SOURCES, "direct").values
    got = solve(SOURCES, "sor", solver_tol=1e-10).values
    assert np.allclose(got, ref, atol=1e-6 * ref.max())


def test_sor_reports_non_convergence():
    with pytest.raises(SolverError) as info:
        solve(SOURCES, "sor", max_iters=2)
    assert info.value.iterations == 2


def test_default_solver_is_iterative():
    assert GrnParams().solver == "sor"


def test_compute_fields_surfaces_non_convergence():
    with pytest.raises(SolverError):
        compute_fields([np.array([3.0, 5.0, 0.0])], [], [], GrnParams(max_iters=1, solver_tol=1e-12))


def test_default_solver_agrees_with_kernel():
    params = GrnParams()
    ref = solve_source_field(SOURCES, SMALL, GrnParams(solver="kernel"), amplitude=1.0).values
    got = solve_source_field(SOURCES, SMALL, params, amplitude=1.0).values
    assert np.allclose(got, ref, atol=1e-3 * ref.max())


def test_transient_relaxes_to_steady_state():
    ref = solve(SOURCES, "direct").values
    got = solve(SOURCES, "transient").values
    assert np.allclose(got, ref, atol=1e-4 * ref.max())


def test_warm_start_reaches_same_field():
    cold = solve(SOURCES, "sor", solver_tol=1e-10)
    warm = solve_source_field(SOURCES, SMALL, GrnParams(solver="sor", solver_tol=1e-10), amplitude=1.0,
                              initial=cold)
    assert np.allclose(warm.values, cold.values, atol=1e-8)


def test_shifted_warm_start_follows_ego_motion():
    # the agent moved one cell along +x, so a fixed source now sits one cell to the left
    before = solve([np.zeros(3)], "kernel")
    after = solve([np.array([-0.25, 0.0, 0.0])], "kernel")
    moved = shifted(before, (0.25, 0.0, 0.0))
    inner = (slice(8, -8), slice(8, -8))
    assert np.allclose(moved.values[inner], after.values[inner], atol=1e-3 * after.values.max())
    assert shifted(before, None) is before


def test_off_node_source_is_continuous():
    point = (3.0, 0.5)
    left = concentration_at(solve([np.array([0.0, 0.0, 0.0])], "kernel"), point)
    mid = concentration_at(solve([np.array([0.125, 0.0, 0.0])], "kernel"), point)
    right = concentration_at(solve([np.array([0.25, 0.0, 0.0])], "kernel"), point)
    assert left < mid < right
    total = solve([np.array([0.1, -0.05, 0.0])], "kernel")
    assert total.values.max() < solve([np.zeros(3)], "kernel").values.max()


def test_no_sources_gives_zero_field():
    assert not solve([], "kernel").values.any()


def test_linearity():
    both = solve(SOURCES, "kernel").values
    parts = solve(SOURCES[:1], "kernel").values + solve(SOURCES[1:], "kernel").values
    assert np.allclose(both, parts, atol=1e-12)


def test_centered_source_is_symmetric():
    u = solve(SOURCES[:1], "kernel").values
    assert np.allclose(u, u.T, atol=1e-9 * u.max())
    assert np.allclose(u, u[::-1, :], atol=1e-9 * u.max())
    assert np.allclose(u, u[:, ::-1], atol=1e-9 * u.max())


def test_profile_follows_bessel_decay():
    params = GrnParams(solver="kernel")
    geometry = params.geometry()
    u = solve_source_field([np.zeros(3)], geometry, params, amplitude=1.0)
    h = geometry.h
    for d in (1.0, 2.0, 3.0, 4.0, 5.0):
        expected = h * h / (2.0 * math.pi) * k0(d)
        assert concentration_at(u, (d, 0.0)) == pytest.approx(expected, rel=0.05)


def test_amplitudes_hit_midpoints():
    params = GrnParams(solver="kernel")
    a_t, a_o, a_n = amplitudes(params)
    geometry = params.geometry()
    T = solve_source_field([np.zeros(3)], geometry, params, amplitude=a_t)
    O = solve_source_field([np.zeros(3)], geometry, params, amplitude=a_o)
    N = solve_source_field([np.zeros(3)], geometry, params, amplitude=a_n)
    assert concentration_at(T, (4.0, 0.0)) ** 2 == pytest.approx(1.0 - params.theta, abs=1e-6)
    assert concentration_at(O, (1.5, 0.0)) ** 2 == pytest.approx(params.theta, abs=1e-6)
    assert concentration_at(N, (1.0, 0.0)) ** 2 == pytest.approx(params.theta, abs=1e-6)


def test_explicit_amplitudes_win():
    params = GrnParams(source_amplitude=2.0, obstacle_amplitude=3.0)
    assert amplitudes(params) == (2.0, 3.0, 2.0)


def test_fuse_of_empty_fields():
    params = GrnParams()
    zero = FieldGrid.zeros(SMALL)
    M = fuse(zero, zero, zero, params)
    assert np.allclose(M.values, expit(10.0) + 2.0 * expit(-10.0))


def test_fuse_needs_shared_geometry():
    with pytest.raises(ValueError):
        fuse(FieldGrid.zeros(SMALL), FieldGrid.zeros(SMALL), FieldGrid.zeros(GridGeometry.centered(21)),
             GrnParams())


def test_sample_is_bilinear_and_bounded():
    geometry = GridGeometry.centered(5, 0.5)
    xs, _ = geometry.coords()
    grid = FieldGrid(geometry.origin, geometry.h, np.tile(xs, (5, 1)))
    assert concentration_at(grid, (0.3, 0.2)) == pytest.approx(0.3)
    with pytest.raises(GridBoundsError):
        sample(grid, [(1.5, 0.0)])
    assert sample(grid, [(1.5, 0.0)], clip=True)[0] == pytest.approx(1.0)


def test_open_field_pattern(centered_target_fields):
    pattern = centered_target_fields.pattern
    params = GrnParams()
    assert pattern is not None and not pattern.fallback
    assert 3.6 < pattern.mean_radius < 4.1
    assert pattern.radii.std() < 0.05 * pattern.mean_radius
    assert pattern.radii.min() >= params.safe_distance
    assert np.all((pattern.quadrant_shares() > 0.2) & (pattern.quadrant_shares() < 0.3))
    assert len(pattern.contour) == params.contour_points
    assert centered_target_fields.C_P == pattern.level


def test_obstacle_dents_pattern():
    fields = compute_fields([np.zeros(3)], [np.array([4.5, 0.0, 0.0])], [], GrnParams())
    pattern = fields.pattern
    assert not pattern.fallback
    bearings = np.arctan2(pattern.contour[:, 1], pattern.contour[:, 0])
    toward = pattern.radii[np.argmin(np.abs(bearings))]
    away = pattern.radii[np.argmin(np.abs(np.abs(bearings) - np.pi))]
    assert toward < 3.3 < 3.6 < away


def test_target_near_edge_falls_back_to_safe_circle():
    params = GrnParams()
    target = np.array([14.0, 0.0, 0.0])
    fields = compute_fields([target], [], [], params)
    assert fields.pattern.fallback
    assert "safe circle" in fields.pattern_error
    assert np.allclose(fields.pattern.radii, params.safe_distance)
    with pytest.raises(PatternUnavailableError):
        extract_pattern(fields.M, target, params)


def test_target_outside_grid():
    params = GrnParams()
    fields = compute_fields([np.array([20.0, 0.0, 0.0])], [], [], params)
    assert fields.pattern is None
    with pytest.raises(GridBoundsError):
        extract_pattern(fields.M, (20.0, 0.0), params)


def test_no_target_no_pattern():
    fields = compute_fields([], [np.array([2.0, 2.0, 0.0])], [], GrnParams())
    assert fields.pattern is None
    assert fields.C_P is None


def test_fallback_level_is_mean_on_circle(centered_target_fields):
    params = GrnParams()
    pattern = fallback_pattern(centered_target_fields.M, (0.0, 0.0), params)
    assert pattern.fallback
    assert pattern.level < centered_target_fields.pattern.level


def test_field_dump_frame(centered_target_fields):
    frame = field_dump_frame(centered_target_fields)
    assert list(frame.columns) == ["row", "col", "T", "O", "N", "M"]
    assert len(frame) == 121 * 121


def random_scene(rng):
    target = np.append(rng.uniform(-1.5, 1.5, size=2), 0.0)

    def around(count, near, far):
        r = rng.uniform(near, far, size=count)
        a = rng.uniform(0.0, 2.0 * math.pi, size=count)
        return [target + np.array([ri * math.cos(ai), ri * math.sin(ai), 0.0]) for ri, ai in zip(r, a)]

    return target, around(int(rng.integers(0, 5)), 2.5, 6.5), around(int(rng.integers(0, 5)), 1.0, 7.0)


def check_random_patterns(n_scenes):
    params = GrnParams(solver="direct", grid_size=61)
    geometry = params.geometry()
    a_t, a_o, a_n = amplitudes(params)
    rng = np.random.default_rng(2024)
    extracted = 0
    for _ in range(n_scenes):
        target, obstacles, neighbors = random_scene(rng)
        M = fuse(solve_source_field([target], geometry, params, amplitude=a_t),
                 solve_source_field(obstacles, geometry, params, amplitude=a_o),
                 solve_source_field(neighbors, geometry, params, amplitude=a_n), params)
        try:
            pattern = extract_pattern(M, target, params)
        except PatternUnavailableError:
            continue
        extracted += 1
        shares = pattern.quadrant_shares()
        assert pattern.radii.min() >= params.safe_distance - 1e-9
        assert point_segment_distance([target[:2]], pattern.contour)[0] >= params.safe_distance - 1e-9
        assert shares.min() >= params.quadrant_min and shares.max() <= params.quadrant_max
        assert contains_point(pattern.contour, target[:2])
        assert is_simple(pattern.contour)
    return extracted


def test_random_scenes_yield_valid_patterns():
    assert check_random_patterns(40) > 0


@pytest.mark.slow
def test_five_hundred_random_scenes_yield_valid_patterns():
    assert check_random_patterns(500) > 0


def corridor_pattern(preset, offset):
    scenario = build_preset(preset)
    params = GrnParams()
    target = np.array([offset[0], offset[1], 0.0])
    obstacles = [np.array([o.center[0], o.center[1], 0.0]) for o in scenario.obstacles
                 if abs(o.center[0]) <= 15.0 and abs(o.center[1]) <= 15.0]
    fields = compute_fields([target], obstacles, [], params, target=target)
    assert fields.pattern_error is None
    return fields.pattern


def contour_centroid(poly):
    x, y = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = cross.sum() / 2.0
    return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * area)


@pytest.mark.parametrize("seed", range(10))
def test_parallel_walls_squeeze_the_pattern(seed):
    offset = np.random.default_rng(seed).uniform([-0.1, -0.5], [0.1, 0.5])
    contour = corridor_pattern("narrow-parallel", offset).contour
    across, along = np.ptp(contour[:, 0]), np.ptp(contour[:, 1])
    assert across <= 0.8 * along


@pytest.mark.parametrize("seed", range(10))
def test_converging_walls_push_the_pattern_from_the_apex(seed):
    offset = np.random.default_rng(seed).uniform([-0.1, -0.5], [0.1, 0.5])
    pattern = corridor_pattern("narrow-conical", offset)
    # the walls close in toward +y
    assert contour_centroid(pattern.contour)[1] < offset[1]
