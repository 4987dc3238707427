import math

import numpy as np
import pytest

from vgswarm.core.contour import (contains_point, is_simple, marching_squares, point_segment_distance,
                                  polygon_area, quadrant_shares, resample_closed)

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def circle(radius, n=360, center=(0.0, 0.0)):
    a = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return np.column_stack([center[0] + radius * np.cos(a), center[1] + radius * np.sin(a)])


def test_distance_field_gives_one_closed_circle():
    rows, cols = np.indices((41, 41))
    values = np.hypot(cols - 20.0, rows - 20.0)
    closed, open_chains = marching_squares(values, 8.0)
    assert len(closed) == 1
    assert open_chains == []
    loop = closed[0]
    assert abs(polygon_area(loop)) == pytest.approx(math.pi * 64.0, rel=0.01)
    assert np.allclose(np.hypot(loop[:, 0] - 20.0, loop[:, 1] - 20.0), 8.0, atol=0.1)


def test_ramp_gives_open_chain():
    values = np.tile(np.arange(10.0), (6, 1))
    closed, open_chains = marching_squares(values, 4.5)
    assert closed == []
    assert len(open_chains) == 1
    assert np.allclose(open_chains[0][:, 0], 4.5)
    assert len(open_chains[0]) == 6


def test_saddle_cell_does_not_cross():
    values = np.array([[0.0, 1.0], [1.0, 0.0]])
    closed, open_chains = marching_squares(values, 0.5)
    assert closed == []
    assert len(open_chains) == 2


def test_polygon_helpers():
    assert polygon_area(SQUARE) == pytest.approx(1.0)
    assert polygon_area(SQUARE[::-1]) == pytest.approx(-1.0)
    assert contains_point(SQUARE, (0.5, 0.5))
    assert not contains_point(SQUARE, (1.5, 0.5))
    assert np.allclose(point_segment_distance([(0.5, 2.0), (0.5, 0.5)], SQUARE), [1.0, 0.5])


def test_is_simple():
    assert is_simple(SQUARE)
    assert is_simple(circle(3.0, 90))
    bowtie = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    assert not is_simple(bowtie)


def test_resample_closed_is_even():
    pts = resample_closed(SQUARE, 8)
    assert len(pts) == 8
    gaps = np.linalg.norm(np.diff(np.vstack([pts, pts[:1]]), axis=0), axis=1)
    assert np.allclose(gaps, 0.5)


def test_quadrant_shares():
    shares = quadrant_shares(circle(2.0, 360, center=(1.0, -1.0)), (1.0, -1.0))
    assert shares.sum() == pytest.approx(1.0)
    assert np.allclose(shares, 0.25, atol=0.01)
