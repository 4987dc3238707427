"""
Iso-contours of node-sampled scalar fields and small polygon helpers.

Marching squares runs over the cells whose corners straddle the level; each
crossing is linearly interpolated along its edge and saddles are resolved by the
mean of the four corners. Segments are linked through their shared edges, so a
loop that does not touch the grid border closes on itself.
"""

import numpy as np

# corner bits: 1 = bottom-left, 2 = bottom-right, 4 = top-right, 8 = top-left (set when below level)
# edges: 0 = bottom, 1 = right, 2 = top, 3 = left
_SEGMENTS = {
    1: ((3, 0),),
    2: ((0, 1),),
    3: ((3, 1),),
    4: ((1, 2),),
    6: ((0, 2),),
    7: ((3, 2),),
    8: ((3, 2),),
    9: ((0, 2),),
    11: ((1, 2),),
    12: ((3, 1),),
    13: ((0, 1),),
    14: ((3, 0),),
}
# saddles keyed by (case, center below level)
_SADDLES = {
    (5, True): ((0, 1), (2, 3)),
    (5, False): ((3, 0), (1, 2)),
    (10, True): ((3, 0), (1, 2)),
    (10, False): ((0, 1), (2, 3)),
}


def _edge_key(i, j, edge):
    if edge == 0:
        return ("h", i, j)
    if edge == 2:
        return ("h", i + 1, j)
    if edge == 3:
        return ("v", i, j)
    return ("v", i, j + 1)


def _crossing(values, key, level):
    axis, i, j = key
    a = values[i, j]
    if axis == "h":
        b = values[i, j + 1]
        t = (level - a) / (b - a)
        return (j + t, float(i))
    b = values[i + 1, j]
    t = (level - a) / (b - a)
    return (float(j), i + t)


def marching_squares(values, level):
    """
    Loops of the `level` iso-line in fractional (col, row) index coordinates.

    Returns (closed, open) lists of (k, 2) arrays. Open chains end on the grid border.
    """
    values = np.asarray(values, dtype=float)
    below = values < level
    case = (below[:-1, :-1] * 1 + below[:-1, 1:] * 2 + below[1:, 1:] * 4 + below[1:, :-1] * 8)

    links = {}
    for i, j in zip(*np.nonzero((case != 0) & (case != 15))):
        c = int(case[i, j])
        if c in (5, 10):
            center = values[i:i + 2, j:j + 2].mean() < level
            segments = _SADDLES[(c, bool(center))]
        else:
            segments = _SEGMENTS[c]
        for e0, e1 in segments:
            k0, k1 = _edge_key(i, j, e0), _edge_key(i, j, e1)
            links.setdefault(k0, []).append(k1)
            links.setdefault(k1, []).append(k0)

    closed, open_chains = [], []
    seen = set()
    # start open chains from their border ends so they are walked whole
    starts = sorted(links, key=lambda k: (len(links[k]) != 1, k))
    for start in starts:
        if start in seen:
            continue
        chain = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            nxt = [k for k in links[cur] if k != prev and k not in seen]
            if not nxt:
                break
            prev, cur = cur, nxt[0]
            chain.append(cur)
            seen.add(cur)
        pts = np.array([_crossing(values, k, level) for k in chain])
        if len(chain) > 2 and start in links[cur]:
            closed.append(pts)
        else:
            open_chains.append(pts)
    return closed, open_chains


def polygon_area(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def contains_point(poly, point):
    """Even-odd ray casting."""
    x, y = float(point[0]), float(point[1])
    xi, yi = poly[:, 0], poly[:, 1]
    xj, yj = np.roll(xi, 1), np.roll(yi, 1)
    straddle = (yi > y) != (yj > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = (xj - xi) * (y - yi) / (yj - yi) + xi
    return bool(np.count_nonzero(straddle & (x < x_cross)) % 2)


def point_segment_distance(points, poly):
    """Distance from each point to the closed polyline `poly`."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a = poly
    b = np.roll(poly, -1, axis=0)
    ab = b - a
    ab2 = np.einsum("ij,ij->i", ab, ab)
    ab2[ab2 == 0] = 1.0
    ap = pts[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("pij,ij->pi", ap, ab) / ab2, 0.0, 1.0)
    closest = a[None, :, :] + t[..., None] * ab[None, :, :]
    return np.linalg.norm(pts[:, None, :] - closest, axis=2).min(axis=1)


def resample_closed(poly, n_points):
    """n_points spaced evenly by arc length around a closed polyline."""
    ring = np.vstack([poly, poly[:1]])
    seg = np.linalg.norm(np.diff(ring, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.linspace(0.0, arc[-1], n_points, endpoint=False)
    return np.column_stack([np.interp(s, arc, ring[:, 0]), np.interp(s, arc, ring[:, 1])])


def is_simple(poly):
    """True when no two non-adjacent edges of the closed polyline cross."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    n = len(poly)
    if n < 4:
        return n == 3

    def orient(p, q, r):
        return np.sign((q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1])
                       - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0]))

    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]
    o1 = orient(a[i], b[i], a[j])
    o2 = orient(a[i], b[i], b[j])
    o3 = orient(a[j], b[j], a[i])
    o4 = orient(a[j], b[j], b[i])
    crossing = (o1 * o2 < 0) & (o3 * o4 < 0)
    return not bool(np.any(crossing))


def quadrant_shares(points, center):
    """Fraction of points in each quadrant around center: (+x+y, -x+y, -x-y, +x-y)."""
    d = np.asarray(points, dtype=float) - np.asarray(center, dtype=float)[:2]
    east, north = d[:, 0] >= 0, d[:, 1] >= 0
    counts = np.array([
        np.count_nonzero(east & north),
        np.count_nonzero(~east & north),
        np.count_nonzero(~east & ~north),
        np.count_nonzero(east & ~north),
    ], dtype=float)
    return counts / max(len(d), 1)
