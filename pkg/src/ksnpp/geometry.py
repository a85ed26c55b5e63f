"""Small 2D geometry helpers shared by the planner modules.

Points are plain (x, y) tuples in world metres, angles are radians.
Grid cells are (row, col) tuples; col maps to x and row maps to y via
floor(coord / cell_size).
"""

import math

TWO_PI = 2.0 * math.pi


def norm_angle(theta: float) -> float:
    """Map an angle into [0, 2*pi)."""
    t = math.fmod(theta, TWO_PI)
    return t + TWO_PI if t < 0.0 else t


def unit(theta: float):
    return (math.cos(theta), math.sin(theta))


def rot_ccw(v):
    return (-v[1], v[0])


def rot_cw(v):
    return (v[1], -v[0])


def dist(a, b) -> float:
    return math.hypot(b[0] - a[0], b[1] - a[1])


def polyline_length(points) -> float:
    return sum(dist(points[i], points[i + 1]) for i in range(len(points) - 1))


def point_on_polyline(points, arc: float):
    """Point at the given arc length along a polyline (clamped)."""
    if arc <= 0.0:
        return points[0]
    acc = 0.0
    for a, b in zip(points, points[1:]):
        step = dist(a, b)
        if acc + step >= arc and step > 0.0:
            t = (arc - acc) / step
            return (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
        acc += step
    return points[-1]


def seg_intersection(p1, p2, p3, p4):
    """Proper crossing of segments p1p2 and p3p4.

    Returns (q, t, u) with q the crossing point and t, u the fractional
    positions along each segment, or None. Endpoint touches and collinear
    overlaps do not count: the pruning criteria require q to be strictly
    interior to both structures.
    """
    d1x, d1y = p2[0] - p1[0], p2[1] - p1[1]
    d2x, d2y = p4[0] - p3[0], p4[1] - p3[1]
    denom = d1x * d2y - d1y * d2x
    if abs(denom) < 1e-12:
        return None
    ex, ey = p3[0] - p1[0], p3[1] - p1[1]
    t = (ex * d2y - ey * d2x) / denom
    u = (ex * d1y - ey * d1x) / denom
    eps = 1e-9
    if eps < t < 1.0 - eps and eps < u < 1.0 - eps:
        return (p1[0] + t * d1x, p1[1] + t * d1y), t, u
    return None


def _gridline_crossings(c0: float, c1: float):
    """Fractions t in (0, 1) where the coordinate crosses integer gridlines."""
    if c1 == c0:
        return []
    lo, hi = (c0, c1) if c0 < c1 else (c1, c0)
    ts = []
    k = math.floor(lo) + 1
    while k < hi:
        ts.append((k - c0) / (c1 - c0))
        k += 1
    return ts


def traversed_cells(p1, p2, cell_size: float):
    """Cells (row, col) a segment passes through, in order, via exact DDA.

    Cells touched only at a corner point (zero chord) are skipped.
    """
    x0, y0 = p1[0] / cell_size, p1[1] / cell_size
    x1, y1 = p2[0] / cell_size, p2[1] / cell_size
    ts = sorted([0.0] + _gridline_crossings(x0, x1) + _gridline_crossings(y0, y1) + [1.0])
    cells = []
    for a, b in zip(ts, ts[1:]):
        if b - a < 1e-12:
            continue
        m = 0.5 * (a + b)
        cell = (math.floor(y0 + m * (y1 - y0)), math.floor(x0 + m * (x1 - x0)))
        if not cells or cells[-1] != cell:
            cells.append(cell)
    return cells


def supercover_cells(p1, p2, cell_size: float):
    """Cells of a segment, thickened so diagonal steps include both side
    cells. A mask rasterised this way cannot be crossed by an 8-connected
    flood fill."""
    cells = traversed_cells(p1, p2, cell_size)
    out = []
    seen = set()

    def push(c):
        if c not in seen:
            seen.add(c)
            out.append(c)

    for i, c in enumerate(cells):
        if i > 0:
            pr, pc = cells[i - 1]
            if pr != c[0] and pc != c[1]:
                push((pr, c[1]))
                push((c[0], pc))
        push(c)
    return out


def rasterize_polyline(points, cell_size: float):
    """Supercover cells of an entire polyline."""
    out = []
    seen = set()
    for a, b in zip(points, points[1:]):
        for c in supercover_cells(a, b, cell_size):
            if c not in seen:
                seen.add(c)
                out.append(c)
    if len(points) == 1:
        c = (math.floor(points[0][1] / cell_size), math.floor(points[0][0] / cell_size))
        out.append(c)
    return out
