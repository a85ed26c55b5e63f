"""Deterministic generation of cluttered test maps.

Obstacles are axis-aligned rectangles and discs placed with a guaranteed
physical clearance of at least 4R between each other and the border, so the
C-space keeps every passage at least 2R wide. The layout is verified by
counting internal C-space components after inflation and regenerated from a
derived seed when inflation merged any obstacles.
"""

import math

import numpy as np

from .gridmap import GridMap
from .oracle import find_anchors
from .search import octile_astar


class GenerationError(ValueError):
    """The requested obstacle count does not fit with the spacing rule."""


def _place(rng, occ, cell_size, robot_radius, n_obstacles):
    h, w = occ.shape
    r_cells = max(1, int(math.ceil(robot_radius / cell_size)))
    clearance = 4 * r_cells + 2          # physical >= 4R plus slack
    border = clearance + r_cells + 1
    min_side = max(3, 2 * r_cells)
    max_side = max(min_side + 1, min(h, w) // 5)
    boxes = []
    for i in range(n_obstacles):
        placed = False
        for _attempt in range(400):
            bw = int(rng.integers(min_side, max_side + 1))
            bh = int(rng.integers(min_side, max_side + 1))
            if i == 0:
                # first obstacle straddles the map's horizontal midline so
                # the canonical left-to-right query is multiply routed
                lo = max(border, h // 2 - bh + 1)
                hi = min(h - border - bh, h // 2 - 1)
                if hi < lo:
                    lo, hi = border, h - border - bh
                r0 = int(rng.integers(lo, hi + 1))
                c0 = int(rng.integers(w // 4, max(w // 4 + 1, 3 * w // 4 - bw)))
            else:
                r0 = int(rng.integers(border, h - border - bh))
                c0 = int(rng.integers(border, w - border - bw))
            box = (r0, c0, r0 + bh, c0 + bw)
            if all(_box_gap(box, other) >= clearance for other in boxes):
                boxes.append(box)
                placed = True
                break
        if not placed:
            return None
        r0, c0, r1, c1 = boxes[-1]
        if rng.random() < 0.4:
            # disc inscribed in the box
            cy, cx = (r0 + r1) / 2.0, (c0 + c1) / 2.0
            rad = min(r1 - r0, c1 - c0) / 2.0
            rows, cols = np.ogrid[r0:r1, c0:c1]
            occ[r0:r1, c0:c1] |= ((rows - cy + 0.5) ** 2
                                  + (cols - cx + 0.5) ** 2) <= rad * rad
        else:
            occ[r0:r1, c0:c1] = True
    return occ


def _box_gap(a, b):
    dr = max(b[0] - a[2], a[0] - b[2], 0)
    dc = max(b[1] - a[3], a[1] - b[3], 0)
    return math.hypot(dr, dc)


def generate_map(width: int, height: int, n_obstacles: int, seed: int,
                 cell_size: float = 1.0, robot_radius: float = 1.0) -> GridMap:
    """Deterministic sealed map with exactly n internal C-space obstacles."""
    if width < 8 or height < 8:
        raise GenerationError("map too small to seal and populate")
    for attempt in range(50):
        rng = np.random.default_rng(seed * 1000003 + attempt)
        occ = np.zeros((height, width), dtype=bool)
        if n_obstacles and _place(rng, occ, cell_size, robot_radius,
                                  n_obstacles) is None:
            continue
        grid = GridMap(occ, cell_size, robot_radius)
        if len(find_anchors(grid)) == n_obstacles:
            return grid
    raise GenerationError(
        f"could not fit {n_obstacles} obstacles with 4R spacing in "
        f"{width}x{height} (seed {seed})")


def _nearest_free(grid: GridMap, cell):
    if grid.is_free(cell):
        return cell
    h, w = grid.height, grid.width
    for radius in range(1, max(h, w)):
        for dr in range(-radius, radius + 1):
            for dc in range(-radius, radius + 1):
                if max(abs(dr), abs(dc)) != radius:
                    continue
                cand = (cell[0] + dr, cell[1] + dc)
                if 0 <= cand[0] < h and 0 <= cand[1] < w and grid.is_free(cand):
                    return cand
    raise GenerationError("map has no free cell")


def default_endpoints(grid: GridMap):
    """Deterministic mutually reachable start/goal cells on the map's
    horizontal midline, biased toward the left and right edges."""
    row = grid.height // 2
    start = _nearest_free(grid, (row, max(2, grid.width // 8)))
    goal = _nearest_free(grid, (row, grid.width - 1 - max(2, grid.width // 8)))
    if octile_astar(grid.free, start, goal) is None:
        # fall back to any reachable pair in the start's component
        from .search import region_component
        region = region_component(grid.free, start)
        rows, cols = np.nonzero(region)
        order = np.argmax(cols)
        goal = (int(rows[order]), int(cols[order]))
    return start, goal
