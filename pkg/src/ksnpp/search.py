"""Shared grid search machinery: octile A*, flood-fill regions, and a fast
minimum-cost-path route for large regions.

All functions here work in cell units; callers convert lengths to metres.
The metric is 8-connected octile (straight 1, diagonal sqrt(2)) and diagonal
moves are allowed only when both adjacent orthogonal cells are passable.
"""

import heapq
import math

import numpy as np
from scipy import ndimage

from . import geometry as geo

SQRT2 = math.sqrt(2.0)
DIRS8 = (
    (-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0),
    (-1, -1, SQRT2), (-1, 1, SQRT2), (1, -1, SQRT2), (1, 1, SQRT2),
)
_EIGHT = np.ones((3, 3), dtype=bool)

# Regions larger than this use the compiled minimum-cost-path search; the
# result is validated against the corner-cutting rule and falls back to the
# Python A* when it would cut a blocked corner.
MCP_THRESHOLD = 20000


def octile(dr: int, dc: int) -> float:
    dr, dc = abs(dr), abs(dc)
    return max(dr, dc) + (SQRT2 - 1.0) * min(dr, dc)


def octile_astar(passable: np.ndarray, start, goal):
    """8-connected A* with octile costs and no diagonal corner cutting.

    Returns (cells, length) or None when the goal is unreachable.
    """
    h, w = passable.shape
    sr, sc = start
    gr, gc = goal
    if not (passable[sr, sc] and passable[gr, gc]):
        return None
    pas = passable.ravel()
    n = h * w
    dist = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    s_idx, g_idx = sr * w + sc, gr * w + gc
    dist[s_idx] = 0.0
    heap = [(octile(gr - sr, gc - sc), 0.0, s_idx)]
    while heap:
        f, d, idx = heapq.heappop(heap)
        if idx == g_idx:
            cells = []
            while idx != -1:
                cells.append((idx // w, idx % w))
                idx = parent[idx]
            cells.reverse()
            return cells, d
        if d > dist[idx]:
            continue
        r, c = idx // w, idx % w
        for dr, dc, step in DIRS8:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w):
                continue
            nidx = nr * w + nc
            if not pas[nidx]:
                continue
            if dr and dc and not (pas[r * w + nc] and pas[nr * w + c]):
                continue
            nd = d + step
            if nd < dist[nidx] - 1e-12:
                dist[nidx] = nd
                parent[nidx] = idx
                heapq.heappush(heap, (nd + octile(gr - nr, gc - nc), nd, nidx))
    return None


def _path_cuts_corner(passable: np.ndarray, cells) -> bool:
    for (r0, c0), (r1, c1) in zip(cells, cells[1:]):
        if r0 != r1 and c0 != c1:
            if not (passable[r0, c1] and passable[r1, c0]):
                return True
    return False


def _mcp_route(passable: np.ndarray, start, goal):
    from skimage.graph import MCP_Geometric
    costs = np.where(passable, 1.0, np.inf)
    mcp = MCP_Geometric(costs, fully_connected=True)
    cum, _ = mcp.find_costs([start], [goal])
    if not np.isfinite(cum[goal]):
        return None
    cells = [tuple(map(int, p)) for p in mcp.traceback(goal)]
    return cells, float(cum[goal])


def shortest_path(passable: np.ndarray, start, goal):
    """Region-restricted shortest grid path. Dispatches to the compiled
    route for large regions, keeping the no-corner-cutting contract."""
    if not (passable[start] and passable[goal]):
        return None
    if passable.size >= MCP_THRESHOLD:
        found = _mcp_route(passable, start, goal)
        if found is None:
            return None
        cells, length = found
        if not _path_cuts_corner(passable, cells):
            return cells, length
    return octile_astar(passable, start, goal)


class WallSet:
    """Line-segment walls with exact move-crossing semantics.

    Cell rasters over-block sub-cell geometry (a mouth narrower than two
    cells disappears entirely), so walls are kept as segments and a grid
    move is forbidden exactly when the centre-to-centre step properly
    crosses one of them.

    A wall may carry a one-way valve near its start: a gap-sweeper wall is
    entered legitimately at its critical point, so crossings from the
    valve's positive side within the entry window are allowed while every
    other crossing (in particular leaving the region again) is blocked.
    """

    def __init__(self, cell_size: float):
        self.cell_size = cell_size
        self.segments: list = []
        self._by_cell: dict = {}

    def add(self, p1, p2, valve=None, window: float = math.inf):
        """valve, when given, is the unit normal pointing at the entry
        side; window limits how far from the segment start (in metres) the
        inbound crossing may happen."""
        length = geo.dist(p1, p2)
        if length < 1e-12:
            return
        idx = len(self.segments)
        self.segments.append((p1, p2, valve, window, length))
        for cell in geo.supercover_cells(p1, p2, self.cell_size):
            self._by_cell.setdefault(cell, []).append(idx)

    def near(self, cell) -> bool:
        return cell in self._by_cell

    def _blocked_by(self, idx, pa, pb) -> bool:
        q1, q2, valve, window, length = self.segments[idx]
        hit = geo.seg_intersection(pa, pb, q1, q2)
        if hit is None:
            return False
        if valve is None:
            return True
        _, _, u = hit
        if u * length > window:
            return True
        side = (pa[0] - q1[0]) * valve[0] + (pa[1] - q1[1]) * valve[1]
        return side <= 0.0

    def blocks(self, cell_a, cell_b) -> bool:
        """True when the move between the two cell centres crosses a wall
        (valved crossings excepted)."""
        ids = self._by_cell.get(cell_a)
        ids_b = self._by_cell.get(cell_b)
        if not ids and not ids_b:
            return False
        s = self.cell_size
        pa = ((cell_a[1] + 0.5) * s, (cell_a[0] + 0.5) * s)
        pb = ((cell_b[1] + 0.5) * s, (cell_b[0] + 0.5) * s)
        for idx in ids or ():
            if self._blocked_by(idx, pa, pb):
                return True
        for idx in ids_b or ():
            if ids and idx in ids:
                continue
            if self._blocked_by(idx, pa, pb):
                return True
        return False


def wall_astar(passable: np.ndarray, start, goal, walls: WallSet | None):
    """Octile A* under the corner-cutting rule plus wall-crossing filters.

    Returns (cells, length_in_cells) or None when the goal is unreachable
    without crossing a wall segment.
    """
    if walls is None or not walls.segments:
        return octile_astar(passable, start, goal)
    h, w = passable.shape
    sr, sc = start
    gr, gc = goal
    if not (passable[sr, sc] and passable[gr, gc]):
        return None
    pas = passable.ravel()
    n = h * w
    dist = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    s_idx, g_idx = sr * w + sc, gr * w + gc
    dist[s_idx] = 0.0
    heap = [(octile(gr - sr, gc - sc), 0.0, s_idx)]
    while heap:
        f, d, idx = heapq.heappop(heap)
        if idx == g_idx:
            cells = []
            while idx != -1:
                cells.append((idx // w, idx % w))
                idx = parent[idx]
            cells.reverse()
            return cells, d
        if d > dist[idx]:
            continue
        r, c = idx // w, idx % w
        filtered = walls.near((r, c))
        for dr, dc, step in DIRS8:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w):
                continue
            nidx = nr * w + nc
            if not pas[nidx]:
                continue
            if dr and dc and not (pas[r * w + nc] and pas[nr * w + c]):
                continue
            nd = d + step
            if nd >= dist[nidx] - 1e-12:
                continue
            if (filtered or walls.near((nr, nc))) and walls.blocks((r, c), (nr, nc)):
                continue
            dist[nidx] = nd
            parent[nidx] = idx
            heapq.heappush(heap, (nd + octile(gr - nr, gc - nc), nd, nidx))
    return None


def region_component(passable: np.ndarray, seed):
    """Component of the seed under the planner's movement rule, or None if
    the seed is blocked.

    A diagonal move is legal only when both orthogonal neighbours are
    passable, so it never connects cells a 4-connected walk cannot reach;
    reachability is therefore exactly 4-connectivity.
    """
    if not passable[seed]:
        return None
    labels, _ = ndimage.label(passable)
    return labels == labels[seed]


def grid_reachable(passable: np.ndarray, start, goal) -> bool:
    """Exhaustive reachability on the lattice (used to confirm no-path verdicts)."""
    region = region_component(passable, start)
    return region is not None and bool(region[goal])
