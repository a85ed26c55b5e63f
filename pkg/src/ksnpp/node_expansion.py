"""Construction of one topological tree node: sparse raycasting with the
two stopping criteria, gap detection, corridor planning, ray repair after
planning failures, and gap sweeping.

Everything here is a pure function over an immutable GridMap plus the
node-local ray fan, so independent planner instances can run concurrently.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .gridmap import CollisionError, GridMap
from .search import octile_astar

log = logging.getLogger("ksnpp")


class RefinementError(RuntimeError):
    """Ray bisection failed to terminate inside the depth cap."""


@dataclass
class Ray:
    theta: float                      # within the fan's [theta_min, theta_max]
    endpoint: tuple[float, float]     # centre of the hit (inflated) cell
    length: float


@dataclass
class RayFan:
    source: tuple[float, float]
    theta_min: float
    theta_max: float
    rays: list[Ray]
    is_root: bool = False


@dataclass
class Gap:
    """Depth discontinuity between two consecutive rays of the fan."""
    near: Ray
    far: Ray
    near_is_first: bool               # near ray has the lower fan angle

    @property
    def e_near(self):
        return self.near.endpoint

    @property
    def e_far(self):
        return self.far.endpoint

    @property
    def phi_near(self) -> float:
        return self.near.length

    @property
    def phi_far(self) -> float:
        return self.far.length

    def key(self):
        return (round(self.near.theta, 9), round(self.far.theta, 9),
                self.near.endpoint, self.far.endpoint)


@dataclass
class Corridor:
    """Collision-free part of the rectangle hugging the gap's far ray.

    In the (a_hat, b_hat) frame the rectangle is phi in [0, phi_near],
    psi in [-R, R]; the critical point sits at (phi_near, +R), on the side
    of the far ray away from the near ray so it clears the near obstacle.
    critical_eff is the planning target actually used: it equals the
    critical point unless cell-centre snapping put that point's cell inside
    the inflation, in which case it is nudged outward along b_hat.
    """
    gap: Gap
    source: tuple[float, float]
    radius: float
    a_hat: tuple[float, float]
    b_hat: tuple[float, float]
    critical: tuple[float, float]
    critical_eff: tuple[float, float] | None = None

    @property
    def effective(self):
        return self.critical_eff if self.critical_eff is not None else self.critical

    def frame_of(self, point):
        vx, vy = point[0] - self.source[0], point[1] - self.source[1]
        return (vx * self.a_hat[0] + vy * self.a_hat[1],
                vx * self.b_hat[0] + vy * self.b_hat[1])

    def contains(self, point, tol: float = 1e-9) -> bool:
        phi, psi = self.frame_of(point)
        return (-tol <= phi <= self.gap.phi_near + tol
                and -self.radius - tol <= psi <= self.radius + tol)


@dataclass
class Edge:
    """Grid-optimal path from the node source to the critical point."""
    polyline: list[tuple[float, float]]
    length: float


@dataclass
class GapSweeper:
    """Collision-checked segment from the critical point along the far ray."""
    start: tuple[float, float]        # the critical point
    end: tuple[float, float]          # o: last collision-free position
    e_far: tuple[float, float]        # obstacle that stopped the sweep
    e_near: tuple[float, float]

    @property
    def length(self) -> float:
        return geo.dist(self.start, self.end)


@dataclass
class Failure:
    new_obstacles: list[tuple[float, float]] = field(default_factory=list)


# -- sparse raycasting -------------------------------------------------------

def _classify_pair(source, ra: Ray, rb: Ray, two_r: float, eps: float,
                   cell_size: float) -> str:
    """Apply the two stopping criteria to a consecutive ray pair."""
    if geo.dist(ra.endpoint, rb.endpoint) < two_r:
        return "blocked"
    near, far = (ra, rb) if ra.length <= rb.length else (rb, ra)
    # Perpendicular distance of the near obstacle from the far ray, as a
    # cross product: algebraically equal to the difference of squared
    # projections but immune to the cancellation that form suffers for
    # near-collinear endpoints. Two quantisation effects matter: the far
    # direction is the cast angle, not the snapped endpoint bearing (the
    # snapped bearing stops converging once the hit cell stabilises, so the
    # criterion would never accept a genuine discontinuity), and the near
    # distance is measured to the hit cell's square extent, not its centre
    # (a grazing ray cannot pass closer than half a cell diagonal to the
    # snapped centre).
    ux, uy = geo.unit(geo.norm_angle(far.theta))
    vx, vy = near.endpoint[0] - source[0], near.endpoint[1] - source[1]
    support = 0.5 * cell_size * (abs(ux) + abs(uy))
    if max(0.0, abs(vx * uy - vy * ux) - support) < eps:
        return "gap"
    return "split"


def _refine(grid: GridMap, fan: RayFan, eps: float, depth_cap: int):
    """Insert bisector rays until every consecutive pair satisfies one of
    the stopping criteria. Returns the detected gaps."""
    source = fan.source
    two_r = 2.0 * grid.robot_radius

    def cast(theta):
        hit, phi = grid.raycast(source, geo.norm_angle(theta), lattice="occupancy")
        return Ray(theta, hit, phi)

    out = [fan.rays[0]]
    gaps = []
    for right in fan.rays[1:]:
        stack = [(out[-1], right, 0)]
        # Depth-first bisection keeps the ray list angle-ordered as pairs
        # resolve left to right.
        while stack:
            ra, rb, depth = stack.pop()
            verdict = _classify_pair(source, ra, rb, two_r, eps, grid.cell_size)
            if verdict == "split" and rb.theta - ra.theta < 1e-12:
                verdict = "blocked"  # below angular float resolution
            if verdict == "split":
                if depth >= depth_cap:
                    raise RefinementError(
                        f"bisection depth cap {depth_cap} hit in "
                        f"[{ra.theta:.6f}, {rb.theta:.6f}] from {source}")
                mid = cast(0.5 * (ra.theta + rb.theta))
                stack.append((mid, rb, depth + 1))
                stack.append((ra, mid, depth + 1))
                continue
            if verdict == "gap":
                near_is_first = ra.length <= rb.length
                near, far = (ra, rb) if near_is_first else (rb, ra)
                gaps.append(Gap(near, far, near_is_first))
            out.append(rb)
        # leftmost ray of each interval is already in `out`
    fan.rays = out
    return gaps


def sparse_raycast(grid: GridMap, source, theta_min: float, theta_max: float,
                   eps: float, is_root: bool, depth_cap: int = 64):
    """Build a refined ray fan from the source and return it with its gaps.

    Root fans span the full circle and start from 5 rays; child fans start
    from the 2 boundary rays of their inherited range.
    """
    if not grid.is_free_point(source):
        raise CollisionError(f"fan source {source} is not collision-free")
    if not (theta_min < theta_max <= theta_min + geo.TWO_PI + 1e-12):
        raise ValueError("need theta_min < theta_max <= theta_min + 2*pi")
    if is_root:
        thetas = [0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi, geo.TWO_PI]
    else:
        thetas = [theta_min, theta_max]
    rays = []
    for t in thetas:
        hit, phi = grid.raycast(source, geo.norm_angle(t), lattice="occupancy")
        rays.append(Ray(t, hit, phi))
    fan = RayFan(source, thetas[0], thetas[-1], rays, is_root)
    gaps = _refine(grid, fan, eps, depth_cap)
    return fan, gaps


def refine_fan(grid: GridMap, fan: RayFan, eps: float, depth_cap: int = 64):
    """Re-run the insertion criteria over an existing fan (fixed point on
    an already refined fan)."""
    return _refine(grid, fan, eps, depth_cap)


# -- corridors ---------------------------------------------------------------

def build_corridor(gap: Gap, source, radius: float) -> Corridor:
    """Attach the planning rectangle and critical point to a gap.

    a_hat runs along the far ray; b_hat is its perpendicular oriented away
    from the near ray, which puts the critical point on the free side of
    the gap opening.
    """
    a_hat = geo.unit(geo.norm_angle(gap.far.theta))
    b_hat = geo.rot_ccw(a_hat) if gap.near_is_first else geo.rot_cw(a_hat)
    c = (source[0] + gap.phi_near * a_hat[0] + radius * b_hat[0],
         source[1] + gap.phi_near * a_hat[1] + radius * b_hat[1])
    return Corridor(gap, source, radius, a_hat, b_hat, c)


def _corridor_cells(grid: GridMap, corridor: Corridor):
    """Cells whose centres lie in the closed rectangle, as a boolean mask
    over the rectangle's bounding box. Membership carries a half-cell
    margin (ties resolved as inside): with exact boundaries, centre
    snapping routinely disconnects the source from the critical corner
    inside the thin strip."""
    s = grid.cell_size
    src, c = corridor.source, corridor.critical
    corners = []
    for phi in (0.0, corridor.gap.phi_near):
        for psi in (-corridor.radius, corridor.radius):
            corners.append((src[0] + phi * corridor.a_hat[0] + psi * corridor.b_hat[0],
                            src[1] + phi * corridor.a_hat[1] + psi * corridor.b_hat[1]))
    xs = [p[0] for p in corners]
    ys = [p[1] for p in corners]
    r0 = max(0, int(math.floor(min(ys) / s)) - 1)
    r1 = min(grid.height - 1, int(math.floor(max(ys) / s)) + 1)
    c0 = max(0, int(math.floor(min(xs) / s)) - 1)
    c1 = min(grid.width - 1, int(math.floor(max(xs) / s)) + 1)
    rows = np.arange(r0, r1 + 1)
    cols = np.arange(c0, c1 + 1)
    cy = (rows[:, None] + 0.5) * s - src[1]
    cx = (cols[None, :] + 0.5) * s - src[0]
    phi = cx * corridor.a_hat[0] + cy * corridor.a_hat[1]
    psi = cx * corridor.b_hat[0] + cy * corridor.b_hat[1]
    # overlap semantics: a cell belongs to the corridor when its square
    # meets the closed rectangle, i.e. its centre lies within the rectangle
    # dilated by the half diagonal
    tol = 0.5 * math.sqrt(2.0) * s + 1e-9 * max(1.0, corridor.gap.phi_near)
    member = ((phi >= -tol) & (phi <= corridor.gap.phi_near + tol)
              & (np.abs(psi) <= corridor.radius + tol))
    # The endpoint cells are geometric members of the corridor even when
    # their centres stray just outside the rectangle.
    for pt in (src, c):
        cell = grid.cell_of(pt)
        if r0 <= cell[0] <= r1 and c0 <= cell[1] <= c1:
            member[cell[0] - r0, cell[1] - c0] = True
    return member, (r0, c0)


def _settle_critical(grid: GridMap, corridor: Corridor):
    """Planning target for the corridor: the critical point, nudged outward
    along b_hat by up to one cell when its own cell snapped into the
    inflation (the point sits at distance exactly R from the near obstacle,
    so half-cell snapping can land it on the blocked side)."""
    c = corridor.critical
    if grid.is_free_point(c):
        return c
    bx, by = corridor.b_hat
    step = 0.25 * grid.cell_size
    for i in range(1, 5):
        cand = (c[0] + i * step * bx, c[1] + i * step * by)
        if grid.is_free_point(cand):
            return cand
    return None


def _physical_obstacles(grid: GridMap, cells, known_cells):
    """Physical cells generating the given inflated cells, excluding
    obstacles an existing ray already points at."""
    out, seen = [], set()
    for cell in cells:
        src = grid.physical_source(grid.center_of(cell))
        if src is not None and src not in seen and src not in known_cells:
            seen.add(src)
            out.append(grid.center_of(src))
    return out


def plan_in_corridor(grid: GridMap, corridor: Corridor,
                     known_cells: frozenset | set = frozenset()):
    """Grid-optimal path from the source to the critical point inside the
    corridor rectangle.

    On failure returns Failure carrying the physical obstacles blocking the
    rectangle that no current ray points at (the missing obstacles that
    must be excluded by ray repair).
    """
    member, (r0, c0) = _corridor_cells(grid, corridor)
    block = grid.inflated[r0:r0 + member.shape[0], c0:c0 + member.shape[1]]

    def undetected():
        rows, cols = np.nonzero(member & block)
        cells = [(r + r0, c + c0) for r, c in zip(rows.tolist(), cols.tolist())]
        return Failure(_physical_obstacles(grid, cells, known_cells))

    target = _settle_critical(grid, corridor)
    if target is None:
        return undetected()
    corridor.critical_eff = target
    start = grid.cell_of(corridor.source)
    goal = grid.cell_of(target)
    if not (0 <= goal[0] - r0 < member.shape[0]
            and 0 <= goal[1] - c0 < member.shape[1]):
        return undetected()
    member[goal[0] - r0, goal[1] - c0] = True
    passable = member & ~block
    found = octile_astar(passable, (start[0] - r0, start[1] - c0),
                         (goal[0] - r0, goal[1] - c0))
    if found is None:
        return undetected()
    cells, length = found
    polyline = [grid.center_of((r + r0, c + c0)) for r, c in cells]
    return Edge(polyline, length * grid.cell_size)


# -- ray repair --------------------------------------------------------------

def repair_rays(grid: GridMap, fan: RayFan, new_obstacles, eps: float,
                depth_cap: int = 64):
    """Exclude obstacles the sparse rays missed.

    Inserts a ray toward each visible new obstacle, removes every ray
    strictly between two endpoints closer than 2R, re-runs the refinement,
    and returns the fan with the freshly derived gap list.
    """
    source = fan.source
    two_r = 2.0 * grid.robot_radius
    for obs in new_obstacles:
        theta = math.atan2(obs[1] - source[1], obs[0] - source[0])
        # lift into the fan's angular window
        theta = geo.norm_angle(theta)
        while theta < fan.theta_min - 1e-12:
            theta += geo.TWO_PI
        if theta > fan.theta_max + 1e-12:
            log.warning("new obstacle %s outside fan range, ignored", obs)
            continue
        theta = min(max(theta, fan.theta_min), fan.theta_max)
        hit, phi = grid.raycast(source, geo.norm_angle(theta), lattice="occupancy")
        if grid.cell_of(hit) != grid.cell_of(obs):
            log.warning("new obstacle %s not visible from %s, ignored", obs, source)
            continue
        _insert_ray(fan, Ray(theta, hit, phi))
    _remove_blocked(fan, two_r)
    gaps = _refine(grid, fan, eps, depth_cap)
    return fan, gaps


def _insert_ray(fan: RayFan, ray: Ray):
    for i, existing in enumerate(fan.rays):
        if abs(existing.theta - ray.theta) < 1e-12:
            return
        if existing.theta > ray.theta:
            fan.rays.insert(i, ray)
            return
    fan.rays.append(ray)


def _remove_blocked(fan: RayFan, two_r: float):
    """Drop all rays strictly between any two endpoints closer than 2R.

    The pair's angular span must stay below pi: a sub-2R pinch segment can
    never subtend a half turn from a free source, and the guard keeps the
    root fan's duplicated 0/2*pi boundary rays from wiping the whole fan.
    """
    changed = True
    while changed:
        changed = False
        rays = fan.rays
        n = len(rays)
        for i in range(n - 2):
            for j in range(i + 2, n):
                if rays[j].theta - rays[i].theta >= math.pi:
                    break
                if geo.dist(rays[i].endpoint, rays[j].endpoint) < two_r:
                    del rays[i + 1:j]
                    changed = True
                    break
            if changed:
                break


# -- gap sweeping ------------------------------------------------------------

def sweep_gap(grid: GridMap, corridor: Corridor,
              known_cells: frozenset | set = frozenset()):
    """Collision-check the segment from the critical point along the far
    ray until the far extent or the first obstacle.

    An early collision (more than 2R before the far extent) against an
    obstacle no ray points at is a missed obstacle: the caller must repair
    the fan, so it is reported as a Failure.
    """
    gap = corridor.gap
    step = 0.5 * grid.cell_size
    span = gap.phi_far - gap.phi_near
    n_steps = max(1, int(math.ceil(span / step)))
    phis = [gap.phi_near + span * i / n_steps for i in range(n_steps + 1)]
    origin = corridor.effective
    ax, ay = corridor.a_hat

    def at(phi):
        d = phi - gap.phi_near
        return (origin[0] + d * ax, origin[1] + d * ay)

    prev = at(phis[0])
    for phi in phis[1:]:
        pt = at(phi)
        cell = grid.cell_of(pt)
        if not grid.is_free(cell):
            physical = grid.physical_source(pt) if grid.in_bounds(cell) else None
            blocker = grid.center_of(physical) if physical else pt
            early = phi < gap.phi_far - 2.0 * grid.robot_radius
            if early and physical is not None and physical not in known_cells:
                return Failure([blocker])
            return GapSweeper(origin, prev, blocker, gap.e_near)
        prev = pt
    return GapSweeper(origin, at(gap.phi_far), gap.e_far, gap.e_near)


def child_orientation_range(corridor: Corridor, sweeper: GapSweeper):
    """Angular window for the child node seeded at the critical point.

    Spans from the far obstacle's bearing to the near obstacle's bearing
    (ordered by which ray of the pair is longer), shifted so that
    0 <= theta_min < 2*pi and theta_min < theta_max < theta_min + 2*pi.
    """
    c = corridor.effective
    theta_f = math.atan2(sweeper.e_far[1] - c[1], sweeper.e_far[0] - c[0])
    theta_n = math.atan2(corridor.gap.e_near[1] - c[1], corridor.gap.e_near[0] - c[0])
    if corridor.gap.near_is_first:
        lo, hi = theta_n, theta_f
    else:
        lo, hi = theta_f, theta_n
    lo = geo.norm_angle(lo)
    hi = geo.norm_angle(hi)
    if hi <= lo + 1e-12:
        hi += geo.TWO_PI
    return lo, hi
