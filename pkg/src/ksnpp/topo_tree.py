"""Best-first growth of the hierarchical topological tree.

Each expansion turns one leaf (an unexpanded critical point) into a node:
sparse raycasting, per-gap corridor planning and sweeping with the repair
loop, goal detection inside the new node's sub-region, and the pruning
bookkeeping. Result paths are extracted lazily: a goal candidate found in a
sub-region is emitted only once no open leaf could still beat its length,
so emitted lengths are nondecreasing and deduplicated by homotopy signature.
"""

import heapq
import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .gridmap import CollisionError, GridMap
from .node_expansion import (Corridor, Edge, Failure, Gap, GapSweeper,
                             build_corridor, child_orientation_range,
                             plan_in_corridor, repair_rays, sparse_raycast,
                             sweep_gap)
from .oracle import find_anchors, signature_of_path, signature_str
from .pruning import (CRITERIA, ROOT_BRANCH, RelationStore, SegmentIndex,
                      StructRef, collect_intersections, crit_edge_edge,
                      crit_goal_dependent, crit_result_bound,
                      crit_sweeper_edge, crit_sweeper_sweeper, opening_probe,
                      should_prune, theta_region_test)
from .search import WallSet, octile, octile_astar, wall_astar

log = logging.getLogger("ksnpp")


@dataclass
class PlannerOptions:
    epsilon: float | None = None       # ray insertion tolerance; default 0.1 * cell
    max_expansions: int = 100000       # safety net for adversarial inputs
    prune: bool = True
    expansion_order: str = "f"         # "f" (priority queue) or "fifo"
    bisect_depth: int = 64
    repair_limit: int = 256            # per-node repair invocations


@dataclass
class LeafEntry:
    """One unexpanded critical point, with its queue costs."""
    node_id: int
    child_index: int
    critical: tuple[float, float]
    g: float
    h: float
    pruned: bool = False
    prune_reason: str = ""
    dead: bool = False
    expanded: bool = False

    @property
    def f(self) -> float:
        return self.g + self.h

    @property
    def branch(self):
        return (self.node_id, self.child_index)

    @property
    def alive(self) -> bool:
        return not (self.pruned or self.dead or self.expanded)


@dataclass
class ChildStructure:
    gap: Gap
    corridor: Corridor
    edge: Edge
    sweeper: GapSweeper
    theta_range: tuple[float, float]
    leaf: LeafEntry


@dataclass
class TreeNode:
    id: int
    parent_id: int | None
    child_index_in_parent: int | None
    source: tuple[float, float]
    theta_min: float
    theta_max: float
    fan: object
    children: list[ChildStructure]
    g_source: float
    path_polyline: list            # tree path of the source, start to source
    branch_path: tuple = ()        # child indices from the root to this node

    @property
    def branch(self):
        if self.parent_id is None:
            return ROOT_BRANCH
        return (self.parent_id, self.child_index_in_parent)


@dataclass
class ResultPath:
    polyline: list
    length: float
    branch: list[int]              # node ids, root first
    signature: tuple[int, ...]

    @property
    def signature_text(self) -> str:
        return signature_str(self.signature)


@dataclass
class PlanStats:
    expansions: int = 0
    pruned_leaves: int = 0
    pruned: dict = field(default_factory=lambda: {c: 0 for c in CRITERIA})
    dead_leaves: int = 0
    candidates: int = 0
    wall_ms: float = 0.0
    classes_exhausted: bool = False
    no_path: bool = False
    incomplete: bool = False


class ExpansionError(RuntimeError):
    """A node construction failed; the leaf is marked dead."""


class Planner:
    """Single k-SNPP query over a shared immutable GridMap."""

    def __init__(self, grid: GridMap, p_start, p_goal, k: int,
                 options: PlannerOptions | None = None):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.grid = grid
        self.options = options or PlannerOptions()
        self.k = k
        self.start = tuple(p_start)
        self.goal = tuple(p_goal)
        if not grid.is_free_point(self.start):
            raise CollisionError(f"start {p_start} is in collision")
        if not grid.is_free_point(self.goal):
            raise CollisionError(f"goal {p_goal} is in collision")
        self.eps = (self.options.epsilon if self.options.epsilon is not None
                    else 0.1 * grid.cell_size)
        self.nodes: list[TreeNode] = []
        self.leaves: list[LeafEntry] = []
        self._heap = []                       # (f, g, node_id, seq, leaf)
        self._fifo = deque()
        self._seq = 0
        self._candidates = []                 # (length, seq, node_id, cells)
        self.results: list[ResultPath] = []
        self._emitted = set()
        self.store = RelationStore()
        self.index = SegmentIndex(bucket=8.0 * grid.cell_size)
        self.anchors = find_anchors(grid)
        self.stats = PlanStats()
        self._proven_no_path = False

    # -- node construction ---------------------------------------------------

    def _construct(self, source, theta_min, theta_max, is_root):
        """Sparse raycast plus the per-gap corridor/plan/sweep repair loop.

        Returns (fan, completed) where completed preserves gap processing
        order. A gap whose corridor admits no path is removed; a sweep that
        hits a missed obstacle keeps its structures, repairs the fan, and
        re-sweeps (the new rays re-partition the remaining sector).
        """
        grid = self.grid
        opts = self.options
        fan, gaps = sparse_raycast(grid, source, theta_min, theta_max,
                                   self.eps, is_root, opts.bisect_depth)
        completed: dict = {}
        dead: set = set()
        queue = deque(gaps)
        repairs = 0

        def known_cells():
            return frozenset(grid.cell_of(r.endpoint) for r in fan.rays)

        def repair(obstacles, failed_key):
            nonlocal fan, queue, repairs
            repairs += 1
            if repairs > opts.repair_limit:
                raise ExpansionError(
                    f"repair limit {opts.repair_limit} exceeded at {source}")
            fan, new_gaps = repair_rays(grid, fan, obstacles, self.eps,
                                        opts.bisect_depth)
            queue = deque(g for g in new_gaps
                          if g.key() not in completed and g.key() not in dead
                          and g.key() != failed_key)

        while queue:
            gap = queue.popleft()
            key = gap.key()
            if key in completed or key in dead:
                continue
            corridor = build_corridor(gap, source, grid.robot_radius)
            planned = plan_in_corridor(grid, corridor, known_cells())
            if isinstance(planned, Failure):
                dead.add(key)
                if planned.new_obstacles:
                    repair(planned.new_obstacles, key)
                continue
            tolerated: set = set()
            while True:
                swept = sweep_gap(grid, corridor, known_cells() | tolerated)
                if isinstance(swept, Failure):
                    before = len(fan.rays)
                    repair(swept.new_obstacles, None)
                    if len(fan.rays) == before:
                        # obstacle invisible from the source: accept the
                        # truncated sweeper instead of repairing forever
                        tolerated.update(grid.cell_of(o)
                                         for o in swept.new_obstacles)
                    continue
                break
            completed[key] = (gap, corridor, planned, swept)
        return fan, list(completed.values())

    def _make_node(self, source, theta_min, theta_max, is_root,
                   parent_id, child_index, g_source, path_polyline) -> TreeNode:
        fan, built = self._construct(source, theta_min, theta_max, is_root)
        branch_path = (() if parent_id is None
                       else self.nodes[parent_id].branch_path + (child_index,))
        node = TreeNode(len(self.nodes), parent_id, child_index, source,
                        theta_min, theta_max, fan, [], g_source, path_polyline,
                        branch_path)
        for idx, (gap, corridor, edge, sweeper) in enumerate(built):
            critical = corridor.effective
            leaf = LeafEntry(node.id, idx, critical,
                             g_source + edge.length,
                             geo.dist(critical, self.goal))
            if not self.grid.is_free_point(critical):
                leaf.dead = True
                self.stats.dead_leaves += 1
                log.warning("critical point %s in collision, leaf dead",
                            critical)
            node.children.append(ChildStructure(
                gap, corridor, edge, sweeper,
                child_orientation_range(corridor, sweeper), leaf))
        self.nodes.append(node)
        return node

    # -- tree paths ------------------------------------------------------------

    def _child_path(self, node: TreeNode, child: ChildStructure):
        """Tree path polyline of the child's critical point."""
        return _join(node.path_polyline, child.edge.polyline)

    def tree_path(self, x, context):
        """Path from the start to x following the tree, per the four cases
        of the tree-path definition. context is ("source", node_id),
        ("edge", node_id, child_index), ("sweeper", node_id, child_index)
        or ("subregion", node_id). Returns (polyline, length)."""
        kind = context[0]
        node = self.nodes[context[1]]
        tol = 0.51 * self.grid.cell_size
        if kind == "source":
            if geo.dist(x, node.source) > tol:
                raise ValueError(f"{x} is not the source of node {node.id}")
            return list(node.path_polyline), node.g_source
        if kind == "edge":
            child = node.children[context[2]]
            acc = 0.0
            pts = child.edge.polyline
            for i, (a, b) in enumerate(zip(pts, pts[1:])):
                seg = geo.dist(a, b)
                if _point_segment_distance(x, a, b) <= tol:
                    t = _project_fraction(x, a, b)
                    truncated = list(pts[:i + 1]) + [x]
                    return (_join(node.path_polyline, truncated),
                            node.g_source + acc + t * seg)
                acc += seg
            raise ValueError(f"{x} does not lie on edge {context[1:]}")
        if kind == "sweeper":
            child = node.children[context[2]]
            sw = child.sweeper
            d = _point_segment_distance(x, sw.start, sw.end)
            if d > tol:
                raise ValueError(f"{x} does not lie on sweeper {context[1:]}")
            along = geo.dist(sw.start, x)
            base = _join(node.path_polyline, child.edge.polyline)
            return _join(base, [sw.start, x]), child.leaf.g + along
        if kind == "subregion":
            verdict, payload = self.subregion_check(node.id, x)
            if verdict != "path":
                raise ValueError(f"{x} not reachable in sub-region of node {node.id}")
            cells, length = payload
            seg = [self.grid.center_of(c) for c in cells]
            return _join(node.path_polyline, seg), node.g_source + length
        raise ValueError(f"unknown tree path context {kind!r}")

    # -- sub-region check ------------------------------------------------------

    def _incoming_structure(self, node: TreeNode):
        if node.parent_id is None:
            return None
        return self.nodes[node.parent_id].children[node.child_index_in_parent]

    def _q_walls(self, node: TreeNode) -> WallSet:
        """Boundary of the node's sub-region Q: its own gap sweepers plus
        the mouth it was entered through (the incoming parent-gap
        sweeper). The incoming wall carries an inbound valve near the
        critical point: the source cell centre may snap to the parent side
        of the segment, and entering there is exactly how paths enter Q,
        while leaving back out would silently change homotopy class."""
        walls = WallSet(self.grid.cell_size)
        for child in node.children:
            sw = child.sweeper
            walls.add(sw.start, sw.end)
        incoming = self._incoming_structure(node)
        if incoming is not None:
            sw = incoming.sweeper
            walls.add(sw.start, sw.end, valve=incoming.corridor.b_hat,
                      window=1.75 * self.grid.cell_size)
        return walls

    def subregion_check(self, node_id: int, p_goal):
        """Membership of the goal in the node's sub-region Q, decided by
        searching from the node source over free cells without crossing
        Q's boundary sweepers. Returns ("not-in-Q", None),
        ("path", (cells, length_m)) or ("proven-no-path", None).
        """
        grid = self.grid
        node = self.nodes[node_id]
        goal_cell = grid.cell_of(p_goal)
        if not grid.in_bounds(goal_cell) or not grid.free[goal_cell]:
            return "not-in-Q", None
        src = grid.cell_of(node.source)
        found = wall_astar(grid.free, src, goal_cell, self._q_walls(node))
        if found is None:
            return "not-in-Q", None
        cells, length = found
        return "path", (cells, length * grid.cell_size)

    # -- pruning hooks ---------------------------------------------------------

    def _branch_data(self, branch):
        """(g(c), critical point) for a branch id."""
        node_id, child_idx = branch
        child = self.nodes[node_id].children[child_idx]
        return child.leaf.g, child.corridor.effective

    def _count(self, relations, witnesses=None):
        for i, rel in enumerate(relations):
            if self._related(rel.better, rel.worse):
                continue
            self.stats.pruned[rel.criterion] += 1
            witness = witnesses[i] if witnesses else None
            self.store.add(rel.better, rel.worse, rel.criterion, witness)

    def _word_of(self, points) -> tuple:
        """Reduced crossing word of a polyline, via its traversed cells."""
        cells = []
        for a, b in zip(points, points[1:]):
            for cell in geo.traversed_cells(a, b, self.grid.cell_size):
                if not cells or cells[-1] != cell:
                    cells.append(cell)
        return signature_of_path(cells, self.anchors)

    def _sweeper_witness(self, rel, hit):
        """Witness route for a sweeper-sweeper comparison: tree path of the
        better critical point, across the crossing, back along the worse
        sweeper to its start (the normalisation point)."""
        better_child = self.nodes[rel.better[0]].children[rel.better[1]]
        worse_child = self.nodes[rel.worse[0]].children[rel.worse[1]]
        route = _join(self._child_path(self.nodes[rel.better[0]], better_child),
                      [hit.q, worse_child.sweeper.start])
        return self._word_of(route)

    def _theta_test_factory(self, branch_a, branch_b, q):
        def run():
            paths = []
            probes = []
            for branch in (branch_a, branch_b):
                node = self.nodes[branch[0]]
                child = node.children[branch[1]]
                path = _join(self._child_path(node, child),
                             [child.sweeper.start, q])
                paths.append(path)
                cs = self.grid.cell_size
                probes.append(opening_probe(node.source, child.sweeper.e_near,
                                            child.sweeper.end,
                                            (1.0 * cs, 2.0 * cs)))
            g_a, c_a = self._branch_data(branch_a)
            g_b, c_b = self._branch_data(branch_b)
            return theta_region_test(self.grid, paths[0], paths[1],
                                     c_a, c_b, self.goal, probes)
        return run

    def _branch_path(self, branch):
        if branch == ROOT_BRANCH:
            return ()
        return self.nodes[branch[0]].branch_path + (branch[1],)

    def _related(self, branch_a, branch_b) -> bool:
        """True when one branch lies on the other's tree path. The
        comparison lemmas construct an alternative route through the
        'better' structure; for ancestor/descendant pairs that route
        re-enters the worse branch, so such pairs are not comparable."""
        pa, pb = self._branch_path(branch_a), self._branch_path(branch_b)
        n = min(len(pa), len(pb))
        return pa[:n] == pb[:n]

    def _apply_geometric_criteria(self, node: TreeNode):
        new_structs = []
        for idx, child in enumerate(node.children):
            sw = child.sweeper
            new_structs.append((StructRef(node.id, idx, "sweeper"),
                                [sw.start, sw.end]))
            new_structs.append((StructRef(node.id, idx, "edge"),
                                list(child.edge.polyline)))
        for hit in collect_intersections(new_structs, self.index):
            a, b = hit.a, hit.b
            if hit.kind != "sweeper-edge" and self._related(a.branch, b.branch):
                continue
            if hit.kind == "sweeper-sweeper":
                g_a, c_a = self._branch_data(a.branch)
                g_b, c_b = self._branch_data(b.branch)
                rels = crit_sweeper_sweeper(a.branch, g_a, c_a,
                                            b.branch, g_b, c_b, hit.q)
                if not rels:
                    rels = crit_goal_dependent(
                        a.branch, g_a, c_a, b.branch, g_b, c_b, hit.q,
                        self._theta_test_factory(a.branch, b.branch, hit.q))
                self._count(rels, [self._sweeper_witness(r, hit) for r in rels])
            elif hit.kind == "edge-edge":
                g_pa = self.nodes[a.node_id].g_source
                g_pb = self.nodes[b.node_id].g_source
                rels = crit_edge_edge(a.branch, g_pa, hit.arc_a,
                                      b.branch, g_pb, hit.arc_b)
                witnesses = []
                for rel in rels:
                    bref, barc = (a, hit.arc_a) if rel.better == a.branch \
                        else (b, hit.arc_b)
                    wref, warc = (b, hit.arc_b) if rel.better == a.branch \
                        else (a, hit.arc_a)
                    bnode = self.nodes[bref.node_id]
                    bedge = bnode.children[bref.child_index].edge.polyline
                    wedge = self.nodes[wref.node_id].children[wref.child_index] \
                        .edge.polyline
                    route = _join(bnode.path_polyline,
                                  _arc_prefix(bedge, barc) + [hit.q]
                                  + _arc_suffix(wedge, warc))
                    witnesses.append(self._word_of(route))
                self._count(rels, witnesses)
            else:
                edge_ref, edge_arc = (a, hit.arc_a) if a.tag == "edge" else (b, hit.arc_b)
                sw_ref = b if a.tag == "edge" else a
                edge_node = self.nodes[edge_ref.node_id]
                edge_poly = edge_node.children[edge_ref.child_index].edge.polyline
                g_sw, c_sw = self._branch_data(sw_ref.branch)
                sw_child = self.nodes[sw_ref.node_id].children[sw_ref.child_index]
                rels = crit_sweeper_edge(
                    edge_ref.branch, edge_node.g_source, edge_arc,
                    edge_node.branch, sw_ref.branch, g_sw, c_sw, hit.q)
                witnesses = []
                for rel in rels:
                    if rel.criterion == "L-sweeper-edge":
                        # sweeper branch undercuts the edge's branch: go to
                        # the sweeper's critical point, across to q, then
                        # finish the edge
                        sw_node = self.nodes[sw_ref.node_id]
                        route = _join(self._child_path(sw_node, sw_child),
                                      [hit.q] + _arc_suffix(edge_poly, edge_arc))
                    else:
                        # edge's node undercuts the sweeper branch: follow
                        # the edge to q, then along the sweeper to its start
                        route = _join(edge_node.path_polyline,
                                      _arc_prefix(edge_poly, edge_arc)
                                      + [hit.q, sw_child.sweeper.start])
                    witnesses.append(self._word_of(route))
                self._count(rels, witnesses)

    # -- queue plumbing ----------------------------------------------------------

    def _should_prune(self, leaf: LeafEntry):
        return should_prune(leaf.branch, leaf.f, self.store, self.k,
                            self._result_lengths())

    def _push_leaf(self, leaf: LeafEntry):
        if leaf.dead:
            return
        self.leaves.append(leaf)
        if self.options.prune:
            prune, reason = self._should_prune(leaf)
            if prune:
                self._mark_pruned(leaf, reason)
                return
        self._seq += 1
        heapq.heappush(self._heap, (leaf.f, leaf.g, leaf.node_id,
                                    self._seq, leaf))
        self._fifo.append(leaf)

    def _mark_pruned(self, leaf: LeafEntry, reason: str):
        if not leaf.pruned:
            leaf.pruned = True
            leaf.prune_reason = reason
            self.stats.pruned_leaves += 1

    def _result_lengths(self):
        return [r.length for r in self.results]

    def _min_open_f(self) -> float:
        while self._heap and not self._heap[0][4].alive:
            heapq.heappop(self._heap)
        return self._heap[0][0] if self._heap else math.inf

    def _pop_leaf(self):
        if self.options.expansion_order == "fifo":
            while self._fifo:
                leaf = self._fifo.popleft()
                if leaf.alive:
                    return leaf
            return None
        while self._heap:
            leaf = heapq.heappop(self._heap)[4]
            if leaf.alive:
                return leaf
        return None

    # -- result flow -------------------------------------------------------------

    def _tube_candidate(self, node: TreeNode):
        """Shortest start-to-goal path through this branch's gap sequence:
        an unconstrained search that may cross the branch's own incoming
        mouths but no other sweeper. It recovers the class optimum without
        the half-cell bends the edge concatenation picks up at each
        critical point."""
        chain = set()
        walk = node
        while walk.parent_id is not None:
            chain.add((walk.parent_id, walk.child_index_in_parent))
            walk = self.nodes[walk.parent_id]
        walls = WallSet(self.grid.cell_size)
        for other in self.nodes:
            for idx, child in enumerate(other.children):
                sw = child.sweeper
                if (other.id, idx) in chain:
                    # branch mouths admit inbound crossings anywhere
                    walls.add(sw.start, sw.end, valve=child.corridor.b_hat)
                else:
                    walls.add(sw.start, sw.end)
        start = self.grid.cell_of(self.start)
        goal = self.grid.cell_of(self.goal)
        found = wall_astar(self.grid.free, start, goal, walls)
        if found is None:
            return None
        cells, length = found
        return cells, length * self.grid.cell_size

    def _push_one_candidate(self, node_id: int, cells, length: float):
        cells = _dedupe_cells(cells)
        sig = signature_of_path(cells, self.anchors)
        if sig in self._emitted:
            return
        tightened = self._tighten(cells, sig)
        if tightened is not cells:
            new_len = self.grid.cell_size * sum(
                octile(b[0] - a[0], b[1] - a[1])
                for a, b in zip(tightened, tightened[1:]))
            if new_len < length:
                cells, length = tightened, new_len
        self._seq += 1
        heapq.heappush(self._candidates, (length, self._seq, node_id, cells, sig))
        self.stats.candidates += 1

    def _push_candidate(self, node: TreeNode):
        verdict, payload = self.subregion_check(node.id, self.goal)
        if verdict == "proven-no-path":
            self._proven_no_path = True
            return
        if verdict != "path":
            return
        cells, seg_len = payload
        prefix = [self.grid.cell_of(p) for p in node.path_polyline]
        self._push_one_candidate(node.id, prefix + cells,
                                 node.g_source + seg_len)
        tube = self._tube_candidate(node)
        if tube is not None:
            cells, length = tube
            self._push_one_candidate(node.id, cells, length)

    def _tube_improve(self, cells, want_word):
        """One re-optimisation of a cell path inside its 1-cell dilation;
        accepted only when strictly shorter with the same crossing word."""
        grid = self.grid
        tube = np.zeros((grid.height, grid.width), dtype=bool)
        for r, c in cells:
            tube[max(0, r - 1):r + 2, max(0, c - 1):c + 2] = True
        tube &= grid.free
        found = octile_astar(tube, cells[0], cells[-1])
        if found is None:
            return None
        better, new_len = found
        if signature_of_path(better, self.anchors) != want_word:
            return None
        old_len = sum(octile(b[0] - a[0], b[1] - a[1])
                      for a, b in zip(cells, cells[1:]))
        if new_len >= old_len - 1e-9:
            return None
        return better

    def _tighten(self, cells, sig):
        """Shorten a result path inside its own tube, homotopy preserved.

        Edge concatenation bends the polyline at every critical-point cell;
        re-optimising within the dilated corridor of the path removes those
        bends, and a candidate is only accepted if its crossing word is
        unchanged. A whole-path pass handles simple paths; wrap-around
        paths overlap their own tube (the short-circuit would change the
        word and be rejected), so they are tightened in overlapping local
        windows instead.
        """
        for _ in range(3):
            better = self._tube_improve(cells, sig)
            if better is None:
                break
            cells = better
        window = 24
        for _ in range(4):
            improved = False
            i = 0
            while i + 2 < len(cells):
                j = min(len(cells) - 1, i + window)
                sub = cells[i:j + 1]
                sub_word = signature_of_path(sub, self.anchors)
                better = self._tube_improve(sub, sub_word)
                if better is not None:
                    cells = cells[:i] + better + cells[j + 1:]
                    improved = True
                i += window // 2
            if not improved:
                break
        return cells

    def _emit(self, length, node_id, cells, sig):
        node = self.nodes[node_id]
        if sig in self._emitted:
            return False
        polyline = [self.grid.center_of(c) for c in cells]
        self._emitted.add(sig)
        branch_ids = []
        walk = node
        while walk is not None:
            branch_ids.append(walk.id)
            walk = self.nodes[walk.parent_id] if walk.parent_id is not None else None
        branch_ids.reverse()
        self.results.append(ResultPath(polyline, length, branch_ids, sig))
        if self.options.prune:
            open_leaves = [lf for lf in self.leaves if lf.alive]
            rels = crit_result_bound(open_leaves, length, node.branch)
            self._count(rels)
        return True

    # -- main loop ----------------------------------------------------------------

    def _expand_leaf(self, leaf: LeafEntry):
        parent = self.nodes[leaf.node_id]
        child = parent.children[leaf.child_index]
        lo, hi = child.theta_range
        node = self._make_node(child.corridor.effective, lo, hi, False,
                               parent.id, leaf.child_index, leaf.g,
                               self._child_path(parent, child))
        leaf.expanded = True
        return node

    def _after_expand(self, node: TreeNode):
        self.stats.expansions += 1
        if self.options.prune:
            edge_words = [self._word_of(c.edge.polyline) for c in node.children]
            self.store.on_expand(node.id, node.branch,
                                 [c.leaf.branch for c in node.children],
                                 edge_words)
            self._apply_geometric_criteria(node)
        for child in node.children:
            self._push_leaf(child.leaf)
        self._push_candidate(node)

    def solve(self):
        t0 = time.perf_counter()
        try:
            root = self._make_node(self.start, 0.0, geo.TWO_PI, True,
                                   None, None, 0.0, [self.start])
        except ExpansionError as exc:
            raise CollisionError(f"root expansion failed: {exc}") from exc
        self._after_expand(root)
        while len(self.results) < self.k and not self._proven_no_path:
            gate = self._min_open_f()
            if self._candidates and self._candidates[0][0] <= gate + 1e-9:
                length, _, node_id, cells, sig = heapq.heappop(self._candidates)
                self._emit(length, node_id, cells, sig)
                continue
            if not math.isfinite(gate):
                break
            if self.stats.expansions >= self.options.max_expansions:
                self.stats.incomplete = True
                log.warning("expansion cap %d reached, results incomplete",
                            self.options.max_expansions)
                break
            leaf = self._pop_leaf()
            if leaf is None:
                break
            if self.options.prune:
                prune, reason = self._should_prune(leaf)
                if prune:
                    self._mark_pruned(leaf, reason)
                    continue
            try:
                node = self._expand_leaf(leaf)
            except ExpansionError as exc:
                leaf.dead = True
                leaf.expanded = True
                self.stats.dead_leaves += 1
                log.warning("expansion of %s failed: %s", leaf.branch, exc)
                continue
            self._after_expand(node)
        self.stats.no_path = not self.results and not self.stats.incomplete
        self.stats.classes_exhausted = (bool(self.results)
                                        and len(self.results) < self.k
                                        and not self.stats.incomplete)
        self.stats.wall_ms = (time.perf_counter() - t0) * 1000.0
        return self.results, self.stats


def k_snpp(grid: GridMap, p_start, p_goal, k: int,
           options: PlannerOptions | None = None):
    """Plan up to k shortest pairwise non-homotopic paths.

    Returns (results, stats); results come in nondecreasing length order and
    fewer than k are returned only when every homotopy class reachable by
    the tree has been exhausted (or the expansion cap was hit, flagged in
    stats.incomplete).
    """
    return Planner(grid, p_start, p_goal, k, options).solve()


# -- small helpers -------------------------------------------------------------

def _arc_prefix(points, arc: float):
    """Polyline truncated at the given arc length (endpoint included)."""
    out = [points[0]]
    acc = 0.0
    for a, b in zip(points, points[1:]):
        step = geo.dist(a, b)
        if acc + step >= arc - 1e-9:
            t = 0.0 if step == 0 else max(0.0, min(1.0, (arc - acc) / step))
            out.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
            return out
        out.append(b)
        acc += step
    return out


def _arc_suffix(points, arc: float):
    """Polyline from the given arc length to the end."""
    acc = 0.0
    for i, (a, b) in enumerate(zip(points, points[1:])):
        step = geo.dist(a, b)
        if acc + step >= arc - 1e-9:
            t = 0.0 if step == 0 else max(0.0, min(1.0, (arc - acc) / step))
            head = (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
            return [head] + list(points[i + 1:])
        acc += step
    return [points[-1]]


def _dedupe_cells(cells):
    out = []
    for c in cells:
        if not out or out[-1] != c:
            out.append(c)
    return out


def _join(prefix, extension):
    """Concatenate polylines, dropping a duplicated junction point."""
    if extension is None:
        return list(prefix)
    out = list(prefix)
    for p in extension:
        if not out or geo.dist(out[-1], p) > 1e-12:
            out.append(p)
    return out


def _point_segment_distance(x, a, b):
    t = _project_fraction(x, a, b)
    px = a[0] + t * (b[0] - a[0])
    py = a[1] + t * (b[1] - a[1])
    return math.hypot(x[0] - px, x[1] - py)


def _project_fraction(x, a, b):
    dx, dy = b[0] - a[0], b[1] - a[1]
    denom = dx * dx + dy * dy
    if denom < 1e-18:
        return 0.0
    t = ((x[0] - a[0]) * dx + (x[1] - a[1]) * dy) / denom
    return min(1.0, max(0.0, t))
