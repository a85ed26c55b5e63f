"""Relative-optimality machinery: intersections between tree structures,
the comparison criteria that order distinguished homotopies, inheritance of
those facts along the tree, and the leaf termination rule.

A branch is identified by (node_id, child_index) of the critical point that
roots it; ROOT_BRANCH stands for the start point's own class.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import geometry as geo
from .oracle import reduce_word

ROOT_BRANCH = (-1, 0)

CRITERIA = (
    "result-bound",
    "L-sweeper-sweeper",
    "P-goal-dependent",
    "L-sweeper-edge",
    "C-edge-sweeper",
    "L-edge-edge",
    "inherited",
)

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class StructRef:
    node_id: int
    child_index: int
    tag: str                       # "edge" | "sweeper"

    @property
    def branch(self):
        return (self.node_id, self.child_index)


@dataclass
class Intersection:
    kind: str                      # "sweeper-sweeper" | "sweeper-edge" | "edge-edge"
    a: StructRef
    b: StructRef
    q: tuple[float, float]
    arc_a: float                   # arc length of q along structure a
    arc_b: float


@dataclass(frozen=True)
class Relation:
    better: tuple[int, int]
    worse: tuple[int, int]
    criterion: str


class SegmentIndex:
    """Uniform-grid hash over structure polylines for crossing queries."""

    def __init__(self, bucket: float):
        self.bucket = bucket
        self._grid: dict[tuple[int, int], list] = {}
        self._structs: dict[StructRef, list] = {}

    def _buckets(self, p1, p2):
        b = self.bucket
        x0, x1 = sorted((p1[0], p2[0]))
        y0, y1 = sorted((p1[1], p2[1]))
        for bx in range(int(x0 // b), int(x1 // b) + 1):
            for by in range(int(y0 // b), int(y1 // b) + 1):
                yield (bx, by)

    def insert(self, ref: StructRef, polyline):
        self._structs[ref] = list(polyline)
        arc = 0.0
        for a, b in zip(polyline, polyline[1:]):
            entry = (ref, a, b, arc)
            for key in self._buckets(a, b):
                self._grid.setdefault(key, []).append(entry)
            arc += geo.dist(a, b)

    def crossings(self, ref: StructRef, polyline):
        """All proper crossings between the query polyline and stored
        structures, as (other_ref, q, arc_query, arc_other)."""
        out = []
        arc = 0.0
        for a, b in zip(polyline, polyline[1:]):
            seen = set()
            for key in self._buckets(a, b):
                for entry in self._grid.get(key, ()):  # noqa: B905
                    oref, oa, ob, oarc = entry
                    eid = (oref, oarc)
                    if eid in seen or oref == ref:
                        continue
                    seen.add(eid)
                    hit = geo.seg_intersection(a, b, oa, ob)
                    if hit is None:
                        continue
                    q, t, u = hit
                    out.append((oref, q,
                                arc + t * geo.dist(a, b),
                                oarc + u * geo.dist(oa, ob)))
            arc += geo.dist(a, b)
        return out


def collect_intersections(new_structs, index: SegmentIndex):
    """Crossings between each new structure and everything stored so far.

    new_structs is an ordered list of (StructRef, polyline); each structure
    is queried before being inserted, so sibling structures of one node are
    also compared against each other exactly once.
    """
    found = []
    for ref, polyline in new_structs:
        for oref, q, arc_new, arc_old in index.crossings(ref, polyline):
            tags = {ref.tag, oref.tag}
            if tags == {"sweeper"}:
                kind = "sweeper-sweeper"
            elif tags == {"edge"}:
                kind = "edge-edge"
            else:
                kind = "sweeper-edge"
            found.append(Intersection(kind, ref, oref, q, arc_new, arc_old))
        index.insert(ref, polyline)
    return found


class RelationStore:
    """Partial order over distinguished homotopies.

    Each relation carries the crossing word of its witness route (the
    provably shorter alternative path, normalised to end at the worse
    branch's critical point). Two relations certify two distinct strictly
    better homotopy classes only when their witness words differ: appending
    the worse branch's unknown continuation to both preserves distinctness
    by free-group cancellation, whereas counting raw branches over-prunes
    when several better branches funnel through the same class.
    """

    def __init__(self):
        self.relations: list[Relation] = []
        self._better: dict[tuple[int, int], set] = {}
        self._witness: dict[tuple[int, int], set] = {}
        self._expanded: dict[tuple[int, int], int] = {}   # branch -> node id
        self._children: dict[int, list] = {}              # node id -> child branches
        self._edge_words: dict[tuple[int, int], tuple] = {}

    def better_set(self, branch) -> set:
        return self._better.setdefault(branch, set())

    def witness_words(self, branch) -> set:
        return self._witness.setdefault(branch, set())

    def distinct_better_classes(self, branch) -> int:
        return len(self.witness_words(branch))

    def _propagate(self, better, worse, witness, criterion):
        """Inheritance of relative non-optimality: the fact flows to every
        existing descendant of the worse branch, the witness word composed
        with each connecting edge's crossing word."""
        stack = [(worse, witness)]
        while stack:
            branch, word = stack.pop()
            node_id = self._expanded.get(branch)
            if node_id is None:
                continue
            for child in self._children.get(node_id, ()):  # noqa: B905
                child_word = None
                if word is not None:
                    child_word = reduce_word(word + self._edge_words.get(child, ()))
                new_branch = better not in self.better_set(child)
                new_word = (child_word is not None
                            and child_word not in self.witness_words(child))
                if new_branch or new_word:
                    self.relations.append(Relation(better, child, "inherited"))
                    self.better_set(child).add(better)
                    if child_word is not None:
                        self.witness_words(child).add(child_word)
                    stack.append((child, child_word))

    def add(self, better, worse, criterion: str, witness=None) -> bool:
        """Record better < worse with its witness word; the fact and the
        word propagate to every existing descendant of the worse branch.
        Returns whether anything new was learned."""
        if better == worse:
            return False
        fresh = better not in self.better_set(worse)
        if witness is not None:
            fresh = fresh or witness not in self.witness_words(worse)
        if fresh:
            self.relations.append(Relation(better, worse, criterion))
            self.better_set(worse).add(better)
            if witness is not None:
                self.witness_words(worse).add(witness)
        self._propagate(better, worse, witness, criterion)
        return fresh

    def on_expand(self, node_id: int, parent_branch, child_branches,
                  edge_words=None):
        """Register a branch expansion and copy its facts onto the new
        children (witness words composed with each child's edge word)."""
        self._expanded[parent_branch] = node_id
        self._children[node_id] = list(child_branches)
        if edge_words:
            for child, word in zip(child_branches, edge_words):
                self._edge_words[child] = tuple(word)
        inherited = list(self.better_set(parent_branch))
        words = list(self.witness_words(parent_branch))
        count = 0
        for child in child_branches:
            target = self.better_set(child)
            for better in inherited:
                if better not in target:
                    self.relations.append(Relation(better, child, "inherited"))
                    target.add(better)
                    count += 1
            edge_word = self._edge_words.get(child, ())
            wtarget = self.witness_words(child)
            for word in words:
                wtarget.add(reduce_word(word + edge_word))
        return count

    def is_acyclic(self) -> bool:
        """The relation set must stay a DAG; a cycle indicates a criterion bug."""
        adj: dict = {}
        for rel in self.relations:
            adj.setdefault(rel.better, set()).add(rel.worse)
        state: dict = {}

        def visit(v):
            state[v] = 1
            for nxt in adj.get(v, ()):  # noqa: B905
                st = state.get(nxt, 0)
                if st == 1 or (st == 0 and not visit(nxt)):
                    return False
            state[v] = 2
            return True

        return all(state.get(v, 0) == 2 or visit(v) for v in list(adj))


# -- the comparison criteria -------------------------------------------------

def crit_sweeper_sweeper(branch_k, g_ck, c_k, branch_l, g_cl, c_l, q):
    """Sweeper vs sweeper crossing at q: the branch whose critical point is
    reachable more cheaply through the other's sweeper loses. Checked in
    both directions; at most one strict inequality can hold."""
    if g_ck > g_cl + geo.dist(c_l, q) + geo.dist(q, c_k):
        return [Relation(branch_l, branch_k, "L-sweeper-sweeper")]
    if g_cl > g_ck + geo.dist(c_k, q) + geo.dist(q, c_l):
        return [Relation(branch_k, branch_l, "L-sweeper-sweeper")]
    return []


def crit_goal_dependent(branch_k, g_ck, c_k, branch_l, g_cl, c_l, q,
                        theta_test) -> list[Relation]:
    """Weaker sweeper-sweeper comparison available when the goal lies
    outside the region enclosed by the two tree paths through q and both
    leaves expand into it. theta_test() decides those geometric conditions
    and errs toward False."""
    if g_ck + geo.dist(c_k, q) > g_cl + geo.dist(c_l, q):
        better, worse = branch_l, branch_k
    elif g_cl + geo.dist(c_l, q) > g_ck + geo.dist(c_k, q):
        better, worse = branch_k, branch_l
    else:
        return []
    if not theta_test():
        return []
    return [Relation(better, worse, "P-goal-dependent")]


def crit_sweeper_edge(edge_branch, g_pi, arc_q, edge_parent_branch,
                      sweeper_branch, g_cl, c_l, q) -> list[Relation]:
    """Edge of branch edge_branch crossing the sweeper of branch
    sweeper_branch at q; arc_q is the length of the edge truncated at q.

    Either the sweeper's class undercuts the edge's branch, or the edge's
    node class undercuts the sweeper's branch; at most one fires.
    """
    if g_pi + arc_q > g_cl + geo.dist(c_l, q):
        return [Relation(sweeper_branch, edge_branch, "L-sweeper-edge")]
    if g_cl > g_pi + arc_q + geo.dist(q, c_l):
        return [Relation(edge_parent_branch, sweeper_branch, "C-edge-sweeper")]
    return []


def crit_edge_edge(branch_k, g_pi, arc_i, branch_l, g_pj, arc_j) -> list[Relation]:
    """Edge vs edge crossing: the strictly more expensive route to q is
    relatively non-optimal toward its own sweeper."""
    cost_i = g_pi + arc_i
    cost_j = g_pj + arc_j
    if cost_i > cost_j:
        return [Relation(branch_l, branch_k, "L-edge-edge")]
    if cost_j > cost_i:
        return [Relation(branch_k, branch_l, "L-edge-edge")]
    return []


def crit_result_bound(open_leaves, result_length: float, emit_branch) -> list[Relation]:
    """A freshly emitted result of length L dominates every open leaf whose
    admissible bound g + h already exceeds L."""
    out = []
    for leaf in open_leaves:
        if leaf.f > result_length:
            out.append(Relation(emit_branch, leaf.branch, "result-bound"))
    return out


def should_prune(branch, f_value: float, store: RelationStore, k: int,
                 result_lengths) -> tuple[bool, str]:
    """Terminate a leaf once k distinct strictly better homotopy classes
    are certified.

    Two certificate families exist: witness words of recorded relations,
    and emitted results whose length is below the leaf's admissible bound
    (each result is a distinct class and everything through the leaf is
    longer). The families may overlap in class space, so the sound count
    is their maximum, not their sum. When a store was fed facts without
    witness words the distinct better branches are counted instead.
    """
    words = store.distinct_better_classes(branch)
    geometric = words if words else len(store.better_set(branch))
    by_results = sum(1 for length in result_lengths if length < f_value)
    if geometric >= k:
        return True, "better-set"
    if by_results >= k:
        return True, "result-bound"
    return False, ""


# -- goal-dependent region test ----------------------------------------------

def theta_region_test(grid, path_k, path_l, c_k, c_l, goal, probes) -> bool:
    """Decide the goal-location conditions of the goal-dependent criterion.

    The region is rasterised by flooding from the midpoint of the segment
    c_k--c_l inside the walls drawn by the two tree paths through q. The
    criterion is skipped (False) whenever the region fails to close, the
    goal falls inside it, or either leaf's opening does not face into it.
    """
    s = grid.cell_size
    walls = np.zeros((grid.height, grid.width), dtype=bool)
    for path in (path_k, path_l):
        for r, c in geo.rasterize_polyline(path, s):
            if 0 <= r < grid.height and 0 <= c < grid.width:
                walls[r, c] = True
    mid = ((c_k[0] + c_l[0]) / 2.0, (c_k[1] + c_l[1]) / 2.0)
    seed = None
    for jx, jy in ((0, 0), (s, 0), (-s, 0), (0, s), (0, -s)):
        cand = grid.cell_of((mid[0] + jx, mid[1] + jy))
        if grid.in_bounds(cand) and not walls[cand]:
            seed = cand
            break
    if seed is None:
        return False
    interior = ~walls
    labels, _ = ndimage.label(interior, structure=_EIGHT)
    region = labels == labels[seed]
    # open region: the flood escaped to the border ring
    if region[0, :].any() or region[-1, :].any() or region[:, 0].any() or region[:, -1].any():
        return False
    goal_cell = grid.cell_of(goal)
    if grid.in_bounds(goal_cell) and region[goal_cell]:
        return False
    for probe_pts in probes:
        if not any(grid.in_bounds(grid.cell_of(p)) and region[grid.cell_of(p)]
                   for p in probe_pts):
            return False
    return True


def opening_probe(source, e_near, o, offsets):
    """Points just beyond a leaf's gap opening (the e_near--o segment), on
    the side away from the node source: where that leaf will expand."""
    mx, my = (e_near[0] + o[0]) / 2.0, (e_near[1] + o[1]) / 2.0
    dx, dy = o[0] - e_near[0], o[1] - e_near[1]
    norm = math.hypot(dx, dy)
    if norm < 1e-12:
        return [(mx, my)]
    nx, ny = -dy / norm, dx / norm
    if nx * (mx - source[0]) + ny * (my - source[1]) < 0.0:
        nx, ny = -nx, -ny
    return [(mx + off * nx, my + off * ny) for off in offsets]
