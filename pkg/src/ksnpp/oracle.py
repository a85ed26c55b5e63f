"""Independent k-shortest non-homotopic path solver.

Dijkstra over the homotopy-augmented grid: each state is (cell, word) where
the word is the freely reduced sequence of signed crossings of per-obstacle
cut rays. Non-homotopic paths reach the goal cell with distinct words, so
popping the goal with k distinct words yields the k shortest classes.

This solver is deliberately plain: it is the slow exhaustive baseline the
tree planner is validated against and benchmarked on.
"""

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .gridmap import CollisionError, GridMap
from .search import DIRS8, SQRT2

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class ObstacleAnchor:
    """One internal C-space obstacle component, represented by its
    lexicographically smallest cell. The cut ray is the vertical half-line
    of cells directly above the anchor (row < anchor row, same column)."""
    id: int
    cell: tuple[int, int]


@dataclass
class OracleResult:
    length: float
    signature: tuple[int, ...]
    cells: list[tuple[int, int]]


def find_anchors(grid: GridMap) -> list[ObstacleAnchor]:
    """One anchor per inflated component not connected to the border."""
    labels, count = ndimage.label(grid.inflated, structure=_EIGHT)
    border = np.zeros_like(grid.inflated)
    border[0, :] = border[-1, :] = True
    border[:, 0] = border[:, -1] = True
    border_ids = set(np.unique(labels[border & grid.inflated]).tolist())
    anchors = []
    for comp in range(1, count + 1):
        if comp in border_ids:
            continue
        rows, cols = np.nonzero(labels == comp)
        order = np.lexsort((cols, rows))
        anchors.append((int(rows[order[0]]), int(cols[order[0]])))
    anchors.sort()
    return [ObstacleAnchor(i + 1, cell) for i, cell in enumerate(anchors)]


def reduce_word(word) -> tuple[int, ...]:
    """Freely reduce a crossing word (cancel adjacent letter/inverse pairs)."""
    out = []
    for letter in word:
        if out and out[-1] == -letter:
            out.pop()
        else:
            out.append(letter)
    return tuple(out)


def _anchors_by_col(anchors):
    by_col = {}
    for a in anchors:
        by_col.setdefault(a.cell[1], []).append((a.cell[0], a.id))
    for entries in by_col.values():
        entries.sort()
    return by_col


def _step_letters(a, b, by_col):
    """Signed letters for the step a -> b between cell centres.

    A crossing of an anchor's cut ray counts when the step's column interval
    half-openly contains the anchor column (entering the column from the
    left is a positive crossing) and both endpoints lie strictly above the
    anchor row.
    """
    (r0, c0), (r1, c1) = a, b
    if c1 > c0:
        hits = by_col.get(c1)
        sign = 1
    elif c1 < c0:
        hits = by_col.get(c0)
        sign = -1
    else:
        return ()
    if not hits:
        return ()
    letters = [sign * aid for arow, aid in hits if r0 < arow and r1 < arow]
    if sign < 0:
        letters.reverse()
    return tuple(letters)


def signature_extend(sig, a, b, anchors) -> tuple[int, ...]:
    """Extend a reduced word by one 8-connected step from cell a to cell b."""
    by_col = anchors if isinstance(anchors, dict) else _anchors_by_col(anchors)
    letters = _step_letters(a, b, by_col)
    return reduce_word(sig + letters) if letters else sig


def signature_of_path(cells, anchors) -> tuple[int, ...]:
    """Reduced crossing word of an 8-connected cell path."""
    by_col = _anchors_by_col(anchors)
    sig = ()
    for a, b in zip(cells, cells[1:]):
        letters = _step_letters(a, b, by_col)
        if letters:
            sig = reduce_word(sig + letters)
    return sig


def signature_str(sig) -> str:
    """Render a word: letters joined by '.', inverses with a trailing '~'."""
    return ".".join(str(x) if x > 0 else f"{-x}~" for x in sig)


def parse_signature(text: str) -> tuple[int, ...]:
    if not text:
        return ()
    out = []
    for tok in text.split("."):
        if tok.endswith("~"):
            out.append(-int(tok[:-1]))
        else:
            out.append(int(tok))
    return tuple(out)


def _check_endpoints(grid, p_start, p_goal):
    start, goal = grid.cell_of(p_start), grid.cell_of(p_goal)
    if not grid.is_free(start):
        raise CollisionError(f"start {p_start} is in collision")
    if not grid.is_free(goal):
        raise CollisionError(f"goal {p_goal} is in collision")
    return start, goal


def oracle_k_snpp(grid: GridMap, p_start, p_goal, k: int,
                  l_max: int | None = None) -> list[OracleResult]:
    """First k distinct homotopy classes reaching the goal, shortest first.

    The augmented graph is bounded by the word-length cap l_max
    (default 2k + 2); classes needing longer words are unreachable, which is
    acceptable for validation at small k. Fewer than k results means the
    bounded graph was exhausted.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    start, goal = _check_endpoints(grid, p_start, p_goal)
    if l_max is None:
        l_max = 2 * k + 2
    anchors = find_anchors(grid)
    by_col = _anchors_by_col(anchors)
    h, w = grid.height, grid.width
    free = grid.free
    free_flat = free.ravel()
    cs = grid.cell_size

    s_idx, g_idx = start[0] * w + start[1], goal[0] * w + goal[1]
    # Per-word distance sheets keep the state table compact.
    sheets = {(): np.full(h * w, np.inf, dtype=np.float64)}
    sheets[()][s_idx] = 0.0
    heap = [(0.0, s_idx, ())]
    results = []
    found = set()
    while heap and len(results) < k:
        d, idx, sig = heapq.heappop(heap)
        if d > sheets[sig][idx] + 1e-12:
            continue
        if idx == g_idx and sig not in found:
            found.add(sig)
            results.append(OracleResult(d * cs, sig,
                                        _backtrack(sheets, by_col, w, h, idx, sig)))
            if len(results) >= k:
                break
        r, c = divmod(idx, w)
        for dr, dc, step in DIRS8:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w):
                continue
            nidx = nr * w + nc
            if not free_flat[nidx]:
                continue
            if dr and dc and not (free_flat[r * w + nc] and free_flat[nr * w + c]):
                continue
            nsig = sig
            letters = _step_letters((r, c), (nr, nc), by_col)
            if letters:
                nsig = reduce_word(sig + letters)
                if len(nsig) > l_max:
                    continue
            sheet = sheets.get(nsig)
            if sheet is None:
                sheet = np.full(h * w, np.inf, dtype=np.float64)
                sheets[nsig] = sheet
            nd = d + step
            if nd < sheet[nidx] - 1e-12:
                sheet[nidx] = nd
                heapq.heappush(heap, (nd, nidx, nsig))
    return results


def _backtrack(sheets, by_col, w, h, idx, sig):
    """Recover a shortest path by descending the distance sheets."""
    cells = [(idx // w, idx % w)]
    d = sheets[sig][idx]
    while d > 1e-12:
        r, c = cells[-1]
        moved = False
        for dr, dc, step in DIRS8:
            pr, pc = r + dr, c + dc
            if not (0 <= pr < h and 0 <= pc < w):
                continue
            # The predecessor's word extends to ours across this step.
            letters = _step_letters((pr, pc), (r, c), by_col)
            if letters:
                candidates = _inverse_words(sig, letters)
            else:
                candidates = (sig,)
            pidx = pr * w + pc
            for psig in candidates:
                sheet = sheets.get(psig)
                if sheet is None:
                    continue
                pd = sheet[pidx]
                if math.isfinite(pd) and abs(pd + step - d) < 1e-9:
                    if reduce_word(psig + letters) != sig:
                        continue
                    cells.append((pr, pc))
                    d, sig = pd, psig
                    moved = True
                    break
            if moved:
                break
        if not moved:  # pragma: no cover - would indicate a sheet bug
            raise RuntimeError("oracle backtrack lost the distance gradient")
    cells.reverse()
    return cells


def _inverse_words(sig, letters):
    """Candidate predecessor words whose extension by letters reduces to sig."""
    # Undo the letters one by one; each undo either strips a trailing letter
    # or re-appends a cancelled inverse, so both options are candidates.
    words = {sig}
    for letter in reversed(letters):
        nxt = set()
        for word in words:
            if word and word[-1] == letter:
                nxt.add(word[:-1])
            nxt.add(word + (-letter,))
        words = nxt
    return tuple(words)


def oracle_class_length(grid: GridMap, p_start, p_goal, signature,
                        slack: int = 4):
    """Shortest path length within one homotopy class, or None.

    Runs the augmented Dijkstra until the goal is settled with exactly the
    requested word; words longer than len(signature) + slack are not
    explored.
    """
    start, goal = _check_endpoints(grid, p_start, p_goal)
    signature = tuple(signature)
    l_max = len(signature) + slack
    anchors = find_anchors(grid)
    by_col = _anchors_by_col(anchors)
    h, w = grid.height, grid.width
    free_flat = grid.free.ravel()
    s_idx, g_idx = start[0] * w + start[1], goal[0] * w + goal[1]
    sheets = {(): np.full(h * w, np.inf, dtype=np.float64)}
    sheets[()][s_idx] = 0.0
    heap = [(0.0, s_idx, ())]
    while heap:
        d, idx, sig = heapq.heappop(heap)
        if d > sheets[sig][idx] + 1e-12:
            continue
        if idx == g_idx and sig == signature:
            return d * grid.cell_size
        r, c = divmod(idx, w)
        for dr, dc, step in DIRS8:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w):
                continue
            nidx = nr * w + nc
            if not free_flat[nidx]:
                continue
            if dr and dc and not (free_flat[r * w + nc] and free_flat[nr * w + c]):
                continue
            nsig = sig
            letters = _step_letters((r, c), (nr, nc), by_col)
            if letters:
                nsig = reduce_word(sig + letters)
                if len(nsig) > l_max:
                    continue
            sheet = sheets.get(nsig)
            if sheet is None:
                sheet = np.full(h * w, np.inf, dtype=np.float64)
                sheets[nsig] = sheet
            nd = d + step
            if nd < sheet[nidx] - 1e-12:
                sheet[nidx] = nd
                heapq.heappush(heap, (nd, nidx, nsig))
    return None
