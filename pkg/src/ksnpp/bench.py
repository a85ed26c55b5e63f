"""Benchmark harness comparing the tree planner against the oracle.

Independent (map, k, planner, trial) jobs run across a process pool; each
trial owns its planner instance and only the aggregation is serialized.
"""

import multiprocessing as mp
import os
import time
from dataclasses import dataclass

from .gridmap import GridMap, load_map
from .mapgen import default_endpoints
from .oracle import find_anchors, oracle_k_snpp
from .topo_tree import PlannerOptions, k_snpp

_WORK: dict = {}


@dataclass
class BenchRow:
    map_name: str
    goal: tuple[int, int]
    k: int
    tree_ms: float
    oracle_ms: float
    ratio_pct: float
    flagged: bool = False          # trivial map: nothing for the tree to prune


def _init_worker(payload):
    # fork start method shares the parsed maps copy-on-write; payload maps
    # name -> (ascii text, robot_radius)
    global _WORK
    _WORK = {}
    for name, (text, radius) in payload.items():
        grid = load_map(text, "ascii", robot_radius=radius)
        _WORK[name] = (grid, default_endpoints(grid))


def _run_job(job):
    name, k, planner = job
    grid, (start, goal) = _WORK[name]
    p_start, p_goal = grid.center_of(start), grid.center_of(goal)
    t0 = time.perf_counter()
    if planner == "tree":
        k_snpp(grid, p_start, p_goal, k, PlannerOptions())
    else:
        oracle_k_snpp(grid, p_start, p_goal, k)
    return name, k, planner, (time.perf_counter() - t0) * 1000.0


def run_bench(maps: dict, k_list, trials: int, workers: int | None = None):
    """maps: name -> (ascii text, robot_radius). Returns BenchRow list in
    (map, k) order."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    names = sorted(maps)
    jobs = [(name, k, planner)
            for name in names for k in k_list
            for planner in ("tree", "oracle")
            for _ in range(trials)]
    workers = workers or min(len(jobs), os.cpu_count() or 1)
    if workers > 1:
        ctx = mp.get_context("fork")
        with ctx.Pool(workers, initializer=_init_worker, initargs=(maps,)) as pool:
            outcomes = pool.map(_run_job, jobs)
    else:
        _init_worker(maps)
        outcomes = [_run_job(j) for j in jobs]

    acc: dict = {}
    for name, k, planner, ms in outcomes:
        acc.setdefault((name, k), {}).setdefault(planner, []).append(ms)

    _init_worker(maps)  # endpoints + anchor counts for the report
    rows = []
    for name in names:
        grid, (_start, goal) = _WORK[name]
        trivial = not find_anchors(grid)
        for k in k_list:
            times = acc[(name, k)]
            tree_ms = sum(times["tree"]) / len(times["tree"])
            oracle_ms = sum(times["oracle"]) / len(times["oracle"])
            ratio = 100.0 * tree_ms / oracle_ms if oracle_ms > 0 else float("inf")
            rows.append(BenchRow(name, goal, k, tree_ms, oracle_ms, ratio,
                                 flagged=trivial))
    return rows


def rows_to_csv(rows) -> str:
    lines = ["map,goal,k,tree_ms,oracle_ms,ratio_pct"]
    for r in rows:
        goal = f"{r.goal[0]};{r.goal[1]}"
        lines.append(f"{r.map_name},{goal},{r.k},{r.tree_ms:.2f},"
                     f"{r.oracle_ms:.2f},{r.ratio_pct:.2f}")
    return "\n".join(lines) + "\n"


def rows_to_table(rows) -> str:
    header = f"{'map':<24}{'k':>3}{'tree_ms':>12}{'oracle_ms':>12}{'ratio_%':>9}"
    lines = [header, "-" * len(header)]
    for r in rows:
        mark = " *" if r.flagged else ""
        lines.append(f"{r.map_name:<24}{r.k:>3}{r.tree_ms:>12.2f}"
                     f"{r.oracle_ms:>12.2f}{r.ratio_pct:>9.2f}{mark}")
    if any(r.flagged for r in rows):
        lines.append("* simply-connected map: nothing to prune, ratio not meaningful")
    return "\n".join(lines)
