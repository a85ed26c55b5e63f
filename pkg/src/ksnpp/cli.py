"""Command-line front end: plan, oracle, compare, bench, gen.

Exit codes: 0 success (including a proven no-path verdict), 1 flag/IO/parse
errors, 2 start or goal in collision, 3 run incomplete (expansion cap), 4
compare mismatch.
"""

import argparse
import hashlib
import json
import logging
import os
import sys

from .bench import rows_to_csv, rows_to_table, run_bench
from .gridmap import (CollisionError, DegenerateMapError, GridMap,
                      MapFormatError, load_map_file, map_to_ascii)
from .mapgen import GenerationError, generate_map
from .oracle import oracle_k_snpp, signature_str
from .svg import render_svg
from .topo_tree import Planner, PlannerOptions

log = logging.getLogger("ksnpp")


def _configure_logging():
    level = {"error": logging.ERROR, "info": logging.INFO,
             "debug": logging.DEBUG}.get(os.environ.get("KSNPP_LOG", "error"))
    logging.basicConfig(level=level or logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")


def _parse_cell(text):
    try:
        r, c = text.split(",")
        return int(r), int(c)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected 'row,col', got {text!r}") from None


def _map_descriptor(path, grid: GridMap):
    return {
        "path": str(path),
        "width": grid.width,
        "height": grid.height,
        "cell_size_m": grid.cell_size,
        "robot_radius_m": grid.robot_radius,
        "sha1": hashlib.sha1(grid.occupancy.tobytes()).hexdigest(),
    }


def _result_entry(length, signature, cells):
    return {
        "length_m": round(length, 9),
        "signature": signature_str(signature),
        "path": [[int(r), int(c)] for r, c in cells],
    }


def _write_json(record, out_path):
    text = json.dumps(record, sort_keys=True, indent=2) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(args):
    grid = load_map_file(args.map, robot_radius=args.radius,
                         cell_size=args.cell_size)
    return grid


def cmd_plan(args) -> int:
    grid = _load(args)
    start = grid.center_of(args.start)
    goal = grid.center_of(args.goal)
    options = PlannerOptions(epsilon=args.epsilon,
                             max_expansions=args.max_expansions,
                             prune=not args.no_prune,
                             expansion_order=args.expansion_order)
    try:
        planner = Planner(grid, start, goal, args.k, options)
    except CollisionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    results, stats = planner.solve()
    record = {
        "planner": "tree-no-prune" if args.no_prune else "tree",
        "map": _map_descriptor(args.map, grid),
        "start": list(args.start),
        "goal": list(args.goal),
        "k": args.k,
        "results": [
            _result_entry(r.length, r.signature,
                          _dedupe([grid.cell_of(p) for p in r.polyline]))
            for r in results
        ],
        "stats": {
            "expansions": stats.expansions,
            "pruned": stats.pruned,
            "pruned_leaves": stats.pruned_leaves,
            "wall_ms": round(stats.wall_ms, 3),
        },
        "no_path": stats.no_path,
        "classes_exhausted": stats.classes_exhausted,
    }
    _write_json(record, args.out)
    if args.svg:
        with open(args.svg, "w") as fh:
            fh.write(render_svg(grid, planner, results))
    return 3 if stats.incomplete else 0


def cmd_oracle(args) -> int:
    grid = _load(args)
    start = grid.center_of(args.start)
    goal = grid.center_of(args.goal)
    try:
        results = oracle_k_snpp(grid, start, goal, args.k, l_max=args.lmax)
    except CollisionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    record = {
        "planner": "oracle",
        "map": _map_descriptor(args.map, grid),
        "start": list(args.start),
        "goal": list(args.goal),
        "k": args.k,
        "results": [_result_entry(r.length, r.signature, r.cells)
                    for r in results],
        "stats": {"expansions": 0, "pruned": {}, "pruned_leaves": 0,
                  "wall_ms": 0.0},
        "no_path": not results,
        "classes_exhausted": 0 < len(results) < args.k,
    }
    _write_json(record, args.out)
    return 0


def compare_records(a, b, tolerance):
    """(match, report_lines). Records must describe the same query."""
    for key in ("start", "goal", "k"):
        if a[key] != b[key]:
            raise ValueError(f"records disagree on {key}")
    for key in ("width", "height", "cell_size_m", "robot_radius_m", "sha1"):
        if a["map"][key] != b["map"][key]:
            raise ValueError(f"records disagree on map {key}")
    sig_a = {}
    for res in a["results"]:
        sig_a.setdefault(res["signature"], []).append(res["length_m"])
    sig_b = {}
    for res in b["results"]:
        sig_b.setdefault(res["signature"], []).append(res["length_m"])
    lines = [f"{'signature':<16}{'a_len':>12}{'b_len':>12}{'diff':>10}  verdict"]
    match = True
    for sig in sorted(set(sig_a) | set(sig_b)):
        la, lb = sig_a.get(sig), sig_b.get(sig)
        if la is None or lb is None or len(la) != len(lb):
            match = False
            lines.append(f"{sig or '(trivial)':<16}{_fmt(la):>12}{_fmt(lb):>12}"
                         f"{'-':>10}  class missing")
            continue
        for va, vb in zip(sorted(la), sorted(lb)):
            diff = abs(va - vb)
            ok = diff <= tolerance
            match &= ok
            lines.append(f"{sig or '(trivial)':<16}{va:>12.4f}{vb:>12.4f}"
                         f"{diff:>10.4f}  {'ok' if ok else 'LENGTH MISMATCH'}")
    return match, lines


def _fmt(values):
    return "-" if values is None else f"{values[0]:.3f}"


def cmd_compare(args) -> int:
    with open(args.record_a) as fh:
        a = json.load(fh)
    with open(args.record_b) as fh:
        b = json.load(fh)
    tolerance = args.tolerance
    if tolerance is None:
        tolerance = 1.5 * a["map"]["cell_size_m"]
    try:
        match, lines = compare_records(a, b, tolerance)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print("\n".join(lines))
    print("MATCH" if match else "MISMATCH")
    return 0 if match else 4


def cmd_gen(args) -> int:
    grid = generate_map(args.width, args.height, args.obstacles, args.seed,
                        cell_size=args.cell_size, robot_radius=args.radius)
    text = map_to_ascii(grid.occupancy, grid.cell_size)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_bench(args) -> int:
    if args.trials < 1:
        print("error: trials must be >= 1", file=sys.stderr)
        return 1
    k_list = [int(t) for t in args.k.split(",") if t]
    if not k_list or any(k < 1 for k in k_list):
        print("error: invalid k list", file=sys.stderr)
        return 1
    maps = {}
    if args.maps:
        names = sorted(f for f in os.listdir(args.maps)
                       if f.endswith((".map", ".txt")))
        if not names:
            print(f"error: no .map/.txt files in {args.maps}", file=sys.stderr)
            return 1
        for name in names:
            with open(os.path.join(args.maps, name)) as fh:
                maps[name] = (fh.read(), args.radius)
    else:
        for i in range(args.gen):
            grid = generate_map(args.width, args.height, args.obstacles,
                                args.seed + i, cell_size=args.cell_size,
                                robot_radius=args.radius)
            maps[f"gen-{args.seed + i}"] = (
                map_to_ascii(grid.occupancy, grid.cell_size), args.radius)
    rows = run_bench(maps, k_list, args.trials, workers=args.workers)
    print(rows_to_table(rows))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(rows_to_csv(rows))
    return 0


def _dedupe(cells):
    out = []
    for c in cells:
        if not out or out[-1] != c:
            out.append(c)
    return out


def _add_query_flags(p):
    p.add_argument("--map", required=True, help="map file (.pgm or ascii)")
    p.add_argument("--start", required=True, type=_parse_cell, metavar="R,C")
    p.add_argument("--goal", required=True, type=_parse_cell, metavar="R,C")
    p.add_argument("-k", type=int, required=True, help="number of classes")
    p.add_argument("--radius", type=float, default=1.0,
                   help="robot radius in metres (default 1.0)")
    p.add_argument("--cell-size", type=float, default=None,
                   help="cell size for PGM maps (ascii maps carry their own)")
    p.add_argument("--out", default=None, help="JSON output path (default stdout)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ksnpp",
        description="k shortest non-homotopic path planning on occupancy grids")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="run the topological tree planner")
    _add_query_flags(p)
    p.add_argument("--svg", default=None, help="also render the run as SVG")
    p.add_argument("--epsilon", type=float, default=None,
                   help="ray insertion tolerance (default 0.1 * cell)")
    p.add_argument("--max-expansions", type=int, default=100000)
    p.add_argument("--no-prune", action="store_true",
                   help="disable the relative-optimality pruning")
    p.add_argument("--expansion-order", choices=("f", "fifo"), default="f")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("oracle", help="run the homotopy-augmented search oracle")
    _add_query_flags(p)
    p.add_argument("--lmax", type=int, default=None,
                   help="signature word length cap (default 2k+2)")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("compare", help="compare two run records")
    p.add_argument("record_a")
    p.add_argument("record_b")
    p.add_argument("--tolerance", type=float, default=None,
                   help="per-class length tolerance in metres "
                        "(default 1.5 * cell size)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gen", help="generate a cluttered test map")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--obstacles", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--cell-size", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="benchmark tree planner vs oracle")
    p.add_argument("--maps", default=None, help="directory of ascii maps")
    p.add_argument("--gen", type=int, default=0, help="generate N maps instead")
    p.add_argument("--width", type=int, default=300)
    p.add_argument("--height", type=int, default=300)
    p.add_argument("--obstacles", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cell-size", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=2.0)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--k", default="1,2,3,4", help="comma-separated k values")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    if getattr(args, "k", 1) is not None and getattr(args, "k", 1) < 1:
        print("error: k must be >= 1", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (MapFormatError, DegenerateMapError, GenerationError,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
