"""k shortest non-homotopic path planning on 2D occupancy grids.

The tree planner grows a hierarchical topological tree whose branches
explore distinct path topologies and prunes branches proven relatively
non-optimal; the oracle solves the same problem by Dijkstra over the
homotopy-augmented grid and is used to validate every answer.
"""

from .gridmap import (CollisionError, DegenerateMapError, GridMap,
                      MapFormatError, load_map, load_map_file, map_to_ascii)
from .mapgen import generate_map, default_endpoints
from .oracle import (ObstacleAnchor, OracleResult, find_anchors,
                     oracle_class_length, oracle_k_snpp, parse_signature,
                     reduce_word, signature_extend, signature_of_path,
                     signature_str)
from .topo_tree import (Planner, PlannerOptions, PlanStats, ResultPath,
                        k_snpp)

__all__ = [
    "CollisionError", "DegenerateMapError", "GridMap", "MapFormatError",
    "ObstacleAnchor", "OracleResult", "Planner", "PlannerOptions",
    "PlanStats", "ResultPath", "default_endpoints", "find_anchors",
    "generate_map", "k_snpp", "load_map", "load_map_file", "map_to_ascii",
    "oracle_class_length", "oracle_k_snpp", "parse_signature", "reduce_word",
    "signature_extend", "signature_of_path", "signature_str",
]

__version__ = "0.1.0"
