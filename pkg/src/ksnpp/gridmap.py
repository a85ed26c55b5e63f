"""Occupancy grid with C-space inflation and exact grid raycasting.

Conventions: occupancy[row, col] with row 0 the first file line. World
coordinates put x along columns and y along rows, so a cell's centre is
((col + 0.5) * cell_size, (row + 0.5) * cell_size). Angle 0 points along
+x, pi/2 along +y (increasing row).
"""

import math

import numpy as np
from scipy import ndimage


class MapFormatError(ValueError):
    """Malformed map data. Carries the offending 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateMapError(ValueError):
    """Robot radius too large for the map to contain any free space."""


class CollisionError(ValueError):
    """An operation required a collision-free point and did not get one."""


def _disk_structure(radius: float, cell_size: float) -> np.ndarray:
    r_cells = int(math.floor(radius / cell_size + 1e-9))
    dy, dx = np.ogrid[-r_cells:r_cells + 1, -r_cells:r_cells + 1]
    return (dx * dx + dy * dy) * cell_size * cell_size <= radius * radius + 1e-9


class GridMap:
    """Immutable occupancy grid plus its inflated (C-space) lattice.

    The outer border ring is always forced occupied so every raycast
    terminates. Inflation marks every cell whose centre lies within
    Euclidean distance robot_radius of an occupied cell centre.
    """

    def __init__(self, occupancy: np.ndarray, cell_size: float, robot_radius: float):
        occ = np.array(occupancy, dtype=bool)
        if occ.ndim != 2:
            raise MapFormatError("occupancy must be a 2D lattice")
        if cell_size <= 0:
            raise ValueError("cell_size must be positive")
        if robot_radius < 0:
            raise ValueError("robot_radius must be >= 0")
        h, w = occ.shape
        if robot_radius > 0.5 * min(w, h) * cell_size:
            raise DegenerateMapError(
                f"robot radius {robot_radius} exceeds half the map extent")
        occ[0, :] = occ[-1, :] = True
        occ[:, 0] = occ[:, -1] = True
        self.height, self.width = h, w
        self.cell_size = float(cell_size)
        self.robot_radius = float(robot_radius)
        self.occupancy = occ
        if robot_radius >= cell_size:
            self.inflated = ndimage.binary_dilation(
                occ, structure=_disk_structure(robot_radius, cell_size))
        else:
            self.inflated = occ.copy()
        self.occupancy.setflags(write=False)
        self.inflated.setflags(write=False)
        self.free = ~self.inflated
        self.free.setflags(write=False)
        self._inflated_flat = self.inflated.ravel()
        self._occupancy_flat = self.occupancy.ravel()

    # -- coordinate helpers ------------------------------------------------

    def cell_of(self, point) -> tuple[int, int]:
        return (int(math.floor(point[1] / self.cell_size)),
                int(math.floor(point[0] / self.cell_size)))

    def center_of(self, cell) -> tuple[float, float]:
        return ((cell[1] + 0.5) * self.cell_size, (cell[0] + 0.5) * self.cell_size)

    def in_bounds(self, cell) -> bool:
        return 0 <= cell[0] < self.height and 0 <= cell[1] < self.width

    def is_free(self, cell) -> bool:
        """True iff the cell is inside the map and not a C-space obstacle.

        Out-of-bounds reads as occupied: the world is sealed.
        """
        if not self.in_bounds(cell):
            return False
        return not self.inflated[cell[0], cell[1]]

    def is_free_point(self, point) -> bool:
        return self.is_free(self.cell_of(point))

    # -- raycasting --------------------------------------------------------

    def raycast(self, origin, theta: float, lattice: str = "inflated"):
        """Cast a ray until it enters a blocked cell of the chosen lattice.

        With the default lattice the hit is the centre of the first inflated
        cell the ray enters; lattice="occupancy" stops at physical obstacles
        instead (the tree planner's ray fans see physical walls while all
        collision checks read the inflated lattice). phi is the Euclidean
        distance from the origin to the hit centre. Deterministic for
        identical inputs.
        """
        if not self.is_free_point(origin):
            raise CollisionError(f"raycast origin {origin} is not collision-free")
        blocked = self._inflated_flat if lattice == "inflated" else self._occupancy_flat
        s = self.cell_size
        x0, y0 = origin[0] / s, origin[1] / s
        dx, dy = math.cos(theta), math.sin(theta)
        # Exact traversal: every cell the half-line enters, ordered by the
        # parameter t, found from the gridline-crossing values of t.
        t_end = self.width + self.height + 2.0
        parts = [np.array([0.0, t_end])]
        if dx > 1e-15:
            ks = np.arange(math.floor(x0) + 1, self.width + 1, dtype=float)
            parts.append((ks - x0) / dx)
        elif dx < -1e-15:
            ks = np.arange(math.floor(x0), -1, -1, dtype=float)
            parts.append((ks - x0) / dx)
        if dy > 1e-15:
            ks = np.arange(math.floor(y0) + 1, self.height + 1, dtype=float)
            parts.append((ks - y0) / dy)
        elif dy < -1e-15:
            ks = np.arange(math.floor(y0), -1, -1, dtype=float)
            parts.append((ks - y0) / dy)
        ts = np.concatenate(parts)
        ts = ts[(ts >= 0.0) & (ts <= t_end)]
        ts.sort()
        dt = np.diff(ts)
        keep = dt > 1e-12
        mids = (ts[:-1] + 0.5 * dt)[keep]
        cx = np.floor(x0 + mids * dx).astype(np.intp)
        cy = np.floor(y0 + mids * dy).astype(np.intp)
        inside = (cx >= 0) & (cx < self.width) & (cy >= 0) & (cy < self.height)
        cx, cy = cx[inside], cy[inside]
        hits = blocked[cy * self.width + cx]
        idx = int(np.argmax(hits))
        if not hits[idx]:
            raise RuntimeError("ray escaped a sealed map")  # pragma: no cover
        hit = self.center_of((int(cy[idx]), int(cx[idx])))
        return hit, math.hypot(hit[0] - origin[0], hit[1] - origin[1])

    def physical_source(self, point):
        """Occupied cell whose inflation covers the given point's cell:
        the nearest physical obstacle (deterministic tie-break)."""
        r0, c0 = self.cell_of(point)
        reach = int(math.ceil(self.robot_radius / self.cell_size)) + 1
        best = None
        for r in range(max(0, r0 - reach), min(self.height, r0 + reach + 1)):
            for c in range(max(0, c0 - reach), min(self.width, c0 + reach + 1)):
                if self.occupancy[r, c]:
                    d = (r - r0) ** 2 + (c - c0) ** 2
                    key = (d, r, c)
                    if best is None or key < best:
                        best = key
        if best is None:
            return None
        return (best[1], best[2])


# -- loading ---------------------------------------------------------------

def _parse_ascii(text: str, robot_radius: float) -> GridMap:
    lines = text.splitlines()
    if not lines:
        raise MapFormatError("empty map", line=1)
    header = lines[0].split()
    if len(header) != 3:
        raise MapFormatError("header must be '<width> <height> <cell_size_m>'", line=1)
    try:
        width, height, cell_size = int(header[0]), int(header[1]), float(header[2])
    except ValueError:
        raise MapFormatError("header fields must be int int float", line=1) from None
    if len(lines) < 1 + height:
        raise MapFormatError(f"expected {height} map rows, found {len(lines) - 1}",
                             line=len(lines))
    occ = np.zeros((height, width), dtype=bool)
    for r in range(height):
        row = lines[1 + r]
        if len(row) != width:
            raise MapFormatError(f"row has {len(row)} characters, expected {width}",
                                 line=2 + r)
        for c, ch in enumerate(row):
            if ch == '#':
                occ[r, c] = True
            elif ch != '.':
                raise MapFormatError(f"unexpected character {ch!r}", line=2 + r)
    return GridMap(occ, cell_size, robot_radius)


def _parse_pgm(data: bytes, cell_size: float, robot_radius: float) -> GridMap:
    if cell_size is None:
        raise MapFormatError("cell_size is required for PGM maps", line=1)
    # Tokenise the header, honouring '#' comments.
    pos = 0
    tokens = []
    line = 1
    while len(tokens) < 4:
        if pos >= len(data):
            raise MapFormatError("truncated PGM header", line=line)
        ch = data[pos:pos + 1]
        if ch == b'#':
            while pos < len(data) and data[pos:pos + 1] != b'\n':
                pos += 1
            continue
        if ch.isspace():
            if ch == b'\n':
                line += 1
            pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b'P5':
        raise MapFormatError("not a binary PGM (P5) stream", line=1)
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError:
        raise MapFormatError("PGM dimensions must be integers", line=line) from None
    if maxval != 255:
        raise MapFormatError(f"unsupported maxval {maxval}, expected 255", line=line)
    pos += 1  # single whitespace after maxval
    raster = data[pos:pos + width * height]
    if len(raster) != width * height:
        raise MapFormatError("PGM raster shorter than width*height", line=line)
    values = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return GridMap(values < 127, cell_size, robot_radius)


def load_map(source, fmt: str = "ascii", cell_size: float | None = None,
             robot_radius: float = 0.0) -> GridMap:
    """Load a map from bytes or text.

    ASCII maps carry their own cell size in the header, which is
    authoritative; the cell_size argument applies to PGM input.
    """
    if fmt == "ascii":
        text = source.decode() if isinstance(source, (bytes, bytearray)) else source
        return _parse_ascii(text, robot_radius)
    if fmt == "pgm":
        if not isinstance(source, (bytes, bytearray)):
            raise MapFormatError("PGM input must be bytes", line=1)
        return _parse_pgm(bytes(source), cell_size, robot_radius)
    raise ValueError(f"unknown map format {fmt!r}")


def load_map_file(path: str, robot_radius: float = 0.0,
                  cell_size: float | None = None) -> GridMap:
    fmt = "pgm" if str(path).lower().endswith(".pgm") else "ascii"
    with open(path, "rb") as fh:
        return load_map(fh.read(), fmt, cell_size=cell_size, robot_radius=robot_radius)


def map_to_ascii(occupancy: np.ndarray, cell_size: float) -> str:
    h, w = occupancy.shape
    rows = ["".join('#' if occupancy[r, c] else '.' for c in range(w)) for r in range(h)]
    size = f"{cell_size:g}"
    return f"{w} {h} {size}\n" + "\n".join(rows) + "\n"
