"""SVG rendering of a planning run: map raster, gap sweepers, tree edges
and result paths as separate layers (drawn in that order so results sit on
top, matching the usual figure conventions: sweepers cyan, edges red,
results blue)."""

from .gridmap import GridMap


def _runs(mask_row):
    """(start, length) runs of True values in a boolean row."""
    runs = []
    start = None
    for i, v in enumerate(mask_row):
        if v and start is None:
            start = i
        elif not v and start is not None:
            runs.append((start, i - start))
            start = None
    if start is not None:
        runs.append((start, len(mask_row) - start))
    return runs


def _poly(points, stroke, width, opacity=1.0):
    pts = " ".join(f"{x:.3f},{y:.3f}" for x, y in points)
    return (f'<polyline fill="none" stroke="{stroke}" stroke-width="{width}" '
            f'stroke-opacity="{opacity}" points="{pts}"/>')


def render_svg(grid: GridMap, planner=None, results=None) -> str:
    s = grid.cell_size
    w, h = grid.width * s, grid.height * s
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" '
           f'width="{grid.width * 4}" height="{grid.height * 4}">',
           f'<rect width="{w}" height="{h}" fill="white"/>']

    out.append('<g id="map">')
    for r in range(grid.height):
        for c0, n in _runs(grid.inflated[r]):
            out.append(f'<rect x="{c0 * s:.3f}" y="{r * s:.3f}" '
                       f'width="{n * s:.3f}" height="{s:.3f}" fill="#c8c8c8"/>')
        for c0, n in _runs(grid.occupancy[r]):
            out.append(f'<rect x="{c0 * s:.3f}" y="{r * s:.3f}" '
                       f'width="{n * s:.3f}" height="{s:.3f}" fill="#303030"/>')
    out.append('</g>')

    lw = 0.25 * s
    if planner is not None:
        out.append('<g id="sweepers">')
        for node in planner.nodes:
            for child in node.children:
                sw = child.sweeper
                out.append(_poly([sw.start, sw.end], "#00c0c0", lw))
        out.append('</g>')
        out.append('<g id="edges">')
        for node in planner.nodes:
            for child in node.children:
                out.append(_poly(child.edge.polyline, "#d03030", lw))
        out.append('</g>')

    out.append('<g id="results">')
    for res in results or ():
        out.append(_poly(res.polyline, "#2040d0", 1.6 * lw, opacity=0.85))
    out.append('</g>')

    out.append('</svg>')
    return "\n".join(out)
