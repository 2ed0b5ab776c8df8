"""
SVG figures of the workspace, partition and trajectories.

Boxes are projected onto the xy plane. Leaves are drawn in blue, reach
boxes in red, unsafe trajectories in red and safe ones in green. Elements
are emitted in leaf-id / input order, so equal inputs give equal files.
"""

from typing import Iterable, List, Optional, Sequence

from shapely.geometry import Polygon

from ..domain.models import PartitionTree, ReachBox, RolloutResult, Workspace

SCALE = 100.0   # pixels per meter
MARGIN = 10.0

LEAF_STYLE = 'fill="none" stroke="#1f4fd6" stroke-width="0.6"'
REACH_STYLE = 'fill="#d62728" fill-opacity="0.25" stroke="#d62728" stroke-width="0.4"'
OBSTACLE_STYLE = 'fill="#555555" stroke="black" stroke-width="1"'


def _fmt(v: float) -> str:
    return f"{v:.3f}"


class SvgCanvas:
    """Maps workspace coordinates to an SVG document with y pointing up."""

    def __init__(self, workspace: Workspace):
        self.workspace = workspace
        self.xmin, self.ymin, self.xmax, self.ymax = workspace.bounds
        self.width = (self.xmax - self.xmin) * SCALE + 2 * MARGIN
        self.height = (self.ymax - self.ymin) * SCALE + 2 * MARGIN
        self.elements: List[str] = []

    def _pt(self, x: float, y: float) -> str:
        px = (x - self.xmin) * SCALE + MARGIN
        py = (self.ymax - y) * SCALE + MARGIN
        return f"{_fmt(px)},{_fmt(py)}"

    def polygon(self, poly: Polygon, style: str) -> None:
        points = " ".join(self._pt(x, y) for x, y in list(poly.exterior.coords)[:-1])
        self.elements.append(f'<polygon points="{points}" {style}/>')

    def rect(self, x0: float, y0: float, x1: float, y1: float, style: str) -> None:
        corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
        points = " ".join(self._pt(x, y) for x, y in corners)
        self.elements.append(f'<polygon points="{points}" {style}/>')

    def polyline(self, xy: Iterable[Sequence[float]], color: str) -> None:
        points = " ".join(self._pt(p[0], p[1]) for p in xy)
        self.elements.append(f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.2"/>')

    def render(self) -> str:
        header = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(self.width)}" '
            f'height="{_fmt(self.height)}" viewBox="0 0 {_fmt(self.width)} {_fmt(self.height)}">'
        )
        return "\n".join([header, *self.elements, "</svg>"]) + "\n"


def render_svg(workspace: Workspace, tree: Optional[PartitionTree] = None,
               reach_boxes: Sequence[ReachBox] = (), rollouts: Sequence[RolloutResult] = ()) -> str:
    """Build the SVG document as a string."""
    canvas = SvgCanvas(workspace)
    canvas.polygon(workspace.outer, 'fill="white" stroke="black" stroke-width="1.5"')
    for hole in workspace.holes:
        canvas.polygon(hole, OBSTACLE_STYLE)
    if tree is not None:
        for cell in tree.iter_leaves():
            lo, hi = cell.box.lo, cell.box.hi
            canvas.rect(lo[0], lo[1], hi[0], hi[1], LEAF_STYLE)
    for rb in sorted(reach_boxes, key=lambda r: r.source):
        lo, hi = rb.box.lo, rb.box.hi
        canvas.rect(lo[0], lo[1], hi[0], hi[1], REACH_STYLE)
    for result in rollouts:
        color = "#d62728" if result.collision_step is not None else "#2ca02c"
        canvas.polyline(result.states, color)
    return canvas.render()
