"""
Planar polygon kernel.

Footprint placement, guaranteed over/under-approximations of the footprint
swept over a configuration box, and containment / violation-area queries
against the workspace. Polygon booleans are delegated to shapely.

Over-approximation A_o: for every convex piece of the robot and every
vertex v, the arc {R(θ)v : θ ∈ [θ_l, θ_u]} lies in the triangle spanned by
R(θ_l)v, R(θ_u)v and the tangent intersection R(θ_mid)v / cos(Δθ/2)
(Δθ < π). The hull of those points, Minkowski-summed with the position
rectangle, contains every placed piece.

Under-approximation A_u: each rotated piece at θ_mid is eroded by r·Δθ/2
(no point of the footprint moves further than that under the remaining
rotation), then eroded by the position rectangle by intersecting its four
corner translates.
"""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import shapely
import tripy
from shapely import affinity
from shapely.geometry import MultiPoint, Point, Polygon
from shapely.geometry import box as shapely_box
from shapely.geometry.polygon import orient
from shapely.ops import unary_union

from ..domain.errors import RotationSpanTooLarge, WorkspaceValidationError
from ..domain.intervals import ConfigBox, wrap_theta
from ..domain.models import RobotBody, Workspace

# Vertex snapping / area tolerance (meters, square meters)
GEOM_TOL = 1e-9

EMPTY_POLYGON = Polygon()


# === Construction and validation ===

def build_polygon(coords: Sequence[Sequence[float]], field: str) -> Polygon:
    """Build a simple, counter-clockwise polygon or raise a field-precise error."""
    try:
        points = [(float(p[0]), float(p[1])) for p in coords]
    except (TypeError, ValueError, IndexError) as e:
        raise WorkspaceValidationError(f"vertices must be [x, y] pairs ({e})", field)
    if len(points) < 3:
        raise WorkspaceValidationError(f"needs at least 3 vertices, got {len(points)}", field)
    if not all(math.isfinite(c) for p in points for c in p):
        raise WorkspaceValidationError("vertices must be finite", field)

    poly = Polygon(points)
    if not poly.is_valid or not poly.exterior.is_simple:
        reason = shapely.is_valid_reason(poly)
        raise WorkspaceValidationError(f"polygon is not simple ({reason})", field)
    if poly.area <= GEOM_TOL:
        raise WorkspaceValidationError("polygon has zero area", field)
    if not poly.exterior.is_ccw:
        raise WorkspaceValidationError("vertices must be ordered counter-clockwise", field)
    return poly


def build_workspace(outer: Sequence[Sequence[float]],
                    holes: Sequence[Sequence[Sequence[float]]] = ()) -> Workspace:
    """Validate and assemble a workspace.

    Holes must lie strictly inside the outer boundary and must not touch
    each other.
    """
    outer_poly = build_polygon(outer, "outer")
    hole_polys: List[Polygon] = []
    for i, coords in enumerate(holes):
        field = f"holes[{i}]"
        hole = build_polygon(coords, field)
        if not outer_poly.contains(hole) or hole.distance(outer_poly.exterior) <= GEOM_TOL:
            raise WorkspaceValidationError("hole must lie strictly inside the outer boundary", field)
        for j, other in enumerate(hole_polys):
            if hole.distance(other) <= GEOM_TOL:
                raise WorkspaceValidationError(f"hole touches or overlaps holes[{j}]", field)
        hole_polys.append(hole)
    return Workspace(outer=outer_poly, holes=tuple(hole_polys))


def convex_pieces(poly: Polygon) -> Tuple[Polygon, ...]:
    """Convex decomposition: the polygon itself if convex, else ear-clipped triangles."""
    if poly.convex_hull.area - poly.area <= GEOM_TOL * max(1.0, poly.area):
        return (orient(poly),)
    coords = list(poly.exterior.coords)[:-1]
    triangles = tripy.earclip(coords)
    return tuple(orient(Polygon(tri)) for tri in triangles if Polygon(tri).area > GEOM_TOL ** 2)


def build_robot(coords: Sequence[Sequence[float]]) -> RobotBody:
    """Validate a body-frame footprint and derive r and the origin clearance."""
    footprint = build_polygon(coords, "robot")
    vertices = np.asarray(footprint.exterior.coords)[:-1]
    r = float(np.max(np.linalg.norm(vertices, axis=1)))
    origin = Point(0.0, 0.0)
    core = float(footprint.exterior.distance(origin)) if footprint.contains(origin) else 0.0
    return RobotBody(footprint=footprint, convex_pieces=convex_pieces(footprint), r=r, core_radius=core)


# === Footprints ===

def _rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def footprint_at(robot: RobotBody, p: Sequence[float]) -> Polygon:
    """R(θ)·footprint + (x, y)."""
    x, y, theta = float(p[0]), float(p[1]), float(p[2])
    c, s = math.cos(theta), math.sin(theta)
    return affinity.affine_transform(robot.footprint, [c, -s, s, c, x, y])


def _position_corners(cfg: ConfigBox) -> np.ndarray:
    return np.array([
        [cfg.x.lo, cfg.y.lo],
        [cfg.x.hi, cfg.y.lo],
        [cfg.x.hi, cfg.y.hi],
        [cfg.x.lo, cfg.y.hi],
    ])


def footprint_over_approx(robot: RobotBody, cfg_box: ConfigBox) -> Polygon:
    """Polygon A_o containing footprint_at(robot, p) for every p in cfg_box.

    Raises:
        RotationSpanTooLarge: If the θ width is π or more
    """
    span = cfg_box.theta.width
    if span >= math.pi:
        raise RotationSpanTooLarge(f"θ span {span:.6g} ≥ π; split the heading interval first")

    rot_lo = _rotation(cfg_box.theta.lo)
    rot_hi = _rotation(cfg_box.theta.hi)
    rot_mid = _rotation(cfg_box.theta.mid) / math.cos(0.5 * span)
    corners = _position_corners(cfg_box)

    hulls = []
    for piece in robot.convex_pieces:
        v = np.asarray(piece.exterior.coords)[:-1]
        swept = np.vstack([v @ rot_lo.T, v @ rot_hi.T, v @ rot_mid.T])
        placed = (swept[:, None, :] + corners[None, :, :]).reshape(-1, 2)
        hulls.append(MultiPoint(placed).convex_hull)
    if len(hulls) == 1:
        return hulls[0]
    return unary_union(hulls)


def swept_over_approx(robot: RobotBody, cfg_box: ConfigBox) -> Polygon:
    """A_o for boxes of any θ width: wrap, cut into quarter turns, and union."""
    parts = []
    for fragment in wrap_theta(cfg_box):
        lo, hi = fragment.theta.lo, fragment.theta.hi
        n_chunks = max(1, math.ceil((hi - lo) / (0.5 * math.pi)))
        edges = np.linspace(lo, hi, n_chunks + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            parts.append(footprint_over_approx(robot, fragment.with_theta(float(a), float(b))))
    if len(parts) == 1:
        return parts[0]
    return unary_union(parts)


def footprint_under_approx(robot: RobotBody, cfg_box: ConfigBox) -> Polygon:
    """Polygon A_u contained in footprint_at(robot, p) for every p in cfg_box.

    Returns the empty polygon when the erosion removes everything.
    """
    erosion = robot.r * 0.5 * cfg_box.theta.width
    theta_mid = cfg_box.theta.mid
    c, s = math.cos(theta_mid), math.sin(theta_mid)
    corners = _position_corners(cfg_box)

    kept = []
    for piece in robot.convex_pieces:
        rotated = affinity.affine_transform(piece, [c, -s, s, c, 0.0, 0.0])
        core = rotated.buffer(-erosion, join_style="mitre") if erosion > 0 else rotated
        if core.is_empty:
            continue
        region = affinity.translate(core, *corners[0])
        for dx, dy in corners[1:]:
            region = region.intersection(affinity.translate(core, dx, dy))
            if region.is_empty:
                break
        if not region.is_empty and region.area > 0:
            kept.append(region)
    if not kept:
        return EMPTY_POLYGON
    if len(kept) == 1:
        return kept[0]
    return unary_union(kept)


# === Workspace queries ===

def contains(region: Workspace, poly: Polygon) -> bool:
    """True iff poly ⊆ W; the empty polygon is contained in everything."""
    if poly.is_empty:
        return True
    return bool(region.free.covers(poly))


def violation_area(poly: Polygon, region: Workspace) -> float:
    """Area of poly outside W (m²)."""
    if poly.is_empty or region.free.covers(poly):
        return 0.0
    return float(poly.difference(region.free).area)


def is_safe_configuration(region: Workspace, robot: RobotBody, p: Sequence[float]) -> bool:
    """Exact footprint check at a single configuration."""
    return contains(region, footprint_at(robot, p))


def eroded_free_region(region: Workspace, radius: float) -> Polygon:
    """Points q whose closed disk of the given radius lies in W."""
    eroded = region.free.buffer(-radius) if radius > 0 else region.free
    shapely.prepare(eroded)
    return eroded


def core_disk_unsafe(cfg_box: ConfigBox, eroded_free: Optional[Polygon]) -> bool:
    """True when no position in the box can host the robot's core disk.

    Every footprint contains the disk of radius `core_radius` around the
    reference point, so a position rectangle that misses the eroded free
    region holds no safe configuration at any heading.
    """
    if eroded_free is None:
        return False
    rect = shapely_box(cfg_box.x.lo, cfg_box.y.lo, cfg_box.x.hi, cfg_box.y.hi)
    return not eroded_free.intersects(rect)


def amplification_radius(robot: RobotBody, eps_w: Sequence[float]) -> float:
    """Radius v bounding footprint penetration for configurations ε_w-close to safe ones.

    v = 2r²(1 − cos ε_θ) + 2√2·max(ε_x, ε_y)
    """
    eps_x, eps_y, eps_theta = (float(e) for e in eps_w)
    return 2.0 * robot.r ** 2 * (1.0 - math.cos(eps_theta)) + 2.0 * math.sqrt(2.0) * max(eps_x, eps_y)


def sample_configurations(cfg_box: ConfigBox, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples from a configuration box, as an (n, 3) array."""
    lo = np.asarray(cfg_box.lo)
    hi = np.asarray(cfg_box.hi)
    return rng.uniform(lo, hi, size=(n, 3))
