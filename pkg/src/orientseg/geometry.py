"""Exact rotated-rectangle geometry.

Coordinate conventions used across the whole package:

* Image coordinates are raster coordinates: x grows to the right, y grows
  downward, units are pixels.  The pixel at row r, column c has its center
  at (x, y) = (c + 0.5, r + 0.5), so an image of width W and height H
  covers the region [0, W] x [0, H].
* A rotated box is (x_c, y_c, w, h, theta): center, width, height and the
  rotation angle in degrees.  ``theta`` is the clockwise on-screen rotation
  of the box's height axis away from the image's vertical axis; at
  ``theta = 0`` the box is axis-aligned with ``w`` along x and ``h`` along
  y.  Canonical angles live in [-90, 90); a rectangle is invariant under
  180-degree rotation, so any angle reduces into that range without
  touching w or h (swapping w and h is equivalent to a further +/-90).

All operations are pure functions on immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

Point = tuple[float, float]


def wrap_degrees(theta: float) -> float:
    """Reduce an angle modulo 180 into the canonical range [-90, 90).

    Angles already in range pass through untouched, so wrapping is exact
    (not merely close) on canonical inputs.
    """
    if -90.0 <= theta < 90.0:
        return theta
    wrapped = math.fmod(theta + 90.0, 180.0)
    if wrapped < 0.0:
        wrapped += 180.0
    return wrapped - 90.0


@dataclass(frozen=True)
class RotatedBox:
    """Five-parameter fingerprint region: center, size and angle in degrees."""

    x_c: float
    y_c: float
    w: float
    h: float
    theta: float = 0.0

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box dimensions must be positive, got w={self.w}, h={self.h}")
        if not all(math.isfinite(v) for v in (self.x_c, self.y_c, self.w, self.h, self.theta)):
            raise ValueError("box parameters must be finite")

    @property
    def area(self) -> float:
        return self.w * self.h

    def canonicalized(self) -> "RotatedBox":
        """Same rectangle with theta wrapped into [-90, 90)."""
        return RotatedBox(self.x_c, self.y_c, self.w, self.h, wrap_degrees(self.theta))


@dataclass(frozen=True)
class Quad:
    """Convex quadrilateral given by four vertices with positive shoelace area.

    For quads produced by :func:`to_quad` the vertex order is box-local
    top-left, top-right, bottom-right, bottom-left; sides are then
    top = (v0, v1), right = (v1, v2), bottom = (v2, v3), left = (v3, v0).
    """

    vertices: tuple[Point, Point, Point, Point]

    def __post_init__(self) -> None:
        if len(self.vertices) != 4:
            raise ValueError("quad needs exactly four vertices")
        if shoelace_area(list(self.vertices)) <= 0:
            raise ValueError("quad vertices must be ordered with positive shoelace area")


def rotation_matrix(theta_deg: float) -> tuple[float, float, float, float]:
    """Entries (m00, m01, m10, m11) of the raster-frame rotation by theta."""
    a = math.radians(theta_deg)
    c, s = math.cos(a), math.sin(a)
    return c, -s, s, c


def to_quad(box: RotatedBox) -> Quad:
    """Corners of the box, starting at the box-local top-left.

    The local top-left is (-w/2, -h/2) in the box frame (smaller y is "up"
    in raster coordinates); the returned order top-left, top-right,
    bottom-right, bottom-left has positive shoelace area.
    """
    m00, m01, m10, m11 = rotation_matrix(box.theta)
    hw, hh = box.w / 2.0, box.h / 2.0
    corners = []
    for u, v in ((-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)):
        corners.append((box.x_c + m00 * u + m01 * v, box.y_c + m10 * u + m11 * v))
    return Quad(tuple(corners))


def shoelace_area(poly: list[Point]) -> float:
    """Signed shoelace area of a polygon (positive for to_quad ordering)."""
    if len(poly) < 3:
        return 0.0
    total = 0.0
    for (x0, y0), (x1, y1) in zip(poly, poly[1:] + poly[:1]):
        total += x0 * y1 - x1 * y0
    return total / 2.0


def clip_polygon(subject: list[Point], clipper: list[Point]) -> list[Point]:
    """Sutherland-Hodgman clip of a polygon against a convex clipper.

    Both polygons must be in positive-shoelace order.  Points exactly on a
    clip edge are kept, so degenerate shared-edge intersections survive as
    zero-area polygons.
    """
    output = subject
    cx, cy = clipper[-1]
    for vx, vy in clipper:
        if not output:
            return []
        ex, ey = vx - cx, vy - cy
        input_list = output
        output = []
        sx, sy = input_list[-1]
        s_side = ex * (sy - cy) - ey * (sx - cx)
        for px, py in input_list:
            p_side = ex * (py - cy) - ey * (px - cx)
            if p_side >= 0.0:  # inside or on the clip edge
                if s_side < 0.0:
                    output.append(_edge_intersection(sx, sy, px, py, cx, cy, vx, vy))
                output.append((px, py))
            elif s_side >= 0.0:
                output.append(_edge_intersection(sx, sy, px, py, cx, cy, vx, vy))
            sx, sy, s_side = px, py, p_side
        cx, cy = vx, vy
    return output


def _edge_intersection(
    sx: float, sy: float, px: float, py: float, ax: float, ay: float, bx: float, by: float
) -> Point:
    """Intersection of segment (s, p) with the infinite line through (a, b)."""
    dx, dy = px - sx, py - sy
    ex, ey = bx - ax, by - ay
    denom = ex * dy - ey * dx
    if denom == 0.0:  # parallel; degenerate contact, either endpoint works
        return (px, py)
    t = (ey * (sx - ax) - ex * (sy - ay)) / denom
    return (sx + t * dx, sy + t * dy)


class PreparedBox:
    """Corner/extent cache for repeated IoU queries against one box."""

    __slots__ = ("key", "quad", "area", "aabb")

    def __init__(self, box: RotatedBox):
        self.key = (box.x_c, box.y_c, box.w, box.h, box.theta)
        self.quad = list(to_quad(box).vertices)
        self.area = box.area
        xs = [p[0] for p in self.quad]
        ys = [p[1] for p in self.quad]
        self.aabb = (min(xs), min(ys), max(xs), max(ys))


def iou_prepared(a: PreparedBox, b: PreparedBox) -> float:
    # Canonical clip order keeps the result bit-exact symmetric.
    if b.key < a.key:
        a, b = b, a
    if (
        a.aabb[2] < b.aabb[0]
        or b.aabb[2] < a.aabb[0]
        or a.aabb[3] < b.aabb[1]
        or b.aabb[3] < a.aabb[1]
    ):
        return 0.0
    clipped = clip_polygon(a.quad, b.quad)
    if len(clipped) < 3:
        return 0.0
    inter = shoelace_area(clipped)
    if inter <= 0.0:
        return 0.0
    union = a.area + b.area - inter
    return min(1.0, inter / union)


def intersection_area(a: RotatedBox, b: RotatedBox) -> float:
    """Exact overlap area of two rotated boxes via convex clipping."""
    pa, pb = PreparedBox(a), PreparedBox(b)
    iou = iou_prepared(pa, pb)
    if iou <= 0.0:
        return 0.0
    # Recover the intersection from IoU: inter = iou * union.
    return iou * (pa.area + pb.area) / (1.0 + iou)


def rotated_iou(a: RotatedBox, b: RotatedBox) -> float:
    """Intersection-over-union of two rotated boxes, in [0, 1].

    Computed by Sutherland-Hodgman clipping of the two corner quads
    followed by the shoelace area; symmetric in its arguments.
    """
    return iou_prepared(PreparedBox(a), PreparedBox(b))


def pairwise_iou(boxes_a: list[RotatedBox], boxes_b: list[RotatedBox]) -> list[list[float]]:
    """IoU matrix [len(boxes_a)][len(boxes_b)], sharing the scalar kernel."""
    prepared_b = [PreparedBox(b) for b in boxes_b]
    out = []
    for a in boxes_a:
        pa = PreparedBox(a)
        out.append([iou_prepared(pa, pb) for pb in prepared_b])
    return out


def contains(box: RotatedBox, p: Point, eps: float = 1e-9) -> bool:
    """True iff the point lies inside the box or on its boundary."""
    m00, m01, m10, m11 = rotation_matrix(-box.theta)
    dx, dy = p[0] - box.x_c, p[1] - box.y_c
    u = m00 * dx + m01 * dy
    v = m10 * dx + m11 * dy
    return abs(u) <= box.w / 2.0 + eps and abs(v) <= box.h / 2.0 + eps


def from_quad(quad: Quad) -> RotatedBox:
    """Recover a rotated box from four rectangle corners.

    Inverse of :func:`to_quad` up to the w/h swap vs theta+/-90 symmetry;
    the result is canonicalized.
    """
    (x0, y0), (x1, y1), (x2, y2), _ = quad.vertices
    w = math.hypot(x1 - x0, y1 - y0)
    h = math.hypot(x2 - x1, y2 - y1)
    if w <= 0 or h <= 0:
        raise ValueError("degenerate quad")
    cx = (x0 + x2) / 2.0
    cy = (y0 + y2) / 2.0
    # The top edge direction is the box x-axis rotated by theta.
    theta = math.degrees(math.atan2(y1 - y0, x1 - x0))
    return RotatedBox(cx, cy, w, h, wrap_degrees(theta))
