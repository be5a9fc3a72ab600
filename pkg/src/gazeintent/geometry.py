"""Exact 2D primitives behind the evidence terms: distances, segment-circle
intersection counting, tangent-cone half-angle, and gaze-motion angle.

All functions are pure and operate in image pixels. Branch decisions use the
shared guard EPS; anything within EPS of a branch boundary is treated as being
on the non-error side, since gaze coordinates arrive as floats and exact
equality carries no meaning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EPS = 1e-9


class DegenerateInput(ValueError):
    """Zero-length displacement or gaze coincident with an object center."""


class ConeUndefined(ValueError):
    """Tangent cone requested from a point inside the circle."""


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")

    def dist(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Circle:
    center: Point2
    radius: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.radius) and self.radius > 0.0):
            raise ValueError(f"radius must be strictly positive, got {self.radius}")

    def contains(self, p: Point2) -> bool:
        return p.dist(self.center) <= self.radius


def segment_circle_intersections(a: Point2, b: Point2, circle: Circle) -> int:
    """Count boundary crossings of the closed segment [a, b] with the circle.

    Tangency counts as one intersection; an endpoint lying on the boundary
    counts as that intersection. Returns 0, 1 or 2.
    """
    dx = b.x - a.x
    dy = b.y - a.y
    seg2 = dx * dx + dy * dy
    if seg2 <= EPS * EPS:
        raise DegenerateInput("zero-length segment")

    fx = a.x - circle.center.x
    fy = a.y - circle.center.y
    # Roots of |a + t(b-a) - center|^2 = r^2, normalized by |b-a|^2 so the
    # analysis is invariant under uniform rescaling of the scene.
    half_p = (dx * fx + dy * fy) / seg2
    q = (fx * fx + fy * fy - circle.radius * circle.radius) / seg2
    disc = half_p * half_p - q

    if disc < -EPS:
        return 0

    def in_range(t: float) -> bool:
        return -EPS <= t <= 1.0 + EPS

    if disc <= EPS:  # tangent line: double root collapses to one touch point
        return 1 if in_range(-half_p) else 0

    s = math.sqrt(disc)
    return int(in_range(-half_p - s)) + int(in_range(-half_p + s))


def tangent_cone_cos(d_prev: float, r: float) -> float:
    """Cosine of the half-angle of the cone spanned by the two tangents from a
    point at distance d_prev to a circle of radius r.

    Equals sqrt(1 - (r/d_prev)^2). The point must lie outside or on the
    boundary; on the boundary the cone opens to a half-plane (cosine 0).
    """
    if not (r > 0.0 and d_prev > 0.0):
        raise ValueError("radius and distance must be positive")
    if d_prev < r - EPS:
        raise ConeUndefined(f"point at distance {d_prev} is inside radius {r}")
    ratio = min(r / d_prev, 1.0)
    return math.sqrt(max(0.0, 1.0 - ratio * ratio))


def motion_cos(g_prev: Point2, g_now: Point2, center: Point2) -> float:
    """Cosine between the gaze displacement g_prev->g_now and the direction
    from g_now toward center. +1 is head-on approach, -1 is directly away.
    """
    ux = g_now.x - g_prev.x
    uy = g_now.y - g_prev.y
    vx = center.x - g_now.x
    vy = center.y - g_now.y
    nu = math.hypot(ux, uy)
    nv = math.hypot(vx, vy)
    if nu <= EPS:
        raise DegenerateInput("zero gaze displacement")
    if nv <= EPS:
        raise DegenerateInput("gaze coincides with object center")
    c = (ux * vx + uy * vy) / (nu * nv)
    return max(-1.0, min(1.0, c))
