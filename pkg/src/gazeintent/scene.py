"""Scene model: bounding boxes to circular intent regions, scripted per-frame
object motion, and the 3D workspace with its on/in topology graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from shapely.geometry import Polygon

from gazeintent.geometry import EPS, Circle, Point2

DEFAULT_EXPAND = 0.10  # expand region radii by 10% to tolerate gaze noise
ELONGATED_ASPECT = 2.0  # boxes above this width:height ratio get split
EPS_Z = 0.005  # 5 mm stacking tolerance for topology relations


class InvalidBox(ValueError):
    """Bounding box with non-positive dimensions."""


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box, (x, y) top-left, in image pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not (self.w > 0.0 and self.h > 0.0):
            raise InvalidBox(f"box dimensions must be positive, got {self.w}x{self.h}")

    @property
    def center(self) -> Point2:
        return Point2(self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def aspect(self) -> float:
        return max(self.w, self.h) / min(self.w, self.h)


@dataclass(frozen=True)
class ObjectRegion:
    """One circular intent slot; elongated objects own several (part_index 0..k-1)."""

    object_id: str
    part_index: int
    circle: Circle


def decompose_bbox(object_id: str, box: BBox, expand: float = DEFAULT_EXPAND) -> list[ObjectRegion]:
    """Convert a detected box into expanded circular regions.

    Boxes with aspect ratio at most 2:1 become one circumscribed circle at the
    box center. Longer boxes are split into ceil(aspect) equal sub-boxes along
    the principal axis, each circumscribed separately, so every sub-box keeps
    aspect <= 2 and the union of circles covers the original box.
    """
    if expand < 0.0:
        raise ValueError(f"expand must be non-negative, got {expand}")
    factor = 1.0 + expand
    if box.aspect <= ELONGATED_ASPECT + EPS:
        radius = factor * math.hypot(box.w, box.h) / 2.0
        return [ObjectRegion(object_id, 0, Circle(box.center, radius))]

    k = math.ceil(box.aspect - EPS)
    horizontal = box.w >= box.h
    if horizontal:
        sub_w, sub_h = box.w / k, box.h
    else:
        sub_w, sub_h = box.w, box.h / k
    radius = factor * math.hypot(sub_w, sub_h) / 2.0
    regions = []
    for i in range(k):
        cx = box.x + (i + 0.5) * sub_w if horizontal else box.x + box.w / 2.0
        cy = box.y + box.h / 2.0 if horizontal else box.y + (i + 0.5) * sub_h
        regions.append(ObjectRegion(object_id, i, Circle(Point2(cx, cy), radius)))
    return regions


@dataclass(frozen=True)
class SceneFrame:
    """One frame of the 2D scene: detected boxes and their derived regions."""

    t: int
    image_w: float
    image_h: float
    boxes: tuple[tuple[str, BBox], ...]
    regions: tuple[ObjectRegion, ...]
    flags: tuple[str, ...] = ()

    @staticmethod
    def from_boxes(
        t: int,
        image_w: float,
        image_h: float,
        boxes: Sequence[tuple[str, BBox]],
        expand: float = DEFAULT_EXPAND,
        flags: Sequence[str] = (),
    ) -> "SceneFrame":
        ordered = tuple(sorted(boxes, key=lambda ob: ob[0]))
        seen = set()
        for oid, _ in ordered:
            if oid in seen:
                raise ValueError(f"duplicate object id {oid!r}")
            seen.add(oid)
        regions: list[ObjectRegion] = []
        for oid, box in ordered:
            regions.extend(decompose_bbox(oid, box, expand))
        return SceneFrame(t, image_w, image_h, ordered, tuple(regions), tuple(flags))

    def object_ids(self) -> tuple[str, ...]:
        return tuple(oid for oid, _ in self.boxes)

    def region_center(self, object_id: str) -> Point2:
        """Centroid of an object's region centers; handy as a gaze target."""
        pts = [r.circle.center for r in self.regions if r.object_id == object_id]
        if not pts:
            raise KeyError(object_id)
        return Point2(sum(p.x for p in pts) / len(pts), sum(p.y for p in pts) / len(pts))


@dataclass(frozen=True)
class MotionSpec:
    """Declarative per-object motion: static, velocity, waypoints or random_walk."""

    object_id: str
    kind: str  # static | velocity | waypoints | random_walk
    velocity: tuple[float, float] = (0.0, 0.0)  # px/frame, velocity kind
    waypoints: tuple[tuple[float, float], ...] = ()
    speed: float = 0.0  # px/frame, waypoints and random_walk kinds
    turn_sigma: float = 0.5  # radians/frame, random_walk heading jitter
    appear_at: int = 0  # frame index at which the object enters the scene

    KINDS = ("static", "velocity", "waypoints", "random_walk")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown motion kind {self.kind!r}")
        if self.kind == "waypoints" and len(self.waypoints) < 1:
            raise ValueError("waypoints kind needs at least one waypoint")


class ScriptSet:
    """Stateful motion scripts for one scenario run.

    Construction seeds an RNG; replaying the same specs with the same seed
    reproduces the exact frame sequence.
    """

    def __init__(
        self,
        specs: Iterable[MotionSpec],
        seed: int,
        initial_boxes: dict[str, BBox] | None = None,
    ):
        self.specs = {s.object_id: s for s in specs}
        self.initial_boxes = dict(initial_boxes or {})
        self.rng = np.random.default_rng([seed, 0x5CE])
        self._heading: dict[str, float] = {}
        self._leg: dict[str, int] = {}
        for oid in sorted(self.specs):
            if self.specs[oid].kind == "random_walk":
                self._heading[oid] = float(self.rng.uniform(0.0, 2.0 * math.pi))
            self._leg[oid] = 0

    def step(self, scene: SceneFrame) -> SceneFrame:
        """Advance every scripted box by one frame.

        Boxes are kept fully inside the image; a clamped object is flagged in
        the returned frame. Objects with appear_at in the future stay hidden.
        """
        next_t = scene.t + 1
        moved: list[tuple[str, BBox]] = []
        flags: list[str] = []
        current = dict(scene.boxes)
        for oid in sorted(self.specs):
            spec = self.specs[oid]
            if spec.appear_at > next_t:
                continue
            box = current.get(oid) or self.initial_boxes.get(oid)  # late spawn
            if box is None:
                continue
            dx, dy = self._delta(spec, box)
            nx, ny = box.x + dx, box.y + dy
            cx = min(max(nx, 0.0), scene.image_w - box.w)
            cy = min(max(ny, 0.0), scene.image_h - box.h)
            if cx != nx or cy != ny:
                flags.append(f"clamped:{oid}")
                if spec.kind == "random_walk":  # bounce instead of sticking to the wall
                    self._heading[oid] = float(self.rng.uniform(0.0, 2.0 * math.pi))
            moved.append((oid, BBox(cx, cy, box.w, box.h)))
        return SceneFrame.from_boxes(next_t, scene.image_w, scene.image_h, moved, flags=flags)

    def _delta(self, spec: MotionSpec, box: BBox) -> tuple[float, float]:
        if spec.kind == "static":
            return 0.0, 0.0
        if spec.kind == "velocity":
            return spec.velocity
        if spec.kind == "waypoints":
            target = spec.waypoints[self._leg[spec.object_id] % len(spec.waypoints)]
            c = box.center
            gap = math.hypot(target[0] - c.x, target[1] - c.y)
            if gap <= max(spec.speed, EPS):
                self._leg[spec.object_id] += 1
                return target[0] - c.x, target[1] - c.y
            scale = spec.speed / gap
            return (target[0] - c.x) * scale, (target[1] - c.y) * scale
        # random_walk: heading diffuses, speed constant
        oid = spec.object_id
        self._heading[oid] += float(self.rng.normal(0.0, spec.turn_sigma))
        return spec.speed * math.cos(self._heading[oid]), spec.speed * math.sin(self._heading[oid])


def step_scene(scene: SceneFrame, scripts: ScriptSet) -> SceneFrame:
    """Functional wrapper over ScriptSet.step for symmetry with the other ops."""
    return scripts.step(scene)


@dataclass(frozen=True)
class WorkspaceObject:
    """Robot-side 3D object: grasp geometry plus footprint for topology."""

    object_id: str
    label: str
    position: tuple[float, float, float]
    pre_grasp_position: tuple[float, float, float]
    pre_grasp_orientation: tuple[float, float, float, float]  # unit quaternion, wxyz
    footprint: tuple[tuple[float, float], ...]  # horizontal polygon, meters
    z_extent: tuple[float, float]
    surface_points: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self) -> None:
        z_min, z_max = self.z_extent
        if not z_min < z_max:
            raise ValueError(f"{self.object_id}: z_extent must satisfy z_min < z_max")
        if self.pre_grasp_position[2] <= z_max:
            raise ValueError(f"{self.object_id}: pre-grasp must sit above z_max")
        norm = math.sqrt(sum(c * c for c in self.pre_grasp_orientation))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"{self.object_id}: orientation quaternion must be unit length")
        if len(self.footprint) < 3:
            raise ValueError(f"{self.object_id}: footprint needs at least 3 vertices")

    @property
    def z_min(self) -> float:
        return self.z_extent[0]

    @property
    def z_max(self) -> float:
        return self.z_extent[1]

    def polygon(self) -> Polygon:
        return Polygon(self.footprint)


@dataclass(frozen=True)
class TopologyGraph:
    """Spatial relations between workspace objects: (child, 'on'|'in', parent)."""

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str, str], ...]

    def parents(self, child: str, relation: str = "on") -> tuple[str, ...]:
        return tuple(p for c, rel, p in self.edges if c == child and rel == relation)

    def children(self, parent: str, relation: str = "on") -> tuple[str, ...]:
        return tuple(c for c, rel, p in self.edges if p == parent and rel == relation)

    def above(self, target: str) -> list[str]:
        """Objects transitively resting on target, topmost first."""
        depth: dict[str, int] = {}
        frontier = [(target, 0)]
        while frontier:
            node, d = frontier.pop()
            for child in self.children(node, "on"):
                if depth.get(child, -1) < d + 1:
                    depth[child] = d + 1
                    frontier.append((child, d + 1))
        return sorted(depth, key=lambda oid: (-depth[oid], oid))

    def without(self, object_id: str) -> "TopologyGraph":
        """Graph after removing every edge that touches object_id."""
        kept = tuple(e for e in self.edges if object_id not in (e[0], e[2]))
        return TopologyGraph(self.nodes, kept)


def build_topology(objects: Sequence[WorkspaceObject]) -> TopologyGraph:
    """Derive on/in relations from footprints and z-extents.

    A sits *on* B when their footprints overlap with positive area and A's base
    is at or above B's top (within EPS_Z). A sits *in* B when A's footprint is
    strictly inside B's and A's z-range nests inside B's (top within EPS_Z).
    When both hold, the more specific *in* wins.
    """
    ordered = sorted(objects, key=lambda o: o.object_id)
    polys = {o.object_id: o.polygon() for o in ordered}
    edges: list[tuple[str, str, str]] = []
    for a in ordered:
        for b in ordered:
            if a.object_id == b.object_id:
                continue
            pa, pb = polys[a.object_id], polys[b.object_id]
            contained = pb.contains_properly(pa) if hasattr(pb, "contains_properly") else (
                pb.contains(pa) and not pb.exterior.intersects(pa)
            )
            is_in = contained and a.z_min >= b.z_min and a.z_max <= b.z_max + EPS_Z
            if is_in:
                edges.append((a.object_id, "in", b.object_id))
                continue
            if pa.intersection(pb).area > 0.0 and a.z_min >= b.z_max - EPS_Z:
                edges.append((a.object_id, "on", b.object_id))
    return TopologyGraph(tuple(o.object_id for o in ordered), tuple(edges))
