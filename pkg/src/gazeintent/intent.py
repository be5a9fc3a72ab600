"""Per-object confidence field over gaze evidence, plus comparison baselines.

Each region slot accumulates a confidence in [0, 1] from two bounded evidence
terms: a distance trend (approaching vs. receding, saturated to 1 inside the
region) and a direction trend measured against the tangent cone from the
previous gaze point. Confidence integrates dt * (e_dist + e_dir) per sample
and is clipped, which makes intent "stick" to an object: a single adverse
saccade can never erase a saturated confidence.

Selection is a set: every object whose best slot clears c_min is an intent
candidate. When nothing clears the threshold the previous selection is
retained, so brief occlusions or glances away do not drop the target.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from gazeintent.geometry import (
    EPS,
    Circle,
    DegenerateInput,
    Point2,
    motion_cos,
    segment_circle_intersections,
    tangent_cone_cos,
)
from gazeintent.scene import SceneFrame

SlotKey = tuple[str, int]  # (object_id, part_index)

# Evidence applied per step in the frozen branch when decay is enabled.
DECAY_EVIDENCE = 0.1

# Baseline constants: kNN eligibility radius multiple, fixation streak length,
# distribution window and exponential decay.
KNN_RANGE_MULTIPLE = 2.0
FIXATION_STREAK = 5
DISTRIBUTION_WINDOW = 5
DISTRIBUTION_DECAY = 0.7


def _sgn(v: float) -> float:
    if v > EPS:
        return 1.0
    if v < -EPS:
        return -1.0
    return 0.0


@dataclass(frozen=True)
class IntentParams:
    """Update-step, selection threshold, and saccade threshold (pixels)."""

    dt: float = 0.3
    c_min: float = 0.3
    tau_px: float = 50.0
    decay_enabled: bool = False

    def __post_init__(self) -> None:
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if not 0.0 < self.c_min <= 1.0:
            raise ValueError("c_min must lie in (0, 1]")
        if not self.tau_px > 0.0:
            raise ValueError("tau_px must be positive")


@dataclass(frozen=True)
class GazeSample:
    """Timestamped gaze point in image pixels."""

    t: float
    point: Point2

    @staticmethod
    def at(t: float, x: float, y: float) -> "GazeSample":
        return GazeSample(t, Point2(x, y))


@dataclass(frozen=True)
class EvidencePair:
    e_dist: float
    e_dir: float

    @property
    def total(self) -> float:
        return self.e_dist + self.e_dir


@dataclass(frozen=True)
class SlotDebug:
    """Transient per-slot quantities of one update, for inspection and tests."""

    slot: SlotKey
    branch: str  # saccade | fixation | leaving | frozen
    e_dist: float
    e_dir: float
    d_prev: float
    d_now: float
    delta_g: float
    sigma: float
    cos_theta: Optional[float] = None
    cos_phi: Optional[float] = None
    intersections: Optional[int] = None
    delta: Optional[float] = None


@dataclass(frozen=True)
class UpdateDebug:
    gaze: Point2
    clamped: bool
    slots: tuple[SlotDebug, ...]


@dataclass(frozen=True)
class ConfidenceField:
    """Immutable snapshot of per-slot confidences and the current intent set."""

    entries: tuple[tuple[SlotKey, float], ...] = ()
    prev_gaze: Optional[Point2] = None
    intent_set: tuple[str, ...] = ()
    last_committed: Optional[str] = None

    def confidence(self, slot: SlotKey) -> float:
        for key, c in self.entries:
            if key == slot:
                return c
        return 0.0

    def object_confidence(self, object_id: str) -> float:
        best = 0.0
        found = False
        for (oid, _), c in self.entries:
            if oid == object_id:
                best = max(best, c)
                found = True
        return best if found else 0.0

    def object_confidences(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for (oid, _), c in self.entries:
            out[oid] = max(out.get(oid, 0.0), c)
        return out

    def selected(self) -> Optional[str]:
        """Single-object readout: highest-confidence member of the intent set."""
        if not self.intent_set:
            return None
        return max(sorted(self.intent_set), key=self.object_confidence)

    def reset(self) -> "ConfidenceField":
        """Zero all confidences and forget the selection; keeps nothing else."""
        return ConfidenceField(
            entries=tuple((k, 0.0) for k, _ in self.entries),
            prev_gaze=self.prev_gaze,
            intent_set=(),
            last_committed=None,
        )


def empty_field() -> ConfidenceField:
    return ConfidenceField()


def distance_evidence(g_prev: Point2, g_now: Point2, region: Circle) -> float:
    """Distance trend in [-1, 1]: 1 inside the region, otherwise the relative
    closeness signed by whether the gaze moved toward or away from the center.
    """
    d_now = g_now.dist(region.center)
    if d_now <= region.radius:
        return 1.0
    d_prev = g_prev.dist(region.center)
    return (1.0 - (d_now - region.radius) / d_now) * _sgn(d_prev - d_now)


def direction_evidence(g_prev: Point2, g_now: Point2, region: Circle) -> float:
    """Direction trend in [-1, 1] against the tangent cone from g_prev.

    -1 when the displacement segment punches straight through the region (two
    boundary crossings); otherwise (cos phi - cos theta) / (1 - delta cos theta)
    with delta the sign of the numerator, which maps cone-interior motion to
    (0, 1] and diverging motion to [-1, 0).

    The previous gaze point must lie outside the region; inside-region samples
    belong to the fixation branches of the field update.
    """
    d_prev = g_prev.dist(region.center)
    if d_prev < region.radius - EPS:
        raise ValueError("g_prev lies inside the region; use the fixation branch")
    crossings = segment_circle_intersections(g_prev, g_now, region)
    if crossings == 2:
        return -1.0
    cos_theta = tangent_cone_cos(d_prev, region.radius)
    try:
        cos_phi = motion_cos(g_prev, g_now, region.center)
    except DegenerateInput:
        cos_phi = 1.0  # gaze landed exactly on the center: head-on limit
    diff = cos_phi - cos_theta
    delta = _sgn(diff)
    if delta == 0.0:
        return 0.0
    return max(-1.0, min(1.0, diff / (1.0 - delta * cos_theta)))


def update_field(
    field_state: ConfidenceField,
    sample: GazeSample,
    scene: SceneFrame,
    params: IntentParams,
    debug: bool = False,
):
    """Advance the confidence field by one gaze sample.

    The very first sample only bootstraps the previous-gaze point; evidence
    needs a displacement. Per slot the branch is decided by where the previous
    gaze sat relative to the region and whether the displacement is a saccade
    (delta_g > tau):

      outside + saccade   -> distance and direction evidence
      inside,  staying    -> e_dist = 1 (fixation holds, micro-drift included)
      inside,  leaving    -> e_dir = -1 plus the (negative) distance term
      outside + no saccade-> no evidence; confidence frozen (optional decay)

    Gaze outside the image is clamped to the border and flagged in the debug
    record. Returns the new field, or (field, UpdateDebug) when debug is True.
    """
    if not scene.regions:
        raise ValueError("scene has no regions")

    gx = min(max(sample.point.x, 0.0), scene.image_w)
    gy = min(max(sample.point.y, 0.0), scene.image_h)
    clamped = (gx != sample.point.x) or (gy != sample.point.y)
    g_now = Point2(gx, gy)

    slots = sorted(scene.regions, key=lambda r: (r.object_id, r.part_index))

    if field_state.prev_gaze is None:
        fresh = ConfidenceField(
            entries=tuple(((r.object_id, r.part_index), 0.0) for r in slots),
            prev_gaze=g_now,
            intent_set=field_state.intent_set,
            last_committed=field_state.last_committed,
        )
        if debug:
            return fresh, UpdateDebug(g_now, clamped, ())
        return fresh

    g_prev = field_state.prev_gaze
    delta_g = g_prev.dist(g_now)
    tau = params.tau_px

    prev = dict(field_state.entries)
    entries: list[tuple[SlotKey, float]] = []
    records: list[SlotDebug] = []

    for region in slots:
        slot = (region.object_id, region.part_index)
        circle = region.circle
        r = circle.radius
        d_prev = g_prev.dist(circle.center)
        d_now = g_now.dist(circle.center)
        sigma = _sgn(d_prev - d_now)
        e_dist = 0.0
        e_dir = 0.0
        cos_theta = cos_phi = None
        crossings = None
        delta = None

        if d_prev > r and delta_g > tau:
            branch = "saccade"
            e_dist = distance_evidence(g_prev, g_now, circle)
            crossings = segment_circle_intersections(g_prev, g_now, circle)
            if crossings == 2:
                e_dir = -1.0
            else:
                cos_theta = tangent_cone_cos(d_prev, r)
                try:
                    cos_phi = motion_cos(g_prev, g_now, circle.center)
                except DegenerateInput:
                    cos_phi = 1.0
                diff = cos_phi - cos_theta
                delta = _sgn(diff)
                e_dir = 0.0 if delta == 0.0 else max(-1.0, min(1.0, diff / (1.0 - delta * cos_theta)))
        elif d_prev <= r:
            if d_now <= r or delta_g < tau:
                branch = "fixation"
                e_dist = 1.0
            else:
                branch = "leaving"
                e_dir = -1.0
                e_dist = distance_evidence(g_prev, g_now, circle)
        else:
            branch = "frozen"
            if params.decay_enabled:
                e_dist = -DECAY_EVIDENCE

        c = prev.get(slot, 0.0) + params.dt * (e_dist + e_dir)
        entries.append((slot, min(1.0, max(0.0, c))))
        if debug:
            records.append(
                SlotDebug(slot, branch, e_dist, e_dir, d_prev, d_now, delta_g, sigma,
                          cos_theta, cos_phi, crossings, delta)
            )

    by_object: dict[str, float] = {}
    for (oid, _), c in entries:
        by_object[oid] = max(by_object.get(oid, 0.0), c)
    chosen = tuple(sorted(oid for oid, c in by_object.items() if c >= params.c_min))
    if not chosen:
        chosen = field_state.intent_set  # retain the previous selection

    new_field = ConfidenceField(
        entries=tuple(entries),
        prev_gaze=g_now,
        intent_set=chosen,
        last_committed=field_state.last_committed,
    )
    if debug:
        return new_field, UpdateDebug(g_now, clamped, tuple(records))
    return new_field


def run_updates(
    field_state: ConfidenceField,
    samples: Sequence[GazeSample],
    scenes: Sequence[SceneFrame],
    params: IntentParams,
) -> list[ConfidenceField]:
    """Fold update_field over paired gaze/scene streams; returns every state."""
    if len(samples) != len(scenes):
        raise ValueError("gaze and scene streams must have equal length")
    states = []
    state = field_state
    for sample, scene in zip(samples, scenes):
        state = update_field(state, sample, scene, params)
        states.append(state)
    return states


def baseline_knn(g_now: Point2, scene: SceneFrame) -> Optional[str]:
    """Nearest-region pick from the latest sample alone.

    Eligible regions have the gaze within twice their radius of the center;
    among those the smallest boundary distance wins, ties to the lower id.
    """
    best: Optional[tuple[float, str, int]] = None
    for region in scene.regions:
        d = g_now.dist(region.circle.center)
        if d > KNN_RANGE_MULTIPLE * region.circle.radius:
            continue
        gap = max(0.0, d - region.circle.radius)
        key = (gap, region.object_id, region.part_index)
        if best is None or key < best:
            best = key
    return best[1] if best else None


def baseline_fixation(window: Sequence[Point2], scene: SceneFrame) -> Optional[str]:
    """Dwell rule: the last FIXATION_STREAK samples must all sit inside one
    object's regions. Overlaps are resolved to the lowest eligible id.
    """
    if len(window) < FIXATION_STREAK:
        return None
    candidates: Optional[set[str]] = None
    for p in window[-FIXATION_STREAK:]:
        inside = {r.object_id for r in scene.regions if r.circle.contains(p)}
        candidates = inside if candidates is None else candidates & inside
        if not candidates:
            return None
    return min(candidates) if candidates else None


def baseline_distribution(window: Sequence[Point2], scene: SceneFrame) -> Optional[str]:
    """Exponentially weighted centroid of the last DISTRIBUTION_WINDOW samples;
    selects the nearest object whose expanded region contains the centroid.
    """
    if not window:
        return None
    recent = window[-DISTRIBUTION_WINDOW:]
    wx = wy = wsum = 0.0
    weight = 1.0
    for p in reversed(recent):  # newest first, decaying backwards
        wx += weight * p.x
        wy += weight * p.y
        wsum += weight
        weight *= DISTRIBUTION_DECAY
    centroid = Point2(wx / wsum, wy / wsum)
    best: Optional[tuple[float, str]] = None
    for region in scene.regions:
        d = centroid.dist(region.circle.center)
        if d <= region.circle.radius:
            key = (d, region.object_id)
            if best is None or key < best:
                best = key
    return best[1] if best else None
