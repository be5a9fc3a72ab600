"""Continuous shared control over the confidence field.

Before a command the effector drifts toward a confidence-weighted virtual
target at confidence-scaled speed; a command commits the highest-confidence
intent and the effector approaches it at full speed with the same distance
ramp. Arrival gates a confirm/reject exchange: one rejection retargets the
second candidate, a second sends the effector home and resets inference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Mapping, Optional

from gazeintent.geometry import EPS
from gazeintent.intent import ConfidenceField

Vec3 = tuple[float, float, float]

ARRIVE_DIST = 0.005  # meters; the "arrived" event threshold
MAX_REJECTS = 2


class NoCandidate(ValueError):
    """Every intent candidate has been rejected; nothing left to commit."""


class Mode(Enum):
    PRE_COMMAND = "PreCommand"
    POST_COMMAND = "PostCommand"
    AWAIT_CONFIRM = "AwaitConfirm"
    SECOND_CANDIDATE = "SecondCandidate"
    RETURN_HOME = "ReturnHome"
    EXECUTING = "Executing"


@dataclass(frozen=True)
class ControlParams:
    v_max: float = 0.10  # m/s speed ceiling
    delta_r: float = 0.05  # meters; deceleration radius
    target_mode: str = "normalized"  # 'literal' divides by candidate count

    def __post_init__(self) -> None:
        if not self.v_max > 0.0:
            raise ValueError("v_max must be positive")
        if not self.delta_r > 0.0:
            raise ValueError("delta_r must be positive")
        if self.target_mode not in ("literal", "normalized"):
            raise ValueError(f"unknown target_mode {self.target_mode!r}")


@dataclass(frozen=True)
class EffectorState:
    position: Vec3
    velocity: Vec3 = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Event:
    """One interaction event per control tick."""

    kind: str  # command | confirm | reject | arrived | none
    command_kind: Optional[str] = None  # parsed primitive for 'command'

    KINDS = ("command", "confirm", "reject", "arrived", "none")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")


@dataclass(frozen=True)
class InteractionState:
    mode: Mode = Mode.PRE_COMMAND
    committed: Optional[str] = None
    rejected: frozenset[str] = frozenset()
    home: Vec3 = (0.0, 0.0, 0.0)
    pending_kind: Optional[str] = None  # primitive to run once confirmed

    _COMMITTED_MODES = (Mode.POST_COMMAND, Mode.AWAIT_CONFIRM, Mode.SECOND_CANDIDATE, Mode.EXECUTING)

    def __post_init__(self) -> None:
        if (self.committed is not None) != (self.mode in self._COMMITTED_MODES):
            raise ValueError(f"committed target inconsistent with mode {self.mode}")
        if len(self.rejected) > MAX_REJECTS:
            raise ValueError("more than two rejections without returning home")


@dataclass(frozen=True)
class StepResult:
    state: InteractionState
    notices: tuple[str, ...] = ()
    reset_field: bool = False


def _norm(v: Vec3) -> float:
    return math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


def _sub(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def virtual_target(
    field: ConfidenceField,
    pre_grasp: Mapping[str, Vec3],
    mode: str = "normalized",
) -> Optional[Vec3]:
    """Confidence-weighted combination of the intent candidates' pre-grasp
    positions. 'literal' divides by the candidate count, which deliberately
    pulls toward the origin at low confidence; 'normalized' divides by the
    summed confidence. None when there is nothing to steer toward.
    """
    ids = [oid for oid in field.intent_set if oid in pre_grasp]
    if not ids:
        return None
    acc = [0.0, 0.0, 0.0]
    c_sum = 0.0
    for oid in ids:
        c = field.object_confidence(oid)
        p = pre_grasp[oid]
        acc[0] += c * p[0]
        acc[1] += c * p[1]
        acc[2] += c * p[2]
        c_sum += c
    denom = float(len(ids)) if mode == "literal" else c_sum
    if denom <= EPS:
        return None  # retained intent at zero confidence: idle
    return (acc[0] / denom, acc[1] / denom, acc[2] / denom)


def _speed_ramp(distance: float, delta_r: float) -> float:
    return min(max(distance / delta_r, 0.0), 1.0)


def pre_command_velocity(
    eff: EffectorState,
    field: ConfidenceField,
    pre_grasp: Mapping[str, Vec3],
    params: ControlParams,
) -> Vec3:
    """Standby drift: mean-confidence-scaled speed toward the virtual target,
    ramped down linearly inside delta_r. Zero without intent. No rotation.
    """
    target = virtual_target(field, pre_grasp, params.target_mode)
    if target is None:
        return (0.0, 0.0, 0.0)
    ids = [oid for oid in field.intent_set if oid in pre_grasp]
    speed_scale = sum(field.object_confidence(oid) for oid in ids) / len(ids)
    gap = _sub(target, eff.position)
    dist = _norm(gap)
    if dist <= EPS:
        return (0.0, 0.0, 0.0)
    speed = params.v_max * speed_scale * _speed_ramp(dist, params.delta_r)
    return (speed * gap[0] / dist, speed * gap[1] / dist, speed * gap[2] / dist)


def commit_intent(field: ConfidenceField, rejected: frozenset[str] = frozenset()) -> str:
    """Resolve the intent set to one object: highest confidence wins, rejected
    ids are skipped, ties fall to the lower id.
    """
    candidates = [oid for oid in field.intent_set if oid not in rejected]
    if not candidates:
        raise NoCandidate("no unrejected intent candidate")
    return max(sorted(candidates), key=field.object_confidence)


def post_command_velocity(eff: EffectorState, target_pos: Vec3, params: ControlParams) -> Vec3:
    """Committed approach: full speed toward the target with the same ramp."""
    gap = _sub(target_pos, eff.position)
    dist = _norm(gap)
    if dist <= EPS:
        return (0.0, 0.0, 0.0)
    speed = params.v_max * _speed_ramp(dist, params.delta_r)
    return (speed * gap[0] / dist, speed * gap[1] / dist, speed * gap[2] / dist)


def integrate_effector(
    eff: EffectorState,
    v: Vec3,
    dt_wall: float,
    v_max: float = 0.10,
    z_floor: Optional[float] = None,
) -> EffectorState:
    """Kinematic step with the commanded velocity, clamped to the speed
    ceiling and kept above the safety plane when one is given.
    """
    speed = _norm(v)
    if speed > v_max:
        scale = v_max / speed
        v = (v[0] * scale, v[1] * scale, v[2] * scale)
    x = eff.position[0] + v[0] * dt_wall
    y = eff.position[1] + v[1] * dt_wall
    z = eff.position[2] + v[2] * dt_wall
    if z_floor is not None:
        z = max(z, z_floor)
    return EffectorState((x, y, z), v)


def slerp(
    q0: tuple[float, float, float, float],
    q1: tuple[float, float, float, float],
    s: float,
) -> tuple[float, float, float, float]:
    """Spherical interpolation between unit quaternions, shortest arc."""
    dot = sum(a * b for a, b in zip(q0, q1))
    if dot < 0.0:
        q1 = tuple(-c for c in q1)
        dot = -dot
    dot = min(dot, 1.0)
    if dot > 1.0 - 1e-9:  # nearly parallel: lerp and renormalize
        out = tuple(a + s * (b - a) for a, b in zip(q0, q1))
        n = math.sqrt(sum(c * c for c in out))
        return tuple(c / n for c in out)
    theta = math.acos(dot)
    w0 = math.sin((1.0 - s) * theta) / math.sin(theta)
    w1 = math.sin(s * theta) / math.sin(theta)
    return tuple(w0 * a + w1 * b for a, b in zip(q0, q1))


def step_interaction(
    state: InteractionState,
    event: Event,
    field: ConfidenceField,
) -> StepResult:
    """Advance the glance-say-confirm state machine by one event.

    Execution is only reachable through AwaitConfirm + confirm. The 'arrived'
    event is issued by the session when the effector closes within ARRIVE_DIST
    of its goal (or, in Executing, when the plan finishes).
    """
    mode = state.mode

    if event.kind == "none":
        return StepResult(state)

    if event.kind == "command":
        if mode is not Mode.PRE_COMMAND:
            return StepResult(state, ("command ignored: already committed",))
        if not field.intent_set:
            return StepResult(state, ("command ignored: no intent candidate",))
        committed = commit_intent(field, state.rejected)
        new = replace(state, mode=Mode.POST_COMMAND, committed=committed,
                      pending_kind=event.command_kind)
        return StepResult(new, (f"committed {committed}",))

    if event.kind == "arrived":
        if mode in (Mode.POST_COMMAND, Mode.SECOND_CANDIDATE):
            return StepResult(replace(state, mode=Mode.AWAIT_CONFIRM),
                              (f"reached {state.committed}; confirm or reject",))
        if mode is Mode.RETURN_HOME:
            fresh = InteractionState(home=state.home)
            return StepResult(fresh, ("returned home; re-inferring intent",), reset_field=True)
        if mode is Mode.EXECUTING:
            fresh = InteractionState(home=state.home)
            return StepResult(fresh, ("execution finished",), reset_field=True)
        return StepResult(state)

    if event.kind == "confirm":
        if mode is not Mode.AWAIT_CONFIRM:
            return StepResult(state, ("nothing to confirm",))
        return StepResult(replace(state, mode=Mode.EXECUTING),
                          (f"confirmed {state.committed}; executing",))

    if event.kind == "reject":
        if mode is not Mode.AWAIT_CONFIRM:
            return StepResult(state, ("nothing to reject",))
        rejected = state.rejected | {state.committed}
        if len(rejected) >= MAX_REJECTS:
            new = replace(state, mode=Mode.RETURN_HOME, committed=None,
                          rejected=rejected, pending_kind=None)
            return StepResult(new, ("second rejection; returning home",))
        try:
            second = commit_intent(field, rejected)
        except NoCandidate:
            new = replace(state, mode=Mode.RETURN_HOME, committed=None,
                          rejected=rejected, pending_kind=None)
            return StepResult(new, ("no other candidate; returning home",))
        new = replace(state, mode=Mode.SECOND_CANDIDATE, committed=second, rejected=rejected)
        return StepResult(new, (f"rejected; trying {second}",))

    raise ValueError(f"unhandled event {event.kind!r}")
