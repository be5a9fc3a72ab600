"""Scenario execution: synthetic gaze over scripted scenes, intent method
dispatch, shared-control ticking, and metric computation.

A scenario is fully declarative and reproducible: the same scenario and seed
always produce bit-identical traces. Gaze runs at the scenario's sample rate
(default 10 Hz); when control is enabled the effector and interaction machine
tick at a higher rate (default 20 Hz) between gaze samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import mean, pstdev
from typing import Optional, Sequence

import numpy as np

from gazeintent.control import (
    ARRIVE_DIST,
    ControlParams,
    EffectorState,
    Event,
    InteractionState,
    Mode,
    StepResult,
    integrate_effector,
    post_command_velocity,
    pre_command_velocity,
    slerp,
    step_interaction,
    virtual_target,
)
from gazeintent.geometry import Point2
from gazeintent.intent import (
    ConfidenceField,
    GazeSample,
    IntentParams,
    baseline_distribution,
    baseline_fixation,
    baseline_knn,
    empty_field,
    update_field,
)
from gazeintent.planner import Plan, PlanningError, Primitive, expand_plan, parse_command
from gazeintent.scene import (
    BBox,
    MotionSpec,
    SceneFrame,
    ScriptSet,
    TopologyGraph,
    WorkspaceObject,
    build_topology,
)

METHODS = ("sticky", "knn", "fixation", "distribution")
WARMUP_SAMPLES = 3  # scoring starts after this many gaze samples
MAX_SACCADE_FRAMES = 200


@dataclass(frozen=True)
class GazeSegment:
    """One piece of the gaze program: fixate / saccade / pursuit / fixate_point.

    Pursuit segments can interleave brief attention flicks to other objects
    (glance_prob per frame, glance_frames long). The intent ground truth stays
    on the pursued target: a short glance is gaze noise, not an intent change.
    """

    kind: str
    target: Optional[str] = None
    point: Optional[tuple[float, float]] = None
    frames: int = 0
    glance_prob: float = 0.0
    glance_frames: int = 1

    KINDS = ("fixate", "saccade", "pursuit", "fixate_point")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown gaze segment kind {self.kind!r}")
        if self.kind in ("fixate", "saccade", "pursuit") and not self.target:
            raise ValueError(f"{self.kind} segment needs a target")
        if self.kind == "fixate_point" and self.point is None:
            raise ValueError("fixate_point segment needs a point")
        if self.kind in ("fixate", "pursuit", "fixate_point") and self.frames < 1:
            raise ValueError(f"{self.kind} segment needs frames >= 1")
        if not 0.0 <= self.glance_prob < 1.0 or self.glance_frames < 1:
            raise ValueError("glance_prob must be in [0, 1) with glance_frames >= 1")


@dataclass(frozen=True)
class GazeProgram:
    rate_hz: float = 10.0
    jitter_px: float = 8.0
    microsaccade_prob: float = 0.1
    microsaccade_px: tuple[float, float] = (15.0, 45.0)
    saccade_step_px: float = 120.0
    pursuit_gain: float = 0.8
    segments: tuple[GazeSegment, ...] = ()

    def __post_init__(self) -> None:
        if self.rate_hz <= 0.0:
            raise ValueError("rate_hz must be positive")
        lo, hi = self.microsaccade_px
        if not 0.0 <= lo <= hi:
            raise ValueError("microsaccade amplitude band must be ordered and non-negative")


@dataclass(frozen=True)
class CommandSpec:
    at_s: float
    kind: str  # command | confirm | reject
    text: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("command", "confirm", "reject"):
            raise ValueError(f"unknown command kind {self.kind!r}")


@dataclass(frozen=True)
class ControlConfig:
    enabled: bool = False
    tick_hz: float = 20.0
    exec_step_s: float = 1.0  # simulated duration per plan step
    shared: bool = True  # False: stay parked until a command (target-pose style)

    def __post_init__(self) -> None:
        if self.tick_hz <= 0.0:
            raise ValueError("tick_hz must be positive")


@dataclass(frozen=True)
class WorkspaceConfig:
    home: tuple[float, float, float]
    z_floor: float = 0.0
    free_slots: tuple[tuple[float, float, float], ...] = ()
    objects: tuple[WorkspaceObject, ...] = ()
    camera: Optional[object] = None  # CameraPose, used by the bridge alignment

    def pre_grasp_map(self) -> dict[str, tuple[float, float, float]]:
        return {o.object_id: o.pre_grasp_position for o in self.objects}


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int = 0
    image_w: float = 640.0
    image_h: float = 480.0
    boxes: tuple[tuple[str, BBox], ...] = ()
    scripts: tuple[MotionSpec, ...] = ()
    gaze: GazeProgram = GazeProgram()
    commands: tuple[CommandSpec, ...] = ()
    method: str = "sticky"
    workspace: Optional[WorkspaceConfig] = None
    control: ControlConfig = ControlConfig()
    radius_expand: float = 0.10
    params: IntentParams = IntentParams()

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; valid: {', '.join(METHODS)}")
        if self.control.enabled and self.workspace is None:
            raise ValueError("control requires a workspace")

    def initial_scene(self) -> SceneFrame:
        visible = [(oid, b) for oid, b in self.boxes if self._appear_at(oid) <= 0]
        return SceneFrame.from_boxes(0, self.image_w, self.image_h, visible, self.radius_expand)

    def script_set(self, seed: Optional[int] = None) -> ScriptSet:
        specs = list(self.scripts)
        declared = {s.object_id for s in specs}
        specs += [MotionSpec(oid, "static") for oid, _ in self.boxes if oid not in declared]
        return ScriptSet(specs, self.seed if seed is None else seed, dict(self.boxes))

    def _appear_at(self, oid: str) -> int:
        for s in self.scripts:
            if s.object_id == oid:
                return s.appear_at
        return 0


@dataclass(frozen=True)
class Metrics:
    tracking_rate: Optional[float] = None
    selection_accuracy: Optional[float] = None
    min_samples: Optional[int] = None
    command_duration: Optional[float] = None
    task_duration: Optional[float] = None
    remaining_distance_at_command: Optional[float] = None

    def __post_init__(self) -> None:
        for name in ("tracking_rate", "selection_accuracy"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} out of [0, 1]: {v}")
        for name in ("command_duration", "task_duration", "remaining_distance_at_command"):
            v = getattr(self, name)
            if v is not None and v < 0.0:
                raise ValueError(f"{name} must be non-negative: {v}")


@dataclass
class FrameStep:
    index: int
    time_s: float
    scene: SceneFrame
    gaze: Point2
    gt_target: Optional[str]


@dataclass
class ScenarioResult:
    scenario: str
    method: str
    seed: int
    metrics: Metrics
    trace: list[dict]
    notices: list[str]


def _jittered(rng: np.random.Generator, base: tuple[float, float], prog: GazeProgram) -> Point2:
    jx, jy = rng.normal(0.0, prog.jitter_px, 2) if prog.jitter_px > 0 else (0.0, 0.0)
    x, y = base[0] + jx, base[1] + jy
    if rng.uniform() < prog.microsaccade_prob:
        amp = rng.uniform(*prog.microsaccade_px)
        ang = rng.uniform(0.0, 2.0 * math.pi)
        x += amp * math.cos(ang)
        y += amp * math.sin(ang)
    return Point2(x, y)


def simulate_frames(scenario: Scenario, seed: Optional[int] = None) -> list[FrameStep]:
    """Generate the paired scene/gaze stream for a scenario.

    Scene scripts and gaze noise consume independent seeded generators, so the
    scene trajectory is unaffected by gaze-program edits and vice versa.
    """
    run_seed = scenario.seed if seed is None else seed
    rng = np.random.default_rng([run_seed, 0xA2E])
    scripts = scenario.script_set(run_seed)
    scene = scenario.initial_scene()
    dt = 1.0 / scenario.gaze.rate_hz
    prog = scenario.gaze

    frames: list[FrameStep] = []
    gaze = Point2(scenario.image_w / 2.0, scenario.image_h / 2.0)
    prev_scene = scene
    index = 0

    def emit(point: Point2, gt: Optional[str]) -> None:
        nonlocal index, scene, prev_scene, gaze
        frames.append(FrameStep(index, index * dt, scene, point, gt))
        gaze = point
        prev_scene = scene
        scene = scripts.step(scene)
        index += 1

    for segment in prog.segments:
        if segment.kind == "fixate":
            for _ in range(segment.frames):
                base = scene.region_center(segment.target)
                emit(_jittered(rng, (base.x, base.y), prog), segment.target)
        elif segment.kind == "fixate_point":
            for _ in range(segment.frames):
                emit(_jittered(rng, segment.point, prog), None)
        elif segment.kind == "saccade":
            for _ in range(MAX_SACCADE_FRAMES):
                goal = scene.region_center(segment.target)
                gap = math.hypot(goal.x - gaze.x, goal.y - gaze.y)
                if gap <= prog.saccade_step_px:
                    emit(_jittered(rng, (goal.x, goal.y), prog), segment.target)
                    break
                scale = prog.saccade_step_px / gap
                step_to = (gaze.x + (goal.x - gaze.x) * scale, gaze.y + (goal.y - gaze.y) * scale)
                emit(_jittered(rng, step_to, prog), segment.target)
        else:  # pursuit: track the previous frame's target position with gain
            glance_left = 0
            glance_at: Optional[str] = None
            for _ in range(segment.frames):
                others = [oid for oid in scene.object_ids() if oid != segment.target]
                if glance_left == 0 and others and rng.uniform() < segment.glance_prob:
                    glance_left = segment.glance_frames
                    glance_at = others[int(rng.integers(len(others)))]
                if glance_left > 0 and glance_at in scene.object_ids():
                    base_pt = scene.region_center(glance_at)
                    base = (base_pt.x, base_pt.y)
                    glance_left -= 1
                else:
                    glance_left = 0
                    seen = prev_scene if frames else scene  # one-frame lag
                    goal = seen.region_center(segment.target)
                    base = (
                        gaze.x + prog.pursuit_gain * (goal.x - gaze.x),
                        gaze.y + prog.pursuit_gain * (goal.y - gaze.y),
                    )
                emit(_jittered(rng, base, prog), segment.target)
    return frames


def synthesize_gaze(scenario: Scenario, seed: Optional[int] = None) -> list[GazeSample]:
    """The gaze trace alone, as streamed samples."""
    return [GazeSample(f.time_s, f.gaze) for f in simulate_frames(scenario, seed)]


class _MethodState:
    """Per-frame intent readout for the selected method."""

    def __init__(self, method: str, params: IntentParams):
        self.method = method
        self.params = params
        self.field = empty_field()
        self.window: list[Point2] = []

    def step(self, sample: GazeSample, scene: SceneFrame) -> Optional[str]:
        if self.method == "sticky":
            self.field = update_field(self.field, sample, scene, self.params)
            return self.field.selected()
        self.window.append(sample.point)
        if self.method == "knn":
            return baseline_knn(sample.point, scene)
        if self.method == "fixation":
            return baseline_fixation(self.window, scene)
        return baseline_distribution(self.window, scene)

    def reset(self) -> None:
        self.field = self.field.reset()
        self.window.clear()


ORIENT_ALIGN_S = 1.0  # slerp duration toward the pre-grasp orientation


class _ControlLoop:
    """Effector + interaction ticking between gaze frames."""

    def __init__(self, scenario: Scenario, params: Optional[ControlParams] = None):
        ws = scenario.workspace
        assert ws is not None
        self.ws = ws
        self.cfg = scenario.control
        self.params = params or ControlParams()
        self.pre_grasp = ws.pre_grasp_map()
        self.pre_orient = {o.object_id: o.pre_grasp_orientation for o in ws.objects}
        self.topo: TopologyGraph = build_topology(ws.objects)
        self.state = InteractionState(home=ws.home)
        self.effector = EffectorState(ws.home)
        self.orientation = (1.0, 0.0, 0.0, 0.0)
        self.notices: list[str] = []
        self.plan: Optional[Plan] = None
        self.exec_left_s = 0.0
        self.virtual: Optional[tuple[float, float, float]] = None
        # metric probes
        self.command_at: Optional[float] = None
        self.commanded_target: Optional[str] = None
        self.remaining_at_command: Optional[float] = None
        self.task_done_at: Optional[float] = None

    def goal(self) -> Optional[tuple[float, float, float]]:
        if self.state.mode in (Mode.POST_COMMAND, Mode.SECOND_CANDIDATE):
            return self.pre_grasp.get(self.state.committed)
        if self.state.mode is Mode.RETURN_HOME:
            return self.state.home
        return None

    def _apply(self, result: StepResult, field: ConfidenceField) -> ConfidenceField:
        self.state = result.state
        self.notices.extend(result.notices)
        if result.reset_field:
            field = field.reset()
        return field

    def handle_command(self, spec: CommandSpec, now: float, field: ConfidenceField) -> ConfidenceField:
        if spec.kind == "command":
            kind = parse_command(spec.text)
            if kind is None:
                self.notices.append(f"unrecognized command {spec.text!r}")
                return field
            result = step_interaction(self.state, Event("command", command_kind=kind), field)
            field = self._apply(result, field)
            if self.state.mode is Mode.POST_COMMAND:
                self.command_at = now
                self.commanded_target = self.state.committed
                target = self.pre_grasp[self.state.committed]
                self.remaining_at_command = _dist3(self.effector.position, target)
            return field
        result = step_interaction(self.state, Event(spec.kind), field)
        field = self._apply(result, field)
        if spec.kind == "confirm" and self.state.mode is Mode.EXECUTING:
            field = self._start_execution(field)
        return field

    def _start_execution(self, field: ConfidenceField) -> ConfidenceField:
        committed = self.state.committed
        kind = self.state.pending_kind or "pick"
        try:
            self.plan = expand_plan(Primitive(kind), committed, self.topo, self.ws.free_slots)
        except PlanningError as exc:
            self.notices.append(f"planning failed: {exc}")
            self.plan = Plan((Primitive(kind, target=committed),))
        self.notices.extend(self.plan.warnings)
        self.exec_left_s = self.cfg.exec_step_s * len(self.plan.steps)
        return field

    def tick(self, now: float, dt: float, field: ConfidenceField) -> ConfidenceField:
        mode = self.state.mode
        if mode is Mode.PRE_COMMAND:
            self.virtual = virtual_target(field, self.pre_grasp, self.params.target_mode)
            if self.cfg.shared:
                v = pre_command_velocity(self.effector, field, self.pre_grasp, self.params)
            else:
                v = (0.0, 0.0, 0.0)
        elif mode in (Mode.POST_COMMAND, Mode.SECOND_CANDIDATE, Mode.RETURN_HOME):
            self.virtual = None
            v = post_command_velocity(self.effector, self.goal(), self.params)
        else:
            self.virtual = None
            v = (0.0, 0.0, 0.0)

        self.effector = integrate_effector(self.effector, v, dt, self.params.v_max, self.ws.z_floor)

        if mode is Mode.AWAIT_CONFIRM and self.state.committed in self.pre_orient:
            # position reached: align orientation toward the pre-grasp pose
            goal_q = self.pre_orient[self.state.committed]
            self.orientation = slerp(self.orientation, goal_q, min(1.0, dt / ORIENT_ALIGN_S))

        if mode is Mode.EXECUTING:
            self.exec_left_s -= dt
            if self.exec_left_s <= 0.0:
                self._finish_execution()
                field = self._apply(step_interaction(self.state, Event("arrived"), field), field)
                self.task_done_at = now
        else:
            goal = self.goal()
            if goal is not None and _dist3(self.effector.position, goal) < ARRIVE_DIST:
                field = self._apply(step_interaction(self.state, Event("arrived"), field), field)
        return field

    def _finish_execution(self) -> None:
        # execution re-parents the committed object: it no longer rests on
        # anything, and nothing rests on it
        if self.plan is not None and self.state.committed:
            self.topo = self.topo.without(self.state.committed)
        self.plan = None


def _dist3(a: Sequence[float], b: Sequence[float]) -> float:
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def run_scenario(
    scenario: Scenario,
    method: Optional[str] = None,
    seed: Optional[int] = None,
    params: Optional[IntentParams] = None,
    control_params: Optional[ControlParams] = None,
) -> ScenarioResult:
    """Execute one scenario and compute its metrics and full trace log."""
    method = method or scenario.method
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; valid: {', '.join(METHODS)}")
    run_seed = scenario.seed if seed is None else seed
    intent_params = params or scenario.params

    frames = simulate_frames(scenario, run_seed)
    state = _MethodState(method, intent_params)
    control = _ControlLoop(scenario, control_params) if scenario.control.enabled else None
    dt_frame = 1.0 / scenario.gaze.rate_hz
    ticks_per_frame = max(1, round(scenario.control.tick_hz / scenario.gaze.rate_hz))
    dt_tick = 1.0 / scenario.control.tick_hz

    pending = sorted(scenario.commands, key=lambda c: c.at_s)
    trace: list[dict] = []
    matches = 0
    scored = 0
    min_samples: Optional[int] = None
    first_sel: dict[str, float] = {}

    for f in frames:
        sample = GazeSample(f.time_s, f.gaze)
        selected = state.step(sample, f.scene)
        if selected is not None and selected not in first_sel:
            first_sel[selected] = f.time_s

        if f.gt_target is not None:
            if min_samples is None and selected == f.gt_target:
                min_samples = f.index + 1
            if f.index >= WARMUP_SAMPLES:
                scored += 1
                matches += int(selected == f.gt_target)

        if control is not None:
            for k in range(ticks_per_frame):
                now = f.time_s + k * dt_tick
                while pending and pending[0].at_s <= now + 1e-9:
                    spec = pending.pop(0)
                    state.field = control.handle_command(spec, now, state.field)
                state.field = control.tick(now, dt_tick, state.field)

        trace.append(_trace_record(f, state, control, selected))

    gt_frames = [f for f in frames if f.gt_target is not None]
    final_gt = gt_frames[-1].gt_target if gt_frames else None
    final_selected = None
    if frames:
        final_selected = trace[-1]["selected"]

    metrics = Metrics(
        tracking_rate=(matches / scored) if scored else None,
        selection_accuracy=(1.0 if final_selected == final_gt else 0.0) if final_gt else None,
        min_samples=min_samples,
        command_duration=_command_duration(control, first_sel),
        task_duration=_task_duration(control),
        remaining_distance_at_command=control.remaining_at_command if control else None,
    )
    return ScenarioResult(
        scenario=scenario.name,
        method=method,
        seed=run_seed,
        metrics=metrics,
        trace=trace,
        notices=list(control.notices) if control else [],
    )


def _command_duration(control: Optional[_ControlLoop], first_sel: dict[str, float]) -> Optional[float]:
    """Gaze-grounding effort: committed target first selected -> command."""
    if control is None or control.command_at is None:
        return None
    grounded = first_sel.get(control.commanded_target, control.command_at)
    return max(0.0, control.command_at - grounded)


def _task_duration(control: Optional[_ControlLoop]) -> Optional[float]:
    if control is None or control.command_at is None or control.task_done_at is None:
        return None
    return max(0.0, control.task_done_at - control.command_at)


def _trace_record(
    f: FrameStep,
    state: _MethodState,
    control: Optional[_ControlLoop],
    selected: Optional[str],
) -> dict:
    record: dict = {
        "t": f.index,
        "time_s": f.time_s,
        "gaze": [f.gaze.x, f.gaze.y],
        "gt": f.gt_target,
        "selected": selected,
    }
    if state.method == "sticky":
        record["confidences"] = {
            f"{oid}:{part}": c for (oid, part), c in state.field.entries
        }
        record["intent_set"] = list(state.field.intent_set)
    if control is not None:
        record["mode"] = control.state.mode.value
        record["committed"] = control.state.committed
        record["effector"] = list(control.effector.position)
        record["velocity"] = list(control.effector.velocity)
        record["virtual_target"] = list(control.virtual) if control.virtual else None
    return record


def replay_gaze(
    scenario: Scenario,
    samples: Sequence[GazeSample],
    method: Optional[str] = None,
    params: Optional[IntentParams] = None,
) -> list[dict]:
    """Feed a recorded gaze stream through a method over the scenario's scene
    scripts; returns the per-sample trace. Control is not ticked here: replay
    answers what the intent layer would have inferred, sample for sample.
    """
    method = method or scenario.method
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; valid: {', '.join(METHODS)}")
    state = _MethodState(method, params or scenario.params)
    scripts = scenario.script_set(scenario.seed)
    scene = scenario.initial_scene()
    trace = []
    for i, sample in enumerate(samples):
        selected = state.step(sample, scene)
        f = FrameStep(i, sample.t, scene, sample.point, None)
        trace.append(_trace_record(f, state, None, selected))
        scene = scripts.step(scene)
    return trace


def compare_methods(
    scenarios: Sequence[Scenario],
    methods: Sequence[str] = METHODS,
    seeds: Sequence[int] = tuple(range(10)),
) -> list[dict]:
    """Per-method aggregates (mean and sd over scenario x seed runs)."""
    rows: list[dict] = []
    for method in methods:
        tracking: list[float] = []
        selection: list[float] = []
        samples: list[int] = []
        for scenario in scenarios:
            for seed in seeds:
                result = run_scenario(scenario, method=method, seed=seed)
                m = result.metrics
                if m.tracking_rate is not None:
                    tracking.append(m.tracking_rate)
                if m.selection_accuracy is not None:
                    selection.append(m.selection_accuracy)
                if m.min_samples is not None:
                    samples.append(m.min_samples)
        rows.append(
            {
                "method": method,
                "runs": len(scenarios) * len(seeds),
                "tracking_rate_mean": mean(tracking) if tracking else None,
                "tracking_rate_sd": pstdev(tracking) if len(tracking) > 1 else 0.0 if tracking else None,
                "selection_accuracy_mean": mean(selection) if selection else None,
                "min_samples_mean": mean(samples) if samples else None,
            }
        )
    return rows
