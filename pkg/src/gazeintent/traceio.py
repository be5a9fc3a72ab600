"""File formats: flat key=value params, JSON scenario files (.scn),
line-delimited JSON traces (.jsonl), and CSV reports.

Every format carries an explicit schema_version so golden files stay
diffable across releases. Floats round-trip exactly through JSON (shortest
repr), which is what makes bit-exact replay checks possible.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from gazeintent.alignment import CameraPose
from gazeintent.control import ControlParams
from gazeintent.harness import (
    CommandSpec,
    ControlConfig,
    GazeProgram,
    GazeSegment,
    Scenario,
    WorkspaceConfig,
)
from gazeintent.intent import IntentParams
from gazeintent.scene import BBox, MotionSpec, WorkspaceObject

SCHEMA_VERSION = 1
PARAMS_ENV_VAR = "GAZEINTENT_PARAMS"


class ValidationError(ValueError):
    """Malformed or out-of-contract input file."""


@dataclass(frozen=True)
class ParamsFile:
    """Engine-wide tunables, one flat file."""

    dt: float = 0.3
    c_min: float = 0.3
    tau_px: float = 50.0
    radius_expand: float = 0.10
    v_max: float = 0.10
    delta_r: float = 0.05
    target_mode: str = "normalized"
    decay_enabled: bool = False

    def __post_init__(self) -> None:
        # bounds are owned by the consuming modules
        self.intent_params()
        self.control_params()
        if self.radius_expand < 0.0:
            raise ValidationError("radius_expand must be non-negative")

    def intent_params(self) -> IntentParams:
        try:
            return IntentParams(self.dt, self.c_min, self.tau_px, self.decay_enabled)
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc

    def control_params(self) -> ControlParams:
        try:
            return ControlParams(self.v_max, self.delta_r, self.target_mode)
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc


_PARAMS_FIELDS = ("dt", "c_min", "tau_px", "radius_expand", "v_max", "delta_r",
                  "target_mode", "decay_enabled")


def serialize_params(params: ParamsFile) -> str:
    lines = [f"schema_version = {SCHEMA_VERSION}"]
    for name in _PARAMS_FIELDS:
        value = getattr(params, name)
        if isinstance(value, bool):
            lines.append(f"{name} = {'true' if value else 'false'}")
        elif isinstance(value, str):
            lines.append(f'{name} = "{value}"')
        else:
            lines.append(f"{name} = {value!r}")
    return "\n".join(lines) + "\n"


def parse_params(text: str) -> ParamsFile:
    """Parse the flat key = value format; unknown keys are rejected."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"line {lineno}: expected 'key = value'")
        key, _, rhs = line.partition("=")
        key = key.strip()
        rhs = rhs.strip()
        if key == "schema_version":
            if rhs != str(SCHEMA_VERSION):
                raise ValidationError(f"unsupported params schema_version {rhs}")
            continue
        if key not in _PARAMS_FIELDS:
            raise ValidationError(f"line {lineno}: unknown key {key!r}")
        values[key] = _parse_scalar(rhs, lineno)
    try:
        return ParamsFile(**values)
    except TypeError as exc:
        raise ValidationError(str(exc)) from exc


def _parse_scalar(rhs: str, lineno: int):
    if rhs in ("true", "false"):
        return rhs == "true"
    if len(rhs) >= 2 and rhs[0] == '"' and rhs[-1] == '"':
        return rhs[1:-1]
    try:
        return int(rhs)
    except ValueError:
        pass
    try:
        return float(rhs)
    except ValueError:
        raise ValidationError(f"line {lineno}: cannot parse value {rhs!r}") from None


def load_params(path: Optional[str] = None) -> ParamsFile:
    """Load params from path, the PARAMS env var, or built-in defaults."""
    if path is None:
        path = os.environ.get(PARAMS_ENV_VAR)
    if path is None:
        return ParamsFile()
    try:
        return parse_params(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read params file {path}: {exc}") from exc


# --- scenario files (.scn, JSON) -------------------------------------------

def scenario_to_dict(s: Scenario) -> dict:
    doc: dict = {
        "schema_version": SCHEMA_VERSION,
        "name": s.name,
        "seed": s.seed,
        "image": {"w": s.image_w, "h": s.image_h},
        "radius_expand": s.radius_expand,
        "method": s.method,
        "boxes": [
            {"id": oid, "x": b.x, "y": b.y, "w": b.w, "h": b.h} for oid, b in s.boxes
        ],
        "scripts": [_script_to_dict(spec) for spec in s.scripts],
        "gaze": {
            "rate_hz": s.gaze.rate_hz,
            "jitter_px": s.gaze.jitter_px,
            "microsaccade_prob": s.gaze.microsaccade_prob,
            "microsaccade_px": list(s.gaze.microsaccade_px),
            "saccade_step_px": s.gaze.saccade_step_px,
            "pursuit_gain": s.gaze.pursuit_gain,
            "segments": [_segment_to_dict(seg) for seg in s.gaze.segments],
        },
        "commands": [{"at_s": c.at_s, "kind": c.kind, "text": c.text} for c in s.commands],
        "control": {
            "enabled": s.control.enabled,
            "tick_hz": s.control.tick_hz,
            "exec_step_s": s.control.exec_step_s,
            "shared": s.control.shared,
        },
        "params": {
            "dt": s.params.dt,
            "c_min": s.params.c_min,
            "tau_px": s.params.tau_px,
            "decay_enabled": s.params.decay_enabled,
        },
    }
    if s.workspace is not None:
        doc["workspace"] = _workspace_to_dict(s.workspace)
    return doc


def _script_to_dict(spec: MotionSpec) -> dict:
    d: dict = {"id": spec.object_id, "kind": spec.kind}
    if spec.kind == "velocity":
        d["velocity"] = list(spec.velocity)
    if spec.kind == "waypoints":
        d["waypoints"] = [list(p) for p in spec.waypoints]
        d["speed"] = spec.speed
    if spec.kind == "random_walk":
        d["speed"] = spec.speed
        d["turn_sigma"] = spec.turn_sigma
    if spec.appear_at:
        d["appear_at"] = spec.appear_at
    return d


def _segment_to_dict(seg: GazeSegment) -> dict:
    d: dict = {"kind": seg.kind}
    if seg.target is not None:
        d["target"] = seg.target
    if seg.point is not None:
        d["point"] = list(seg.point)
    if seg.frames:
        d["frames"] = seg.frames
    if seg.glance_prob:
        d["glance_prob"] = seg.glance_prob
        d["glance_frames"] = seg.glance_frames
    return d


def _workspace_to_dict(ws: WorkspaceConfig) -> dict:
    d: dict = {
        "home": list(ws.home),
        "z_floor": ws.z_floor,
        "free_slots": [list(p) for p in ws.free_slots],
        "objects": [
            {
                "id": o.object_id,
                "label": o.label,
                "position": list(o.position),
                "pre_grasp": {
                    "position": list(o.pre_grasp_position),
                    "orientation": list(o.pre_grasp_orientation),
                },
                "footprint": [list(p) for p in o.footprint],
                "z_extent": list(o.z_extent),
                "surface_points": [list(p) for p in o.surface_points],
            }
            for o in ws.objects
        ],
    }
    if ws.camera is not None:
        cam: CameraPose = ws.camera
        d["camera"] = {
            "rotation": list(cam.rotation),
            "translation": list(cam.translation),
            "intrinsics": list(cam.intrinsics),
        }
    return d


def scenario_from_dict(doc: dict) -> Scenario:
    try:
        version = doc["schema_version"]
        if version != SCHEMA_VERSION:
            raise ValidationError(f"unsupported scenario schema_version {version}")
        gaze_doc = doc.get("gaze", {})
        segments = tuple(
            GazeSegment(
                kind=seg["kind"],
                target=seg.get("target"),
                point=tuple(seg["point"]) if "point" in seg else None,
                frames=seg.get("frames", 0),
                glance_prob=seg.get("glance_prob", 0.0),
                glance_frames=seg.get("glance_frames", 1),
            )
            for seg in gaze_doc.get("segments", [])
        )
        gaze = GazeProgram(
            rate_hz=gaze_doc.get("rate_hz", 10.0),
            jitter_px=gaze_doc.get("jitter_px", 8.0),
            microsaccade_prob=gaze_doc.get("microsaccade_prob", 0.1),
            microsaccade_px=tuple(gaze_doc.get("microsaccade_px", (15.0, 45.0))),
            saccade_step_px=gaze_doc.get("saccade_step_px", 120.0),
            pursuit_gain=gaze_doc.get("pursuit_gain", 0.8),
            segments=segments,
        )
        control_doc = doc.get("control", {})
        control = ControlConfig(
            enabled=control_doc.get("enabled", False),
            tick_hz=control_doc.get("tick_hz", 20.0),
            exec_step_s=control_doc.get("exec_step_s", 1.0),
            shared=control_doc.get("shared", True),
        )
        params_doc = doc.get("params", {})
        params = IntentParams(
            dt=params_doc.get("dt", 0.3),
            c_min=params_doc.get("c_min", 0.3),
            tau_px=params_doc.get("tau_px", 50.0),
            decay_enabled=params_doc.get("decay_enabled", False),
        )
        workspace = _workspace_from_dict(doc["workspace"]) if "workspace" in doc else None
        return Scenario(
            name=doc["name"],
            seed=doc.get("seed", 0),
            image_w=doc["image"]["w"],
            image_h=doc["image"]["h"],
            boxes=tuple(
                (b["id"], BBox(b["x"], b["y"], b["w"], b["h"])) for b in doc.get("boxes", [])
            ),
            scripts=tuple(_script_from_dict(s) for s in doc.get("scripts", [])),
            gaze=gaze,
            commands=tuple(
                CommandSpec(c["at_s"], c["kind"], c.get("text", "")) for c in doc.get("commands", [])
            ),
            method=doc.get("method", "sticky"),
            workspace=workspace,
            control=control,
            radius_expand=doc.get("radius_expand", 0.10),
            params=params,
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed scenario: {exc}") from exc


def _script_from_dict(d: dict) -> MotionSpec:
    return MotionSpec(
        object_id=d["id"],
        kind=d["kind"],
        velocity=tuple(d.get("velocity", (0.0, 0.0))),
        waypoints=tuple(tuple(p) for p in d.get("waypoints", ())),
        speed=d.get("speed", 0.0),
        turn_sigma=d.get("turn_sigma", 0.5),
        appear_at=d.get("appear_at", 0),
    )


def _workspace_from_dict(d: dict) -> WorkspaceConfig:
    objects = tuple(
        WorkspaceObject(
            object_id=o["id"],
            label=o.get("label", o["id"]),
            position=tuple(o["position"]),
            pre_grasp_position=tuple(o["pre_grasp"]["position"]),
            pre_grasp_orientation=tuple(o["pre_grasp"]["orientation"]),
            footprint=tuple(tuple(p) for p in o["footprint"]),
            z_extent=tuple(o["z_extent"]),
            surface_points=tuple(tuple(p) for p in o.get("surface_points", ())),
        )
        for o in d.get("objects", [])
    )
    camera = None
    if "camera" in d:
        c = d["camera"]
        camera = CameraPose(
            rotation=tuple(c["rotation"]),
            translation=tuple(c["translation"]),
            intrinsics=tuple(c["intrinsics"]),
        )
    return WorkspaceConfig(
        home=tuple(d["home"]),
        z_floor=d.get("z_floor", 0.0),
        free_slots=tuple(tuple(p) for p in d.get("free_slots", ())),
        objects=objects,
        camera=camera,
    )


def serialize_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2, sort_keys=False) + "\n"


def parse_scenario(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"scenario is not valid JSON: {exc}") from exc
    return scenario_from_dict(doc)


def load_scenario(path: str) -> Scenario:
    try:
        return parse_scenario(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read scenario {path}: {exc}") from exc


# --- traces and gaze recordings (.jsonl) ------------------------------------

def dump_trace(records: Sequence[dict], kind: str = "trace") -> str:
    header = {"schema_version": SCHEMA_VERSION, "kind": kind}
    lines = [json.dumps(header, sort_keys=True)]
    lines += [json.dumps(r, sort_keys=True) for r in records]
    return "\n".join(lines) + "\n"


def parse_trace(text: str, kind: str = "trace") -> list[dict]:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ValidationError("empty trace file")
    header = json.loads(lines[0])
    if header.get("schema_version") != SCHEMA_VERSION or header.get("kind") != kind:
        raise ValidationError(f"unexpected trace header {header}")
    return [json.loads(line) for line in lines[1:]]


def write_trace(records: Sequence[dict], path: str, kind: str = "trace") -> None:
    Path(path).write_text(dump_trace(records, kind))


def read_trace(path: str, kind: str = "trace") -> list[dict]:
    try:
        return parse_trace(Path(path).read_text(), kind)
    except OSError as exc:
        raise ValidationError(f"cannot read trace {path}: {exc}") from exc


def gaze_records(samples) -> list[dict]:
    return [{"t": s.t, "x": s.point.x, "y": s.point.y} for s in samples]


# --- CSV reports -------------------------------------------------------------

def rows_to_csv(rows: Sequence[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def write_csv(rows: Sequence[dict], path: str) -> None:
    Path(path).write_text(rows_to_csv(rows))
