"""Live session service over TCP: newline-delimited JSON messages in both
directions, a 20 Hz engine tick with snapshot broadcast, gaze coalescing to
the 10 Hz intent rate, and cross-view alignment at session open and whenever
new objects appear.

The engine core (SessionEngine) is synchronous and deterministic; the server
wraps it with per-session locking, so a recorded gaze stream pushed through a
live session reproduces the offline replay of the same trace.
"""

from __future__ import annotations

import json
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from gazeintent.alignment import NormBox, match_objects, project_object
from gazeintent.geometry import Point2
from gazeintent.harness import CommandSpec, Scenario, _ControlLoop
from gazeintent.intent import GazeSample, empty_field, update_field
from gazeintent.planner import parse_command
from gazeintent.traceio import ParamsFile

PROTOCOL_VERSION = 1
HEARTBEAT_S = 5.0
RECONNECT_WINDOW_S = 30.0


class SessionEngine:
    """One session's deterministic core: scene, field, control, alignment."""

    def __init__(self, scenario: Scenario, params: Optional[ParamsFile] = None):
        params = params or ParamsFile()
        self.scenario = scenario
        self.intent_params = params.intent_params()
        self.tick_hz = scenario.control.tick_hz
        self.gaze_hz = scenario.gaze.rate_hz
        self.ticks_per_frame = max(1, round(self.tick_hz / self.gaze_hz))
        # live sessions are driven by the client, not the scenario's command
        # schedule, so scheduled commands are ignored here
        self.field = empty_field()
        self.scene = scenario.initial_scene()
        self.scripts = scenario.script_set()
        self.control = (
            _ControlLoop(scenario, params.control_params())
            if scenario.control.enabled and scenario.workspace is not None
            else None
        )
        self.tick_index = 0
        self.pending_gaze: list[GazeSample] = []
        self.coalesced = 0
        self.notices: list[str] = []
        self.alignment = None
        self._aligned_ids: set[str] = set()
        self._align()

    # -- alignment ------------------------------------------------------------

    def _align(self) -> None:
        ws = self.scenario.workspace
        self._aligned_ids = set(self.scene.object_ids())
        if ws is None or ws.camera is None or not ws.objects:
            return
        image = (self.scenario.image_w, self.scenario.image_h)
        projected: list[NormBox] = []
        projected_ids: list[str] = []
        for obj in ws.objects:
            box = project_object(obj, ws.camera, image)
            if box is not None:
                projected.append(box)
                projected_ids.append(obj.object_id)
        detected: list[NormBox] = []
        detected_ids: list[str] = []
        for oid, b in self.scene.boxes:
            detected.append(
                NormBox(
                    cx=(b.x + b.w / 2.0) / image[0],
                    cy=(b.y + b.h / 2.0) / image[1],
                    w=b.w / image[0],
                    h=b.h / image[1],
                )
            )
            detected_ids.append(oid)
        result = match_objects(projected, detected)
        self.alignment = {
            "pairs": [[m, n] for m, n in result.pairs],
            "projected_ids": projected_ids,
            "detected_ids": detected_ids,
            "mapping": {projected_ids[m]: detected_ids[n] for m, n in result.pairs},
            "total_cost": result.total_cost,
            "failed": not result.pairs,
        }
        if not result.pairs:
            self.notices.append("alignment failed: confirmation required before execution")

    # -- client events ----------------------------------------------------------

    def apply_gaze(self, t: float, x: float, y: float) -> None:
        self.pending_gaze.append(GazeSample(t, Point2(x, y)))

    def apply_command(self, text: str) -> None:
        if self.control is None:
            self.notices.append("no workspace: commands are ignored")
            return
        if parse_command(text) is None:
            self.notices.append(f"unrecognized command {text!r}")
            return
        now = self.tick_index / self.tick_hz
        self.field = self.control.handle_command(CommandSpec(now, "command", text), now, self.field)
        self._drain_control_notices()

    def apply_confirm(self) -> None:
        self._apply_simple("confirm")

    def apply_reject(self) -> None:
        self._apply_simple("reject")

    def _apply_simple(self, kind: str) -> None:
        if self.control is None:
            self.notices.append(f"no workspace: {kind} ignored")
            return
        now = self.tick_index / self.tick_hz
        self.field = self.control.handle_command(CommandSpec(now, kind), now, self.field)
        self._drain_control_notices()

    def _drain_control_notices(self) -> None:
        if self.control is not None and self.control.notices:
            self.notices.extend(self.control.notices)
            self.control.notices.clear()

    # -- ticking ---------------------------------------------------------------

    def tick(self) -> dict:
        """Advance one engine tick and return the snapshot.

        Gaze is consumed only on 10 Hz frame boundaries; bursts between
        boundaries coalesce to the most recent sample. The scene advances at
        the gaze rate so online updates see exactly the frames a replay would.
        """
        frame_start = self.tick_index % self.ticks_per_frame == 0
        if frame_start and self.pending_gaze:
            if len(self.pending_gaze) > 1:
                self.coalesced += len(self.pending_gaze) - 1
                self.notices.append(
                    f"coalesced {len(self.pending_gaze) - 1} excess gaze samples to 10/s"
                )
            sample = self.pending_gaze[-1]
            self.pending_gaze.clear()
            self.field = update_field(self.field, sample, self.scene, self.intent_params)

        if self.control is not None:
            now = self.tick_index / self.tick_hz
            self.field = self.control.tick(now, 1.0 / self.tick_hz, self.field)
            self._drain_control_notices()

        snapshot = self.snapshot()

        if self.tick_index % self.ticks_per_frame == self.ticks_per_frame - 1:
            self.scene = self.scripts.step(self.scene)
            if set(self.scene.object_ids()) - self._aligned_ids:
                new_ids = sorted(set(self.scene.object_ids()) - self._aligned_ids)
                self._align()
                self.notices.append(f"re-aligned after new objects: {', '.join(new_ids)}")
        self.tick_index += 1
        return snapshot

    def snapshot(self) -> dict:
        snap: dict = {
            "tick": self.tick_index,
            "time_s": self.tick_index / self.tick_hz,
            "confidences": self.field.object_confidences(),
            "slots": {f"{oid}:{part}": c for (oid, part), c in self.field.entries},
            "intent_set": list(self.field.intent_set),
            "selected": self.field.selected(),
            "regions": _region_list(self.scene),
            "mode": None,
            "committed": None,
            "effector": None,
            "velocity": None,
            "virtual_target": None,
        }
        if self.control is not None:
            snap["mode"] = self.control.state.mode.value
            snap["committed"] = self.control.state.committed
            snap["effector"] = list(self.control.effector.position)
            snap["velocity"] = list(self.control.effector.velocity)
            snap["virtual_target"] = (
                list(self.control.virtual) if self.control.virtual else None
            )
        return snap

    def drain_notices(self) -> list[str]:
        out = self.notices
        self.notices = []
        return out

    def scene_init(self) -> dict:
        ws = self.scenario.workspace
        doc: dict = {
            "image": {"w": self.scenario.image_w, "h": self.scenario.image_h},
            "regions": _region_list(self.scene),
            "alignment": self.alignment,
            "objects": [],
            "topology": [],
            "home": None,
        }
        if ws is not None:
            doc["objects"] = [
                {
                    "id": o.object_id,
                    "label": o.label,
                    "position": list(o.position),
                    "pre_grasp": list(o.pre_grasp_position),
                }
                for o in ws.objects
            ]
            doc["home"] = list(ws.home)
            if self.control is not None:
                doc["topology"] = [list(e) for e in self.control.topo.edges]
        return doc


def _region_list(scene) -> list[dict]:
    return [
        {
            "id": r.object_id,
            "part": r.part_index,
            "cx": r.circle.center.x,
            "cy": r.circle.center.y,
            "r": r.circle.radius,
        }
        for r in scene.regions
    ]


@dataclass
class _Session:
    session_id: str
    engine: SessionEngine
    lock: threading.Lock = field(default_factory=threading.Lock)
    conn: Optional[socket.socket] = None
    in_seq: int = 0
    out_seq: int = 0
    last_seen: float = field(default_factory=time.monotonic)
    last_heartbeat: float = field(default_factory=time.monotonic)
    closed: bool = False


class SessionServer:
    """TCP front end: one scenario template, many independent sessions."""

    def __init__(self, scenario: Scenario, params: Optional[ParamsFile] = None,
                 host: str = "127.0.0.1", port: int = 0):
        self.scenario = scenario
        self.params = params or ParamsFile()
        self.host = host
        self.port = port
        self._sessions: dict[str, _Session] = {}
        self._next_id = 0
        self._lock = threading.Lock()
        self._running = False
        self._sock: Optional[socket.socket] = None
        self._threads: list[threading.Thread] = []

    def start(self) -> None:
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((self.host, self.port))
        self.port = self._sock.getsockname()[1]
        self._sock.listen(8)
        self._sock.settimeout(0.2)
        self._running = True
        for target in (self._accept_loop, self._tick_loop):
            thread = threading.Thread(target=target, daemon=True)
            thread.start()
            self._threads.append(thread)

    def stop(self) -> None:
        self._running = False
        for thread in self._threads:
            thread.join(timeout=2.0)
        if self._sock is not None:
            self._sock.close()
        with self._lock:
            for session in self._sessions.values():
                if session.conn is not None:
                    session.conn.close()

    def wait(self) -> None:
        while self._running:
            time.sleep(0.2)

    # -- accept / read ----------------------------------------------------------

    def _accept_loop(self) -> None:
        while self._running:
            try:
                conn, _ = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            thread = threading.Thread(target=self._reader, args=(conn,), daemon=True)
            thread.start()

    def _reader(self, conn: socket.socket) -> None:
        io = conn.makefile("r", encoding="utf-8", newline="\n")
        session: Optional[_Session] = None
        try:
            for line in io:
                line = line.strip()
                if not line:
                    continue
                try:
                    msg = json.loads(line)
                except json.JSONDecodeError:
                    _send(conn, {"type": "error", "seq": 0, "text": "malformed JSON"})
                    continue
                if session is None:
                    session = self._handle_hello(conn, msg)
                    if session is None:
                        return
                else:
                    self._dispatch(session, msg)
        except (OSError, ValueError):
            pass
        finally:
            if session is not None:
                with session.lock:
                    if session.conn is conn:
                        session.conn = None  # keep the session for reconnect
                        session.last_seen = time.monotonic()
            conn.close()

    def _handle_hello(self, conn: socket.socket, msg: dict) -> Optional[_Session]:
        if msg.get("type") != "hello":
            _send(conn, {"type": "error", "seq": 0, "text": "expected hello"})
            return None
        if msg.get("version") != PROTOCOL_VERSION:
            _send(conn, {"type": "error", "seq": 0,
                         "text": f"unsupported protocol version {msg.get('version')}"})
            return None
        wanted = msg.get("session")
        with self._lock:
            if wanted and wanted in self._sessions:
                session = self._sessions[wanted]
            else:
                self._next_id += 1
                sid = f"s{self._next_id}"
                try:
                    engine = SessionEngine(self.scenario, self.params)
                except ValueError as exc:
                    _send(conn, {"type": "error", "seq": 0, "text": f"invalid workspace: {exc}"})
                    return None
                session = _Session(session_id=sid, engine=engine)
                self._sessions[sid] = session
        with session.lock:
            session.conn = conn
            session.last_seen = time.monotonic()
            session.in_seq = msg.get("seq", 0)
            self._emit(session, {"type": "hello", "version": PROTOCOL_VERSION,
                                 "session": session.session_id})
            self._emit(session, {"type": "scene_init", **session.engine.scene_init()})
        return session

    def _dispatch(self, session: _Session, msg: dict) -> None:
        with session.lock:
            session.last_seen = time.monotonic()
            seq = msg.get("seq")
            if not isinstance(seq, int) or seq <= session.in_seq:
                self._emit(session, {
                    "type": "error",
                    "text": f"out-of-order seq {seq!r} (last was {session.in_seq})",
                })
                return
            session.in_seq = seq
            engine = session.engine
            kind = msg.get("type")
            if kind == "gaze":
                try:
                    engine.apply_gaze(float(msg["t"]), float(msg["x"]), float(msg["y"]))
                except (KeyError, TypeError, ValueError):
                    self._emit(session, {"type": "error", "text": "malformed gaze message"})
            elif kind == "command":
                engine.apply_command(str(msg.get("text", "")))
            elif kind == "confirm":
                engine.apply_confirm()
            elif kind == "reject":
                engine.apply_reject()
            else:
                self._emit(session, {"type": "error", "text": f"unknown message type {kind!r}"})

    # -- tick / broadcast --------------------------------------------------------

    def _tick_loop(self) -> None:
        period = 1.0 / self.scenario.control.tick_hz
        next_tick = time.monotonic()
        while self._running:
            now = time.monotonic()
            if now < next_tick:
                time.sleep(min(period, next_tick - now))
                continue
            next_tick += period
            stale: list[str] = []
            with self._lock:
                sessions = list(self._sessions.values())
            for session in sessions:
                with session.lock:
                    if session.closed:
                        continue
                    snapshot = session.engine.tick()
                    if session.conn is None:
                        if time.monotonic() - session.last_seen > RECONNECT_WINDOW_S:
                            session.closed = True
                            stale.append(session.session_id)
                        continue
                    for text in session.engine.drain_notices():
                        self._emit(session, {"type": "notice", "text": text})
                    if session.engine.control is not None:
                        plan = session.engine.control.plan
                        if plan is not None and not getattr(session, "_plan_sent", False):
                            session._plan_sent = True
                            self._emit(session, {
                                "type": "plan",
                                "steps": [{"kind": s.kind, "target": s.target} for s in plan.steps],
                            })
                        elif plan is None:
                            session._plan_sent = False
                    self._emit(session, {"type": "snapshot", **snapshot})
                    if time.monotonic() - session.last_heartbeat >= HEARTBEAT_S:
                        session.last_heartbeat = time.monotonic()
                        self._emit(session, {"type": "notice", "text": "heartbeat"})
            if stale:
                with self._lock:
                    for sid in stale:
                        self._sessions.pop(sid, None)

    def _emit(self, session: _Session, msg: dict) -> None:
        if session.conn is None:
            return
        session.out_seq += 1
        msg = {**msg, "seq": session.out_seq, "session": session.session_id}
        try:
            _send(session.conn, msg)
        except OSError:
            session.conn = None
            session.last_seen = time.monotonic()


def _send(conn: socket.socket, msg: dict) -> None:
    conn.sendall((json.dumps(msg) + "\n").encode("utf-8"))
