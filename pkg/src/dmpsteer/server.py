"""Live session server for the browser operator UI.

One authoritative control thread owns the session and paces it against the
wall clock.  Network ingress lands in a latest-value input mailbox (writers
replace, the loop snapshots once per tick; late or duplicate client frames
resolve latest-timestamp-wins).  Egress is a decimated state stream, one
versioned JSON document per WebSocket text frame:

    server -> client   {"type": "hello" | "state" | "history" | "end" | "error", "v": 1, ...}
    client -> server   {"type": "input", "v": 1, "t_client": s, "u": [x, y, z], "overrides": {}}
                       {"type": "history_req", "v": 1}

On disconnect of the last client the mailbox zeroes, so the correction
decays to nothing through the correction filter.
"""

from __future__ import annotations

import asyncio
import json
import threading
import time
from collections import deque
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .plan import HYBRID_SURFACE
from .scenario import Scenario
from .session import Session, session_metrics
from .trace import Trace

WIRE_VERSION = 1
STREAM_HZ = 60.0
HISTORY_CAP = 2400


class InputMailbox:
    """Latest-value mailbox between network ingress and the control thread."""

    def __init__(self):
        self._lock = threading.Lock()
        self._t_client = -float("inf")
        self._u = np.zeros(3)
        self._overrides: dict = {}

    def offer(self, t_client: float, u, overrides=None) -> bool:
        u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
        if u.shape != (3,):
            raise ValueError("input u must be a 3-vector")
        with self._lock:
            if t_client < self._t_client:
                return False  # stale frame: latest-timestamp-wins
            self._t_client = t_client
            self._u = u
            self._overrides = dict(overrides or {})
            return True

    def snapshot(self) -> np.ndarray:
        with self._lock:
            return self._u.copy()

    def zero(self):
        with self._lock:
            self._u = np.zeros(3)
            self._overrides = {}


class LiveSession:
    """Paced session execution plus fan-out to websocket subscribers."""

    def __init__(
        self,
        scenario: Scenario,
        dt: float | None = None,
        record_path: str | None = None,
        pace: float = 1.0,
        max_time: float | None = None,
    ):
        self.scenario = scenario
        self.mailbox = InputMailbox()
        self.session = Session(scenario, user=lambda _ctx: self.mailbox.snapshot(), dt=dt, max_time=max_time)
        self.record_path = record_path
        self.pace = float(pace)
        self.stride = max(1, round(1.0 / (STREAM_HZ * self.session.dt)))
        self.history: deque = deque(maxlen=HISTORY_CAP)
        self.subscribers: set[asyncio.Queue] = set()
        self.clients = 0
        self.loop: asyncio.AbstractEventLoop | None = None
        self.trace: Trace | None = None
        self.end_message: dict | None = None
        self._thread: threading.Thread | None = None
        self._hello_scene = self._build_scene()

    # -- scene description for the UI ----------------------------------------

    def _build_scene(self) -> dict:
        scene: dict = {"surfaces": [], "markers": [], "nominal_paths": []}
        for sid, surf in self.scenario.surfaces.items():
            edge = []
            for u, v in (
                [(t, 0.0) for t in np.linspace(0, 1, 12)]
                + [(1.0, t) for t in np.linspace(0, 1, 12)]
                + [(t, 1.0) for t in np.linspace(1, 0, 12)]
                + [(0.0, t) for t in np.linspace(1, 0, 12)]
            ):
                edge.append([float(c) for c in surf.eval(float(u), float(v))])
            scene["surfaces"].append({"id": sid, "outline": edge})
        for inj in self.scenario.injections:
            if inj.kind == "defect_region" and inj.region:
                surf_id = next(
                    (s.surface_id for s in self.scenario.segments if s.id == inj.segment_id and s.surface_id),
                    None,
                )
                if surf_id:
                    surf = self.scenario.surfaces[surf_id]
                    u0, u1, v0, v1 = inj.region
                    corners = [
                        [float(c) for c in surf.eval(u, v)]
                        for u, v in ((u0, v0), (u1, v0), (u1, v1), (u0, v1))
                    ]
                    scene["markers"].append({"kind": "defect", "polygon": corners})
            elif inj.kind == "registration_offset":
                target = self.scenario.success.get("targets", {}).get(inj.segment_id)
                if target is not None:
                    true_pt = [float(a + b) for a, b in zip(target, inj.offset)]
                    scene["markers"].append({"kind": "target", "point": true_pt})
        plan = self.session.plan
        for seg in plan.segments:
            ref = plan.nominal_refs[seg.id]
            pts = []
            step = max(1, len(ref.x) // 60)
            for row in ref.x[::step]:
                if seg.mode == HYBRID_SURFACE:
                    p = plan.surfaces[seg.surface_id].eval(row[0], row[1])
                else:
                    p = row
                pts.append([float(c) for c in p])
            scene["nominal_paths"].append({"segment": seg.id, "points": pts})
        return scene

    def hello(self) -> dict:
        return {
            "type": "hello",
            "v": WIRE_VERSION,
            "scenario": self.scenario.name,
            "dt": self.session.dt,
            "pace": self.pace,
            "device_range_m": self.scenario.device_range_m,
            "segments": self.session.builder.header["segments"],
            "scene": self._hello_scene,
        }

    # -- control thread -------------------------------------------------------

    def start(self):
        self._thread = threading.Thread(target=self._run, name="session-loop", daemon=True)
        self._thread.start()

    def _run(self):
        session = self.session
        wall0 = time.perf_counter()
        while not session.done:
            target = (time.perf_counter() - wall0) * self.pace
            while not session.done and session.t <= target:
                snap = session.tick_once()
                if snap is not None and session.tick % self.stride == 0:
                    self._publish(snap)
            time.sleep(0.002)
        self.trace = session.finish()
        if self.record_path:
            self.trace.save(self.record_path)
        metrics = session_metrics(self.trace, session)
        self.end_message = {
            "type": "end",
            "v": WIRE_VERSION,
            "reason": session.end_reason,
            "t_total": metrics.t_total,
            "t_input": metrics.t_input_corrective,
        }
        self._publish(self.end_message)

    def wait(self, timeout: float | None = None):
        if self._thread is not None:
            self._thread.join(timeout)

    def _publish(self, msg: dict):
        self.history.append(msg)
        loop = self.loop
        if loop is not None and not loop.is_closed():
            loop.call_soon_threadsafe(self._fanout, msg)

    def _fanout(self, msg: dict):
        for q in list(self.subscribers):
            if q.full():
                try:
                    q.get_nowait()  # drop oldest; UI wants the latest
                except asyncio.QueueEmpty:
                    pass
            q.put_nowait(msg)


def _error_frame(msg: str) -> str:
    return json.dumps({"type": "error", "v": WIRE_VERSION, "msg": msg})


def create_app(live: LiveSession, ui_dir: str | None = None) -> FastAPI:
    from contextlib import asynccontextmanager

    @asynccontextmanager
    async def lifespan(_app):
        live.loop = asyncio.get_running_loop()
        live.start()
        yield

    app = FastAPI(title="dmpsteer live session", lifespan=lifespan)

    @app.get("/meta")
    async def meta():
        return JSONResponse(
            {
                "wire_version": WIRE_VERSION,
                "scenario": live.scenario.name,
                "dt": live.session.dt,
                "running": not live.session.done,
            }
        )

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        q: asyncio.Queue = asyncio.Queue(maxsize=240)
        live.subscribers.add(q)
        live.clients += 1
        await ws.send_text(json.dumps(live.hello()))
        if live.end_message is not None:
            await ws.send_text(json.dumps(live.end_message))

        async def pump():
            while True:
                msg = await q.get()
                await ws.send_text(json.dumps(msg))

        sender = asyncio.create_task(pump())

        def reply(msg: dict):
            # all post-hello egress goes through the queue: one writer per socket
            if q.full():
                q.get_nowait()
            q.put_nowait(msg)

        try:
            while True:
                raw = await ws.receive_text()
                try:
                    doc = json.loads(raw)
                except json.JSONDecodeError:
                    reply({"type": "error", "v": WIRE_VERSION, "msg": "malformed json"})
                    continue
                if doc.get("v") != WIRE_VERSION:
                    reply(
                        {
                            "type": "error",
                            "v": WIRE_VERSION,
                            "msg": f"unsupported wire version {doc.get('v')}",
                        }
                    )
                    continue
                kind = doc.get("type")
                if kind == "input":
                    try:
                        live.mailbox.offer(
                            float(doc.get("t_client", 0.0)),
                            doc["u"],
                            doc.get("overrides"),
                        )
                    except (KeyError, ValueError, TypeError) as exc:
                        reply({"type": "error", "v": WIRE_VERSION, "msg": f"bad input frame: {exc}"})
                elif kind == "history_req":
                    reply({"type": "history", "v": WIRE_VERSION, "states": list(live.history)})
                else:
                    reply({"type": "error", "v": WIRE_VERSION, "msg": f"unknown message type {kind!r}"})
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            live.subscribers.discard(q)
            live.clients -= 1
            if live.clients <= 0:
                live.mailbox.zero()  # correction decays through the filter

    ui_path = Path(ui_dir) if ui_dir else Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if ui_path.is_dir():
        @app.get("/")
        async def index():
            return FileResponse(ui_path / "index.html")

        app.mount("/ui", StaticFiles(directory=str(ui_path)), name="ui")
    else:
        @app.get("/")
        async def index_fallback():
            return JSONResponse(
                {"msg": "UI assets not built; connect to /ws directly", "wire_version": WIRE_VERSION}
            )

    return app


def serve(
    scenario: Scenario,
    host: str = "127.0.0.1",
    port: int = 8733,
    record_path: str | None = None,
    dt: float | None = None,
    pace: float = 1.0,
    ui_dir: str | None = None,
):
    """Run the live session server (blocking)."""
    import uvicorn

    live = LiveSession(scenario, dt=dt, record_path=record_path, pace=pace)
    app = create_app(live, ui_dir=ui_dir)
    print(f"serving scenario {scenario.name!r} on http://{host}:{port} (ui at /)")
    uvicorn.run(app, host=host, port=port, log_level="warning")
