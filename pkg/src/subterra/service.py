"""Operator-facing mission service: REST control surface plus a WebSocket
event stream. The mission loop runs on one background thread; every mutating
request is queued into the loop between steps, and reads serve the latest
published snapshot. WebSocket clients get a state snapshot first, then
incremental events (auction stages, task lifecycle, telemetry as delivered
to the base over the lossy channel)."""

from __future__ import annotations

import asyncio
import logging
import queue
import threading
import time
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .mission import InjectError, Mission, Scenario, report_text

logger = logging.getLogger(__name__)

# event kinds forwarded to stream subscribers (base-side view of the mission)
_STREAM_KINDS = {"task_added", "task_assigned", "task_finished", "task_unserviceable",
                 "announce", "mission_end", "drop"}


class MissionRunner:
    """Owns the mission thread and its lifecycle: created -> running
    (<-> paused) -> finished. Steps are never split by control changes."""

    def __init__(self, scenario: Scenario, time_scale: float = 0.0):
        self.mission = Mission(scenario)
        self.time_scale = time_scale  # simulated seconds per wall second; 0 = unpaced
        self.state = "created"
        self._resume = threading.Event()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._snapshot = self.mission.snapshot()
        self._subscribers: list[queue.Queue] = []
        self._sub_lock = threading.Lock()

    # -- lifecycle -------------------------------------------------------------

    def start(self) -> None:
        if self.state != "created":
            raise RuntimeError(f"cannot start from state '{self.state}'")
        self.state = "running"
        self._resume.set()
        self._thread = threading.Thread(target=self._loop, name="mission-loop", daemon=True)
        self._thread.start()

    def pause(self) -> None:
        if self.state != "running":
            raise RuntimeError(f"cannot pause from state '{self.state}'")
        self.state = "paused"
        self._resume.clear()

    def resume(self) -> None:
        if self.state != "paused":
            raise RuntimeError(f"cannot resume from state '{self.state}'")
        self.state = "running"
        self._resume.set()

    def shutdown(self) -> None:
        self._stop.set()
        self._resume.set()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def _loop(self) -> None:
        dt = self.mission.timing.dt
        while not self.mission.done and not self._stop.is_set():
            self._resume.wait()
            if self._stop.is_set():
                break
            t0 = time.monotonic()
            step_events = self.mission.step()
            self._snapshot = self.mission.snapshot()
            self._publish(step_events)
            if self.time_scale > 0:
                budget = dt / self.time_scale - (time.monotonic() - t0)
                if budget > 0:
                    time.sleep(budget)
        if self.mission.done:
            self.state = "finished"

    # -- reads / events -------------------------------------------------------------

    def snapshot(self) -> dict:
        snap = dict(self._snapshot)
        snap["status"] = self.state
        return snap

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self._sub_lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._sub_lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    def _publish(self, step_events: list[dict]) -> None:
        out = [e for e in step_events if e["kind"] in _STREAM_KINDS]
        # strip the wire-level "type" so the stream envelope's type survives
        out.extend({**{k: v for k, v in m.items() if k != "type"}, "kind": "telemetry"}
                   for m in self.mission.base_telemetry_last_step)
        if not out:
            return
        with self._sub_lock:
            subs = list(self._subscribers)
        for q in subs:
            for e in out:
                q.put(e)


def create_app(runner: MissionRunner, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="subterra mission service")
    app.state.runner = runner
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])

    @app.get("/state")
    def get_state():
        return runner.snapshot()

    @app.get("/grid")
    def get_grid():
        grid = runner.mission.grid
        cells = grid.cells
        occupied = [[int(i), int(j), int(k)] for i, j, k in zip(*(cells == 1).nonzero())]
        unknown = [[int(i), int(j), int(k)] for i, j, k in zip(*(cells == 2).nonzero())]
        return {
            "format_version": 1,
            "dims": list(grid.dims),
            "resolution": grid.resolution,
            "origin": list(grid.origin),
            "occupied": occupied,
            "unknown": unknown,
        }

    @app.post("/tasks")
    async def post_task(body: dict):
        if runner.state not in ("running", "paused"):
            return JSONResponse({"error": f"mission is {runner.state}, not accepting tasks"},
                                status_code=409)
        kind = body.get("kind", "inspect")
        location = body.get("location")
        if not isinstance(location, list) or len(location) != 3:
            return JSONResponse({"error": "location must be [x, y, z]"}, status_code=400)
        try:
            task_id = runner.mission.inject_task(kind, location)
        except InjectError as e:
            return JSONResponse({"error": str(e)}, status_code=400)
        return {"task": task_id}

    @app.post("/control")
    async def post_control(body: dict):
        action = body.get("action")
        try:
            if action == "start":
                runner.start()
            elif action == "pause":
                runner.pause()
            elif action == "resume":
                runner.resume()
            else:
                return JSONResponse({"error": f"unknown action {action!r}"}, status_code=400)
        except RuntimeError as e:
            return JSONResponse({"error": str(e)}, status_code=409)
        return {"status": runner.state}

    @app.get("/report")
    def get_report():
        report = runner.mission.report()
        doc = report.to_dict()
        doc["partial"] = not runner.mission.done
        doc["text"] = report_text(report)
        return doc

    @app.websocket("/ws")
    async def ws_stream(ws: WebSocket):
        await ws.accept()
        q = runner.subscribe()
        try:
            await ws.send_json({"type": "snapshot", **runner.snapshot()})
            while True:
                drained = []
                while True:
                    try:
                        drained.append(q.get_nowait())
                    except queue.Empty:
                        break
                for e in drained:
                    await ws.send_json({"type": "event", **e})
                if runner.state == "finished" and q.empty():
                    await ws.send_json({"type": "end"})
                    break
                await asyncio.sleep(0.02)
        except WebSocketDisconnect:
            pass
        finally:
            runner.unsubscribe(q)

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def serve(scenario: Scenario, host: str = "127.0.0.1", port: int = 8000,
          time_scale: float = 1.0, autostart: bool = False,
          ui_dir: str | None = None) -> None:
    """Blocking entry point used by the CLI."""
    import uvicorn

    runner = MissionRunner(scenario, time_scale=time_scale)
    if autostart:
        runner.start()
    app = create_app(runner, ui_dir=ui_dir)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        runner.shutdown()
