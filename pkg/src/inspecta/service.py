"""HTTP mission service: the control/telemetry API for the operator console.

Every mutating request is serialized through one command queue executed by a
single worker thread, so command application is linearizable; reads take
point-in-time snapshots. Streaming endpoints (/execute, /telemetry) emit
newline-delimited JSON.
"""

from __future__ import annotations

import json
import queue
import threading
import time

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import StreamingResponse

from .mission import Mission
from .revisit import FrameNotFound, RemoteClassifier, classify_frames


class CommandQueue:
    """Single worker executing mission commands in arrival order."""

    def __init__(self):
        self._q: queue.Queue = queue.Queue()
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def _run(self):
        while True:
            item = self._q.get()
            if item is None:
                return
            fn, reply = item
            try:
                reply.put(("ok", fn()))
            except Exception as exc:  # delivered to the caller
                reply.put(("err", exc))

    def submit(self, fn):
        reply: queue.Queue = queue.Queue()
        self._q.put((fn, reply))
        status, value = reply.get()
        if status == "err":
            raise value
        return value

    def submit_stream(self, gen_fn):
        """Run a generator command on the worker; yield its events here."""
        events: queue.Queue = queue.Queue()

        def run():
            try:
                for ev in gen_fn():
                    events.put(("ev", ev))
                events.put(("done", None))
            except Exception as exc:
                events.put(("err", exc))

        reply: queue.Queue = queue.Queue()
        self._q.put((run, reply))
        while True:
            kind, value = events.get()
            if kind == "done":
                reply.get()
                return
            if kind == "err":
                reply.get()
                raise value
            yield value

    def close(self):
        self._q.put(None)


def frame_record(frame) -> dict:
    doc = {"id": frame.frame_id, "t": frame.timestamp,
           "x": float(frame.pose.position[0]), "y": float(frame.pose.position[1]),
           "z": float(frame.pose.position[2]), "yaw": frame.pose.yaw,
           "image": frame.image_path}
    if frame.classification is not None:
        doc["label"] = frame.classification.label
        doc["confidence"] = frame.classification.confidence
    return doc


def outcome_record(outcome) -> dict:
    doc = {"frame_id": outcome.frame_id, "status": outcome.status}
    if outcome.path is not None:
        doc["path"] = outcome.path.as_dict()
    if outcome.final_error is not None:
        doc["final_error"] = outcome.final_error
    return doc


def build_app(mission: Mission) -> FastAPI:
    app = FastAPI(title="inspecta-mission")
    commands = CommandQueue()
    app.state.mission = mission
    app.state.commands = commands

    def err(status: int, message: str) -> Response:
        return Response(content=json.dumps({"error": message}),
                        status_code=status, media_type="application/json")

    @app.get("/mission")
    def get_mission():
        v = mission.vehicle_state
        return {"phase": mission.phase, "t": v.timestamp,
                "vehicle": {"x": float(v.position[0]), "y": float(v.position[1]),
                            "z": float(v.position[2]), "yaw": v.yaw},
                "counters": dict(mission.counters)}

    @app.get("/frames")
    def get_frames():
        return [frame_record(f) for f in mission.store.frames]

    @app.get("/frames/{frame_id}/image")
    def get_frame_image(frame_id: int):
        try:
            data = mission.store.image_bytes(frame_id)
        except FrameNotFound:
            return err(404, f"no frame {frame_id}")
        return Response(content=data, media_type="image/png")

    @app.post("/classify_all")
    async def classify_all(request: Request):
        body = await request.json() if await request.body() else {}
        kind = body.get("classifier", "reference")
        if kind == "remote":
            endpoint = body.get("endpoint")
            if not endpoint:
                return err(400, "remote classifier needs an endpoint")
            classifier = RemoteClassifier(endpoint)
        elif kind == "reference":
            classifier = "reference"
        else:
            return err(400, f"unknown classifier {kind!r}")
        results = commands.submit(
            lambda: classify_frames(mission.store, classifier))
        return {"results": {str(fid): {"label": r.label, "confidence": r.confidence}
                            for fid, r in results.items()},
                "errors": {str(fid): msg
                           for fid, msg in mission.store.classify_errors.items()}}

    @app.post("/plan")
    async def plan_frame(request: Request):
        body = await request.json()
        frame_id = body.get("frame_id")
        if frame_id is None:
            return err(400, "frame_id required")
        algorithm = body.get("algorithm")
        try:
            outcome = commands.submit(
                lambda: mission.plan_frame(int(frame_id), algorithm))
        except FrameNotFound as exc:
            return err(404, str(exc))
        return outcome_record(outcome)

    @app.post("/execute")
    async def execute_frame(request: Request):
        body = await request.json()
        frame_id = body.get("frame_id")
        if frame_id is None:
            return err(400, "frame_id required")
        try:
            mission.store.get(int(frame_id))
        except FrameNotFound as exc:
            return err(404, str(exc))

        def stream():
            for ev in commands.submit_stream(
                    lambda: mission.execute_frame(int(frame_id))):
                yield json.dumps(ev) + "\n"

        return StreamingResponse(stream(), media_type="application/jsonl")

    @app.get("/map/voxels")
    def map_voxels(min_p: float | None = None):
        thr = mission.grid.occupancy_threshold if min_p is None else float(min_p)
        out = []
        for key, lo in sorted(mission.grid.log_odds.items()):
            p = 1.0 / (1.0 + np.exp(-lo))
            if p >= thr:
                c = mission.grid.voxel_center(key)
                out.append({"i": key[0], "j": key[1], "k": key[2],
                            "x": round(float(c[0]), 4), "y": round(float(c[1]), 4),
                            "z": round(float(c[2]), 4), "p": round(float(p), 4)})
        return {"voxel_size": mission.grid.voxel_size, "voxels": out}

    @app.get("/telemetry")
    def telemetry(max_events: int | None = None, rate: float | None = None):
        hz = rate or mission.cfg["service"]["telemetry_rate"]
        period = 1.0 / max(hz, 0.1)

        def stream():
            n = 0
            while max_events is None or n < max_events:
                v = mission.vehicle_state
                doc = {"t": v.timestamp, "phase": mission.phase,
                       "pose": {"x": float(v.position[0]), "y": float(v.position[1]),
                                "z": float(v.position[2]), "yaw": v.yaw}}
                if mission.active_outcome is not None and \
                        mission.active_outcome.path is not None:
                    doc["active_path"] = mission.active_outcome.path.as_dict()
                yield json.dumps(doc) + "\n"
                n += 1
                if max_events is None or n < max_events:
                    time.sleep(period)

        return StreamingResponse(stream(), media_type="application/jsonl")

    return app


def serve(mission: Mission, host: str, port: int):
    """Blocking uvicorn server; port bind failures raise at startup."""
    import uvicorn
    app = build_app(mission)
    uvicorn.run(app, host=host, port=port, log_level="warning")
