"""Annotation workbench backend: sessions over a dataset, circle editing,
semi-automatic circle tracking, and export.

HTTP JSON API (all payloads carry schema_version 1):

    POST /sessions {"dataset_path": ...}            -> {"session_id": ...}
    GET  /sessions/{id}/meta                        -> frame count, sensor meta
    GET  /sessions/{id}/frames/{k}                  -> scan points + circles
    POST /sessions/{id}/frames/{k}/circles          -> add/move/resize/delete
    POST /sessions/{id}/track?from={k}&steps={n}    -> tracked circles
    POST /sessions/{id}/export?format=json|csv      -> annotation export
    POST /sessions/{id}/save                        -> JSON sidecar snapshot

Tracking is centroid-follow: the points of the next frame inside an
inflated search radius vote for the new center; a jump guard leaves the
circle unmoved (and flagged lost) when too few points appear or the
centroid jumps too far.
"""

from __future__ import annotations

import csv
import io
import json
import math
import threading
import uuid
from dataclasses import dataclass, field

import numpy as np

from .dataset import EXPORT_SCHEMA_VERSION, load_dataset, scan_with_annotations
from .geometry import PersonCircle, circle_from_center, polar_to_cartesian

API_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class TrackParams:
    search_inflation: float = 1.3
    min_points: int = 2
    max_jump: float = 0.4

    def __post_init__(self):
        if self.search_inflation < 1.0:
            raise ValueError("search_inflation must be >= 1")


class SessionError(Exception):
    pass


@dataclass
class Session:
    dataset: object
    circles: dict[int, dict[int, PersonCircle]] = field(default_factory=dict)
    lost: dict[int, set[int]] = field(default_factory=dict)
    next_person_id: int = 0
    current_frame: int = 0
    dirty: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock)


class AnnotationService:
    """In-memory session registry; one writer per session."""

    def __init__(self, track_params: TrackParams = TrackParams()):
        self.sessions: dict[str, Session] = {}
        self.track_params = track_params

    def open(self, dataset_path) -> str:
        ds = load_dataset(dataset_path)
        session = Session(dataset=ds)
        for i in range(ds.num_scans):
            _, circles = scan_with_annotations(ds, i)
            if circles:
                frame = {}
                for c in circles:
                    frame[session.next_person_id] = PersonCircle(
                        x=c.x, y=c.y, radius=c.radius, angle=c.angle,
                        distance=c.distance, half_angle=c.half_angle,
                        person_id=session.next_person_id,
                    )
                    session.next_person_id += 1
                session.circles[i] = frame
        sid = uuid.uuid4().hex
        self.sessions[sid] = session
        return sid

    def _get(self, sid: str) -> Session:
        if sid not in self.sessions:
            raise SessionError(f"unknown session {sid}")
        return self.sessions[sid]

    def _check_frame(self, session: Session, frame: int):
        if not 0 <= frame < session.dataset.num_scans:
            raise SessionError(f"frame {frame} out of range")

    def frame_payload(self, sid: str, frame: int) -> dict:
        session = self._get(sid)
        self._check_frame(session, frame)
        scan, _ = scan_with_annotations(session.dataset, frame)
        points, valid = polar_to_cartesian(scan)
        return {
            "schema_version": API_SCHEMA_VERSION,
            "frame": frame,
            "timestamp": scan.timestamp,
            "points": points[valid].tolist(),
            "circles": [
                _circle_json(c, pid in session.lost.get(frame, set()))
                for pid, c in sorted(session.circles.get(frame, {}).items())
            ],
        }

    def meta(self, sid: str) -> dict:
        session = self._get(sid)
        m = session.dataset.meta
        return {
            "schema_version": API_SCHEMA_VERSION,
            "frames": session.dataset.num_scans,
            "sensor": {
                "num_points": m.num_points,
                "angle_min": m.angle_min,
                "angle_increment": m.angle_increment,
                "range_max": m.range_max,
                "frequency": m.frequency,
            },
        }

    def circle_add(self, sid, frame, x, y, radius) -> dict:
        session = self._get(sid)
        self._check_frame(session, frame)
        with session.lock:
            pid = session.next_person_id
            session.next_person_id += 1
            c = circle_from_center(x, y, radius, person_id=pid)
            session.circles.setdefault(frame, {})[pid] = c
            session.dirty = True
        return _circle_json(c, False)

    def circle_move(self, sid, frame, person_id, x, y) -> dict:
        session = self._get(sid)
        self._check_frame(session, frame)
        with session.lock:
            old = self._find(session, frame, person_id)
            c = circle_from_center(x, y, old.radius, person_id=person_id)
            session.circles[frame][person_id] = c
            session.lost.get(frame, set()).discard(person_id)
            session.dirty = True
        return _circle_json(c, False)

    def circle_resize(self, sid, frame, person_id, radius) -> dict:
        session = self._get(sid)
        self._check_frame(session, frame)
        with session.lock:
            old = self._find(session, frame, person_id)
            c = circle_from_center(old.x, old.y, radius, person_id=person_id)
            session.circles[frame][person_id] = c
            session.dirty = True
        return _circle_json(c, False)

    def circle_delete(self, sid, frame, person_id) -> None:
        session = self._get(sid)
        self._check_frame(session, frame)
        with session.lock:
            self._find(session, frame, person_id)
            del session.circles[frame][person_id]
            session.lost.get(frame, set()).discard(person_id)
            session.dirty = True

    def _find(self, session, frame, person_id) -> PersonCircle:
        frame_circles = session.circles.get(frame, {})
        if person_id not in frame_circles:
            raise SessionError(f"unknown circle {person_id} in frame {frame}")
        return frame_circles[person_id]

    def track_step(self, sid: str, from_frame: int) -> dict:
        """Propagate from_frame's circles into from_frame+1."""
        session = self._get(sid)
        self._check_frame(session, from_frame)
        self._check_frame(session, from_frame + 1)
        params = self.track_params
        scan, _ = scan_with_annotations(session.dataset, from_frame + 1)
        points, valid = polar_to_cartesian(scan)
        points = points[valid]
        with session.lock:
            next_frame: dict[int, PersonCircle] = {}
            lost: set[int] = set()
            for pid, c in sorted(session.circles.get(from_frame, {}).items()):
                search = c.radius * params.search_inflation
                d2 = (points[:, 0] - c.x) ** 2 + (points[:, 1] - c.y) ** 2
                inside = points[d2 <= search**2]
                moved = None
                if inside.shape[0] >= params.min_points:
                    cx, cy = float(inside[:, 0].mean()), float(inside[:, 1].mean())
                    if math.hypot(cx - c.x, cy - c.y) <= params.max_jump:
                        moved = (cx, cy)
                if moved is None:
                    next_frame[pid] = PersonCircle(
                        x=c.x, y=c.y, radius=c.radius, angle=c.angle,
                        distance=c.distance, half_angle=c.half_angle, person_id=pid,
                    )
                    lost.add(pid)
                else:
                    next_frame[pid] = circle_from_center(
                        moved[0], moved[1], c.radius, person_id=pid
                    )
            session.circles[from_frame + 1] = next_frame
            session.lost[from_frame + 1] = lost
            session.dirty = True
        return {
            "schema_version": API_SCHEMA_VERSION,
            "frame": from_frame + 1,
            "circles": [
                _circle_json(c, pid in lost) for pid, c in sorted(next_frame.items())
            ],
        }

    def export(self, sid: str, format: str = "json") -> str:
        """Annotation export; the JSON variant also carries per-frame
        per-point class arrays (1 iff the point lies inside some circle)."""
        session = self._get(sid)
        ds = session.dataset
        records = []
        for frame in sorted(session.circles):
            for pid, c in sorted(session.circles[frame].items()):
                records.append(
                    {
                        "scan_index": frame,
                        "timestamp": float(ds.timestamps[frame]),
                        "person_id": pid,
                        "x": c.x,
                        "y": c.y,
                        "radius": c.radius,
                    }
                )
        if format == "csv":
            buf = io.StringIO()
            buf.write(f"# schema_version: {EXPORT_SCHEMA_VERSION}\n")
            writer = csv.DictWriter(
                buf, fieldnames=["scan_index", "timestamp", "person_id", "x", "y", "radius"]
            )
            writer.writeheader()
            for rec in records:
                writer.writerow(rec)
            return buf.getvalue()
        if format != "json":
            raise SessionError(f"unknown export format {format!r}")
        point_classes = {}
        for frame in sorted(session.circles):
            scan, _ = scan_with_annotations(ds, frame)
            points, valid = polar_to_cartesian(scan)
            classes = np.zeros(ds.meta.num_points, dtype=int)
            for c in session.circles[frame].values():
                d2 = (points[:, 0] - c.x) ** 2 + (points[:, 1] - c.y) ** 2
                classes[(d2 <= c.radius**2) & valid] = 1
            point_classes[str(frame)] = classes.tolist()
        return json.dumps(
            {
                "schema_version": EXPORT_SCHEMA_VERSION,
                "annotations": records,
                "point_classes": point_classes,
            }
        )

    def save_sidecar(self, sid: str, path) -> None:
        """Snapshot the session's circles to a JSON sidecar file."""
        session = self._get(sid)
        doc = {
            "schema_version": API_SCHEMA_VERSION,
            "next_person_id": session.next_person_id,
            "frames": {
                str(f): [_circle_json(c, False) for c in circles.values()]
                for f, circles in session.circles.items()
            },
        }
        with open(path, "w") as f:
            json.dump(doc, f)
        session.dirty = False


def _circle_json(c: PersonCircle, lost: bool) -> dict:
    return {
        "person_id": c.person_id,
        "x": c.x,
        "y": c.y,
        "radius": c.radius,
        "lost": lost,
    }


def create_app(service: AnnotationService | None = None):
    """FastAPI application exposing the annotation HTTP API."""
    from fastapi import Body, FastAPI, HTTPException, Query, Response

    service = service or AnnotationService()
    app = FastAPI(title="scandet annotation service")
    app.state.service = service

    def guard(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SessionError as e:
            raise HTTPException(status_code=404, detail=str(e))
        except (ValueError, OSError) as e:
            raise HTTPException(status_code=400, detail=str(e))

    @app.post("/sessions")
    def open_session(payload: dict = Body(...)):
        sid = guard(service.open, payload["dataset_path"])
        return {"schema_version": API_SCHEMA_VERSION, "session_id": sid}

    @app.get("/sessions/{sid}/meta")
    def meta(sid: str):
        return guard(service.meta, sid)

    @app.get("/sessions/{sid}/frames/{frame}")
    def frame(sid: str, frame: int):
        return guard(service.frame_payload, sid, frame)

    @app.post("/sessions/{sid}/frames/{frame}/circles")
    def edit_circle(sid: str, frame: int, payload: dict = Body(...)):
        action = payload.get("action")
        if action == "add":
            return guard(service.circle_add, sid, frame,
                         payload["x"], payload["y"], payload["radius"])
        if action == "move":
            return guard(service.circle_move, sid, frame,
                         payload["person_id"], payload["x"], payload["y"])
        if action == "resize":
            return guard(service.circle_resize, sid, frame,
                         payload["person_id"], payload["radius"])
        if action == "delete":
            guard(service.circle_delete, sid, frame, payload["person_id"])
            return {"deleted": payload["person_id"]}
        raise HTTPException(status_code=400, detail=f"unknown action {action!r}")

    @app.post("/sessions/{sid}/track")
    def track(sid: str, from_frame: int = Query(..., alias="from"),
              steps: int = Query(1)):
        result = None
        for k in range(steps):
            result = guard(service.track_step, sid, from_frame + k)
        return result

    @app.post("/sessions/{sid}/export")
    def export(sid: str, format: str = Query("json")):
        body = guard(service.export, sid, format)
        media = "application/json" if format == "json" else "text/csv"
        return Response(content=body, media_type=media)

    @app.post("/sessions/{sid}/save")
    def save(sid: str, payload: dict = Body(...)):
        guard(service.save_sidecar, sid, payload["path"])
        return {"saved": payload["path"]}

    return app
