"""HTTP authoring service backing the studio UI.

Endpoints (JSON bodies):

    GET  /health                          -> {"status": "ok"}
    POST /session {"manifest_path": p}    -> {"session_id": id, ...}
    GET  /session/{id}/scene              -> image and per-part masks (base64 PNG)
    PUT  /session/{id}/pdg  (document)    -> {"diagnostics": [...]}
    PUT  /session/{id}/pose {"params":..} -> clamped pose + preview URLs
    GET  /session/{id}/preview/{frame}    -> tracking and mask PNG for that frame
    POST /session/{id}/compile {"out_dir": p} -> compile manifest

Within a session mutations are serialized (single writer); a second
concurrent mutation receives 409. Preview rendering shares the exact code
path of a headless compile, so previews and compiled frames are
byte-identical.
"""
from __future__ import annotations

import base64
import hashlib
import io
import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from PIL import Image

from . import pipeline
from .document import PdgDocument, bind_document, parse_pdg_document, validate_document
from .errors import PdgKitError, ValidationError
from .graph import PDG, Pose, clamp_pose, forward_kinematics
from .motion import DEFAULT_FRAMES, EASINGS, disocclusion_from_tracking, interpolate_timeline, render_tracking
from .scene import PointSet, Scene, load_scene


def _png_bytes(array: np.ndarray, mode: str) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(array, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def _b64_png(array: np.ndarray, mode: str = "RGB") -> str:
    return base64.b64encode(_png_bytes(array, mode)).decode("ascii")


@dataclass
class SessionState:
    session_id: str
    scene: Scene
    base_dir: Path
    mask_paths: dict[str, str]
    document: PdgDocument | None = None
    pdg: PDG | None = None
    static: PointSet | None = None
    target: Pose = field(default_factory=Pose.zero)
    frames: int = DEFAULT_FRAMES
    easing: str = "linear"
    lock: threading.Lock = field(default_factory=threading.Lock)
    previews: dict[tuple[str, int], tuple[bytes, bytes]] = field(default_factory=dict)

    def pose_key(self) -> str:
        payload = json.dumps(
            {"params": dict(sorted(self.target.params.items())),
             "frames": self.frames, "easing": self.easing},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def render_preview(self, frame: int) -> tuple[bytes, bytes]:
        """Tracking and mask PNG for one frame, cached by (pose, frame)."""
        key = (self.pose_key(), frame)
        cached = self.previews.get(key)
        if cached is not None:
            return cached
        timeline = interpolate_timeline(self.pdg, self.target, self.frames, self.easing)
        poses = [timeline.poses[0], timeline.poses[frame]]
        clouds = []
        for pose in poses:
            world = forward_kinematics(self.pdg, pose)
            clouds.append({
                n.id: world[n.id].apply(n.points)
                for n in self.pdg.nodes if n.points is not None
            })
        tracking = render_tracking(clouds, self.pdg, self.static, self.scene.camera)
        mask = disocclusion_from_tracking(tracking).volume[1]
        result = (
            _png_bytes(tracking.frames[1], "RGB"),
            _png_bytes(np.where(mask, 255, 0).astype(np.uint8), "L"),
        )
        self.previews[key] = result
        return result


class _Conflict(Exception):
    pass


def create_app() -> FastAPI:
    app = FastAPI(title="pdgkit studio service")
    # Local authoring tool; the browser studio is served from another origin.
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    sessions: dict[str, SessionState] = {}
    app.state.sessions = sessions

    def get_session(session_id: str) -> SessionState:
        session = sessions.get(session_id)
        if session is None:
            raise LookupError(session_id)
        return session

    @app.exception_handler(LookupError)
    async def _lookup_handler(request: Request, exc: LookupError):
        return JSONResponse(status_code=404, content={"error": f"unknown session {exc}"})

    @app.exception_handler(_Conflict)
    async def _conflict_handler(request: Request, exc: _Conflict):
        return JSONResponse(
            status_code=409, content={"error": "session is being mutated by another request"}
        )

    @app.exception_handler(PdgKitError)
    async def _domain_handler(request: Request, exc: PdgKitError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def _request_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/session")
    def create_session(body: dict[str, Any]):
        manifest_path = body.get("manifest_path")
        if not manifest_path:
            raise ValidationError("body requires manifest_path")
        manifest_path = Path(manifest_path)
        scene = load_scene(manifest_path)
        raw = json.loads(manifest_path.read_text(encoding="utf-8"))
        session = SessionState(
            session_id=uuid.uuid4().hex,
            scene=scene,
            base_dir=manifest_path.parent,
            mask_paths=dict(raw["masks"]),
        )
        sessions[session.session_id] = session
        return {
            "session_id": session.session_id,
            "width": scene.camera.width,
            "height": scene.camera.height,
            "parts": sorted(scene.part_masks),
        }

    @app.get("/session/{session_id}/scene")
    def get_scene(session_id: str):
        session = get_session(session_id)
        scene = session.scene
        parts = [
            {
                "id": part_id,
                "mask_path": session.mask_paths.get(part_id),
                "mask_png": _b64_png(
                    np.where(mask, 255, 0).astype(np.uint8), "L"
                ),
            }
            for part_id, mask in sorted(scene.part_masks.items())
        ]
        return {
            "width": scene.camera.width,
            "height": scene.camera.height,
            "image_png": _b64_png(scene.image),
            "camera": scene.camera.to_dict(),
            "parts": parts,
        }

    @app.put("/session/{session_id}/pdg")
    def put_pdg(session_id: str, body: dict[str, Any]):
        session = get_session(session_id)
        if not session.lock.acquire(blocking=False):
            raise _Conflict()
        try:
            document = parse_pdg_document(body)
            diagnostics = validate_document(document, session.base_dir)
            if diagnostics:
                return JSONResponse(
                    status_code=400,
                    content={"diagnostics": [str(v) for v in diagnostics]},
                )
            session.document = document
            session.pdg = bind_document(document, session.scene, session.base_dir)
            session.static = pipeline.static_cloud(session.scene, session.pdg)
            session.target = Pose.zero()
            session.previews.clear()
            return {"diagnostics": []}
        finally:
            session.lock.release()

    @app.put("/session/{session_id}/pose")
    def put_pose(session_id: str, body: dict[str, Any]):
        session = get_session(session_id)
        if not session.lock.acquire(blocking=False):
            raise _Conflict()
        try:
            if session.pdg is None:
                raise ValidationError("no valid PDG on this session yet")
            params = body.get("params", {})
            if not isinstance(params, dict):
                raise ValidationError("params must be an object of node id -> value")
            try:
                frames = int(body.get("frames", session.frames))
            except (TypeError, ValueError):
                raise ValidationError("frames must be an integer") from None
            easing = body.get("easing", session.easing)
            if frames < 1:
                raise ValidationError("frames must be >= 1")
            if easing not in EASINGS:
                raise ValidationError(f"unknown easing {easing!r}")
            session.target = clamp_pose(session.pdg, Pose(params))
            session.frames = frames
            session.easing = easing
            return {
                "pose": dict(session.target.params),
                "frames": session.frames,
                "easing": session.easing,
                "previews": {
                    "tracking": f"/session/{session_id}/preview/{session.frames}",
                    "frame_template": f"/session/{session_id}/preview/{{frame}}",
                },
            }
        finally:
            session.lock.release()

    @app.get("/session/{session_id}/preview/{frame}")
    def get_preview(session_id: str, frame: int):
        session = get_session(session_id)
        if session.pdg is None:
            raise ValidationError("no valid PDG on this session yet")
        if not (0 <= frame <= session.frames):
            raise ValidationError(f"frame must be in [0, {session.frames}]")
        track_png, mask_png = session.render_preview(frame)
        return {
            "frame": frame,
            "tracking_png": base64.b64encode(track_png).decode("ascii"),
            "mask_png": base64.b64encode(mask_png).decode("ascii"),
        }

    @app.post("/session/{session_id}/compile")
    def post_compile(session_id: str, body: dict[str, Any]):
        session = get_session(session_id)
        if not session.lock.acquire(blocking=False):
            raise _Conflict()
        try:
            if session.pdg is None:
                raise ValidationError("no valid PDG on this session yet")
            out_dir = body.get("out_dir")
            if not out_dir:
                raise ValidationError("body requires out_dir")
            result = pipeline.compile_motion(
                session.scene, session.pdg, session.target,
                frames=session.frames, easing=session.easing,
            )
            manifest_path = pipeline.write_compile(result, out_dir)
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            return {"manifest_path": str(manifest_path), "manifest": manifest}
        finally:
            session.lock.release()

    return app
