"""Local HTTP service exposing decode/edit/preview over JSON and PNG.

Every response is a pure function of (stream file bytes, edit log,
request), which makes the API trivially record/replay testable.  Reads
may overlap; mutations are serialized per session.
"""

from __future__ import annotations

import json

import numpy as np
from fastapi import FastAPI, File, Form, HTTPException, Response, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .errors import CodecError, ContainerError, DecodeError, RangeError
from .motion import PreviewFrame
from .semantics import COMPONENT_NAMES, KeyFrameSemantics, flatten, unflatten
from .session import EditOp, Session


class EditBody(BaseModel):
    target: str
    mode: str
    value: float
    frames: tuple[int, int] | None = None


class ExportBody(BaseModel):
    path: str | None = None


def _eye_json(region) -> dict:
    return {
        "polygon": region.points.T.tolist(),
        "p_hp": region.p_hp.tolist(),
        "p_lp": region.p_lp.tolist(),
        "p_hp_new": region.p_hp_new.tolist(),
        "gap": region.gap,
    }


def create_app(session: Session) -> FastAPI:
    app = FastAPI(title="ifvc interactive decoder")
    # the browser editor runs from a file:// page or another local port
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(CodecError)
    async def _codec_error(request, exc: CodecError):
        status = 400 if isinstance(exc, (ContainerError, DecodeError)) else 422
        return Response(
            content=json.dumps({"error": type(exc).__name__, "detail": str(exc)}),
            status_code=status, media_type="application/json")

    def _check_frame(index: int) -> None:
        if not (0 <= index < session.frame_count):
            raise HTTPException(status_code=404,
                                detail=f"frame {index} outside stream of "
                                       f"{session.frame_count} frames")

    @app.get("/meta")
    def meta():
        h = session.stream.header
        return {
            "fps": h.fps,
            "frame_count": h.frame_count,
            "width": h.width,
            "height": h.height,
            "model_id": h.model_id,
            "steps": list(h.quant.steps),
            "component_names": list(COMPONENT_NAMES),
            "key_tag": session.stream.key_tag.decode("ascii", errors="replace"),
            "substituted": session.substituted,
            "edit_count": len(session.edits),
        }

    @app.get("/frames/{index}/semantics")
    def frame_semantics(index: int):
        _check_frame(index)
        v = session.frame_semantics(index)
        vals = flatten(v)
        return {
            "frame": index,
            "values": list(vals),
            "named": dict(zip(COMPONENT_NAMES, vals)),
        }

    @app.get("/edits")
    def list_edits():
        return {"edits": [op.to_dict() for op in session.edits]}

    @app.post("/edits")
    def post_edit(body: EditBody):
        op = EditOp(target=body.target, mode=body.mode, value=body.value,
                    frames=body.frames)
        index = session.apply_edit(op)
        return {"index": index, "edit": op.to_dict(),
                "edit_count": len(session.edits)}

    @app.delete("/edits/{index}")
    def delete_edit(index: int):
        try:
            op = session.remove_edit(index)
        except RangeError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return {"removed": op.to_dict(), "edit_count": len(session.edits)}

    @app.get("/frames/{index}/mesh")
    def frame_mesh(index: int):
        _check_frame(index)
        mesh, left, right, _ = session.frame_mesh(index)
        model = session.model
        return {
            "frame": index,
            "vertices": mesh.projected2d.T.tolist(),
            "visible": mesh.visible.tolist(),
            "triangles": model.triangles.tolist(),
            "eye_left": _eye_json(left),
            "eye_right": _eye_json(right),
        }

    @app.get("/frames/{index}/preview.png")
    def frame_preview(index: int):
        _check_frame(index)
        return Response(content=session.preview(index).to_png(),
                        media_type="image/png")

    @app.post("/key")
    async def post_key(image: UploadFile = File(...),
                       semantics: str | None = Form(default=None)):
        data = await image.read()
        try:
            frame = PreviewFrame.from_png(data)
        except Exception as exc:
            raise HTTPException(status_code=422,
                                detail=f"could not decode uploaded image: {exc}") from exc
        key_sem = None
        if semantics:
            try:
                obj = json.loads(semantics)
                key_sem = KeyFrameSemantics(
                    id_coeffs=tuple(obj.get("id", session.active_key_semantics.id_coeffs)),
                    alb_coeffs=tuple(obj.get("alb", session.active_key_semantics.alb_coeffs)),
                    illum_coeffs=tuple(obj.get("illum", session.active_key_semantics.illum_coeffs)),
                    exp_coeffs=tuple(obj.get("exp", session.active_key_semantics.exp_coeffs)),
                    pose=unflatten(obj["pose"]) if "pose" in obj
                    else session.active_key_semantics.pose,
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise HTTPException(status_code=422,
                                    detail=f"bad semantics JSON: {exc}") from exc
        session.substitute_key(frame, key_sem)
        return {"substituted": True, "size": list(frame.size)}

    @app.post("/export")
    def export(body: ExportBody):
        if body.path:
            try:
                session.export(body.path)
            except OSError as exc:
                raise HTTPException(status_code=422,
                                    detail=f"cannot write {body.path}: {exc}") from exc
            return {"path": body.path}
        from .container import serialize
        return Response(content=serialize(session.export_stream()),
                        media_type="application/octet-stream",
                        headers={"Content-Disposition":
                                 "attachment; filename=edited.ifvc"})

    return app
