"""FastAPI application: annotation sessions, frame serving, processing ops.

All errors come back as JSON {"error": message} with 400-class codes for
bad input and 404 for unknown resources.  The browser UI (when built) is
mounted as static files at the root, with the API taking precedence.
"""

import io
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from PIL import Image

from .. import groundtruth, leddetect, pipeline
from ..errors import InputError, PipelineError
from . import schemas
from .store import SessionNotFound, SessionStore


def create_app(data_dir, ui_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="blinkpose", version="0.1.0")
    store = SessionStore(data_dir)
    app.state.store = store

    @app.exception_handler(SessionNotFound)
    async def _session_not_found(request: Request, exc: SessionNotFound):
        return JSONResponse(status_code=404, content={"error": f"unknown session {exc.args[0]}"})

    @app.exception_handler(InputError)
    async def _input_error(request: Request, exc: InputError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(PipelineError)
    async def _pipeline_error(request: Request, exc: PipelineError):
        return JSONResponse(status_code=422, content={"error": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors())})

    @app.exception_handler(IndexError)
    async def _index_error(request: Request, exc: IndexError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    # -- annotation sessions ------------------------------------------------

    @app.post("/sessions", response_model=schemas.SessionInfo)
    def create_session(req: schemas.SessionCreateRequest):
        doc = store.create(req.manifest, req.operator, req.joints, req.detections)
        return _session_info(doc)

    def _session_info(doc: dict) -> schemas.SessionInfo:
        return schemas.SessionInfo(
            id=doc["id"],
            manifest=doc["manifest"],
            operator=doc["operator"],
            joints=doc["joints"],
            frame_count=doc["frame_count"],
            width=doc["width"],
            height=doc["height"],
            fps=doc["fps"],
            created=doc["created"],
            modified=doc["modified"],
            annotated_frames=len(doc["annotations"]),
        )

    @app.get("/sessions/{session_id}", response_model=schemas.SessionInfo)
    def get_session(session_id: str):
        return _session_info(store.get(session_id))

    @app.get("/sessions/{session_id}/frames/{index}")
    def get_frame(session_id: str, index: int):
        doc = store.get(session_id)
        if not 0 <= index < doc["frame_count"]:
            raise InputError(f"frame {index} outside [0, {doc['frame_count']})")
        src = store.source_for(doc["manifest"])
        frame = src.read(index)
        buf = io.BytesIO()
        Image.fromarray(frame.pixels, mode="L").save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.put("/sessions/{session_id}/annotations/{index}/{joint}", response_model=schemas.AnnotationAck)
    def put_annotation(session_id: str, index: int, joint: str, ann: schemas.AnnotationIn):
        store.put_annotation(session_id, index, joint, ann.x, ann.y, ann.visible)
        return schemas.AnnotationAck(frame=index, joint=joint)

    @app.get("/sessions/{session_id}/annotations")
    def get_annotations(session_id: str):
        return {"annotations": store.annotations(session_id)}

    @app.get("/sessions/{session_id}/export")
    def export_session(session_id: str):
        return groundtruth.export_doc(store.export(session_id))

    @app.get("/sessions/{session_id}/detections")
    def get_detections(session_id: str):
        doc = store.get(session_id)
        candidate = doc.get("detections")
        if candidate is None:
            candidate = str(Path(doc["manifest"]).parent / pipeline.DETECTIONS_JSON)
        path = Path(candidate)
        if not path.is_file():
            return JSONResponse(status_code=404, content={"error": f"no detections at {path}"})
        return groundtruth.export_doc(groundtruth.load_doc(path))

    # -- processing ops (same handlers the CLI uses) ------------------------

    @app.post("/ops/demux", response_model=schemas.DemuxResponse)
    def ops_demux(req: schemas.DemuxRequest):
        return pipeline.run_demux(
            req.manifest,
            req.out_dir,
            on_ms=req.on_ms,
            off_ms=req.off_ms,
            percentile=req.percentile,
            force_offset=req.force_offset,
        )

    @app.post("/ops/detect", response_model=schemas.DetectResponse)
    def ops_detect(req: schemas.DetectRequest):
        params = leddetect.DetectParams(
            threshold=req.params.threshold,
            min_area=req.params.min_area,
            max_area=req.params.max_area,
            gating_radius=req.params.gating_radius,
            max_coast=req.params.max_coast,
        )
        return pipeline.run_detect(req.demux_dir, req.seeds, params, req.out_path)

    @app.post("/ops/eval", response_model=schemas.EvalResponse)
    def ops_eval(req: schemas.EvalRequest):
        return pipeline.run_eval(
            req.gt,
            req.estimates,
            pck_thresholds=req.pck_thresholds,
            joint_map=req.joint_map,
            out_dir=req.out_dir,
            outlier_k=req.outlier_k,
        )

    @app.post("/ops/simulate", response_model=schemas.SimulateResponse)
    def ops_simulate(req: schemas.SimulateRequest):
        return pipeline.run_simulate(
            req.out_dir, scene_path=req.scene, noise_sigma=req.noise_sigma, seed=req.seed
        )

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
