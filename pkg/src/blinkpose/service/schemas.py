"""Request/response models for the HTTP API."""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class SessionCreateRequest(BaseModel):
    manifest: str
    operator: str
    joints: Optional[List[str]] = None
    detections: Optional[str] = None


class SessionInfo(BaseModel):
    id: str
    manifest: str
    operator: str
    joints: List[str]
    frame_count: int
    width: int
    height: int
    fps: float
    created: str
    modified: str
    annotated_frames: int


class AnnotationIn(BaseModel):
    x: Optional[float] = None
    y: Optional[float] = None
    visible: bool = True


class AnnotationAck(BaseModel):
    ok: bool = True
    frame: int
    joint: str


class DemuxRequest(BaseModel):
    manifest: str
    out_dir: str
    on_ms: float = 10.0
    off_ms: float = 23.333
    percentile: float = Field(default=0.999, gt=0, le=1)
    force_offset: Optional[int] = None


class DemuxResponse(BaseModel):
    period_frames: int
    phase_offset: int
    confidence: float
    effective_fps: float
    cycles: int
    max_skew_frames: int
    drift_warning: bool
    on_manifest: str
    off_manifest: str
    demux_json: str


class DetectOptions(BaseModel):
    threshold: int = 50
    min_area: int = 4
    max_area: int = 2000
    gating_radius: float = 40.0
    max_coast: int = 5


class DetectRequest(BaseModel):
    demux_dir: str
    seeds: str
    params: DetectOptions = DetectOptions()
    out_path: Optional[str] = None


class DetectResponse(BaseModel):
    detections: str
    frames: int
    joints: List[str]
    provenance_counts: Dict[str, int]


class EvalRequest(BaseModel):
    gt: str
    estimates: List[str]
    pck_thresholds: List[float] = [5.0, 10.0, 20.0]
    joint_map: Optional[Dict[str, str]] = None
    out_dir: Optional[str] = None
    outlier_k: float = 3.0


class ProducerResult(BaseModel):
    summary: dict
    table: str
    outlier_frames: Dict[str, List[int]]
    paired_frames: int
    dropped_gt: int
    dropped_est: int


class EvalResponse(BaseModel):
    producers: Dict[str, ProducerResult]
    written: List[str]


class SimulateRequest(BaseModel):
    out_dir: str
    scene: Optional[str] = None
    noise_sigma: Optional[float] = None
    seed: Optional[int] = None


class SimulateResponse(BaseModel):
    manifest: str
    truth: str
    scene_truth: str
    seeds: str
    frames: int
    width: int
    height: int
    fps: float
