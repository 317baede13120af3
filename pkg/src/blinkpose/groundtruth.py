"""Canonical keypoint-series data model and its file formats.

One document shape serves ground truth, human annotations and imported
estimator output: per output frame, one entry per joint with a position
and a visibility flag (estimator points may add a confidence).  Frames are
indexed on the demuxed low-rate timeline, not on source HFR frames.

The JSON layout (documented in the README):

    {
      "meta": {"sequence_id": "...", "effective_fps": 30.0,
               "width": 640, "height": 480, "producer": "auto-detect"},
      "joints": ["left_hip", ...],
      "frames": [
        {"index": 0, "time_ms": 0.0,
         "points": {"left_hip": {"x": 271.2, "y": 180.9, "visible": true},
                    "right_hip": {"visible": false}, ...}},
        ...
      ]
    }

Producer conventions: "auto-detect", "human:<operator-id>",
"estimator:<name>", "synthetic".
"""

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import SchemaError

CANONICAL_JOINTS = (
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
)

# COCO-17 keypoint order used by common estimators
COCO17_KEYPOINTS = (
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
)


@dataclass
class Keypoint:
    """One joint observation; invisible entries carry no coordinates."""

    x: Optional[float] = None
    y: Optional[float] = None
    visible: bool = True
    confidence: Optional[float] = None


@dataclass
class FrameEntry:
    index: int
    time_ms: float
    points: Dict[str, Keypoint]


@dataclass
class DocMeta:
    sequence_id: str
    effective_fps: float
    width: int
    height: int
    producer: str


@dataclass
class GroundTruthDoc:
    """Keypoint series: ground truth, annotation or estimator output."""

    meta: DocMeta
    joints: Tuple[str, ...]
    frames: List[FrameEntry]


# An estimator series is the same shape with optional per-point confidence.
PoseSeries = GroundTruthDoc


def _require(cond: bool, path: str, msg: str):
    if not cond:
        raise SchemaError(f"{path}: {msg}")


def validate_doc(doc: GroundTruthDoc):
    """Check every document invariant; error messages name the field path."""
    m = doc.meta
    _require(isinstance(m.sequence_id, str) and m.sequence_id != "", "meta.sequence_id", "must be a non-empty string")
    _require(isinstance(m.producer, str) and m.producer != "", "meta.producer", "must be a non-empty string")
    _require(isinstance(m.effective_fps, (int, float)) and m.effective_fps > 0, "meta.effective_fps", "must be positive")
    _require(isinstance(m.width, int) and m.width >= 1, "meta.width", "must be an integer >= 1")
    _require(isinstance(m.height, int) and m.height >= 1, "meta.height", "must be an integer >= 1")
    _require(len(doc.joints) > 0, "joints", "must not be empty")
    _require(len(set(doc.joints)) == len(doc.joints), "joints", "labels must be unique")
    joint_set = set(doc.joints)
    prev = None
    for i, fr in enumerate(doc.frames):
        path = f"frames[{i}]"
        _require(isinstance(fr.index, int) and fr.index >= 0, f"{path}.index", "must be an integer >= 0")
        if prev is not None:
            _require(fr.index > prev, f"{path}.index", "frame indices not increasing")
        prev = fr.index
        _require(isinstance(fr.time_ms, (int, float)) and fr.time_ms >= 0, f"{path}.time_ms", "must be >= 0")
        _require(set(fr.points) == joint_set, f"{path}.points", f"must cover exactly the joint set {sorted(joint_set)}")
        for joint, kp in fr.points.items():
            jpath = f"{path}.points.{joint}"
            if kp.visible:
                _require(isinstance(kp.x, (int, float)), f"{jpath}.x", "visible point needs a numeric x")
                _require(isinstance(kp.y, (int, float)), f"{jpath}.y", "visible point needs a numeric y")
            else:
                _require(kp.x is None and kp.y is None, jpath, "visible=false entry carries coordinates")
            if kp.confidence is not None:
                _require(
                    isinstance(kp.confidence, (int, float)) and 0 <= kp.confidence <= 1,
                    f"{jpath}.confidence",
                    "must be in [0, 1]",
                )


def export_doc(doc: GroundTruthDoc) -> dict:
    """Serialize to the JSON-ready dict; lossless against import_doc."""
    validate_doc(doc)
    frames = []
    for fr in doc.frames:
        points = {}
        for joint in doc.joints:
            kp = fr.points[joint]
            if kp.visible:
                entry = {"x": kp.x, "y": kp.y, "visible": True}
            else:
                entry = {"visible": False}
            if kp.confidence is not None:
                entry["confidence"] = kp.confidence
            points[joint] = entry
        frames.append({"index": fr.index, "time_ms": fr.time_ms, "points": points})
    return {
        "meta": {
            "sequence_id": doc.meta.sequence_id,
            "effective_fps": doc.meta.effective_fps,
            "width": doc.meta.width,
            "height": doc.meta.height,
            "producer": doc.meta.producer,
        },
        "joints": list(doc.joints),
        "frames": frames,
    }


def import_doc(data: Union[dict, str]) -> GroundTruthDoc:
    """Parse and validate a document dict (or JSON text)."""
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as e:
            raise SchemaError(f"document is not valid JSON: {e}") from None
    _require(isinstance(data, dict), "$", "document must be a JSON object")
    for key in ("meta", "joints", "frames"):
        _require(key in data, key, "missing required field")
    meta = data["meta"]
    _require(isinstance(meta, dict), "meta", "must be an object")
    for key in ("sequence_id", "effective_fps", "width", "height", "producer"):
        _require(key in meta, f"meta.{key}", "missing required field")
    joints = data["joints"]
    _require(isinstance(joints, list) and all(isinstance(j, str) for j in joints), "joints", "must be a list of strings")
    frames_in = data["frames"]
    _require(isinstance(frames_in, list), "frames", "must be a list")

    frames: List[FrameEntry] = []
    for i, fr in enumerate(frames_in):
        path = f"frames[{i}]"
        _require(isinstance(fr, dict), path, "must be an object")
        for key in ("index", "time_ms", "points"):
            _require(key in fr, f"{path}.{key}", "missing required field")
        points_in = fr["points"]
        _require(isinstance(points_in, dict), f"{path}.points", "must be an object")
        points: Dict[str, Keypoint] = {}
        for joint, entry in points_in.items():
            jpath = f"{path}.points.{joint}"
            _require(isinstance(entry, dict), jpath, "must be an object")
            unknown = set(entry) - {"x", "y", "visible", "confidence"}
            _require(not unknown, jpath, f"unknown field(s) {sorted(unknown)}")
            visible = entry.get("visible", True)
            _require(isinstance(visible, bool), f"{jpath}.visible", "must be a boolean")
            points[joint] = Keypoint(
                x=entry.get("x"),
                y=entry.get("y"),
                visible=visible,
                confidence=entry.get("confidence"),
            )
        frames.append(FrameEntry(index=fr["index"], time_ms=fr["time_ms"], points=points))

    doc = GroundTruthDoc(
        meta=DocMeta(
            sequence_id=meta["sequence_id"],
            effective_fps=meta["effective_fps"],
            width=meta["width"],
            height=meta["height"],
            producer=meta["producer"],
        ),
        joints=tuple(joints),
        frames=frames,
    )
    validate_doc(doc)
    return doc


def load_doc(path) -> GroundTruthDoc:
    with open(path) as fh:
        return import_doc(json.load(fh))


def save_doc(doc: GroundTruthDoc, path):
    with open(path, "w") as fh:
        json.dump(export_doc(doc), fh, indent=2)
        fh.write("\n")


def doc_to_csv(doc: GroundTruthDoc) -> str:
    """Long-format CSV: frame,time_ms,joint,x,y,visible,producer."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frame", "time_ms", "joint", "x", "y", "visible", "producer"])
    for fr in doc.frames:
        for joint in doc.joints:
            kp = fr.points[joint]
            x = "" if kp.x is None else repr(float(kp.x))
            y = "" if kp.y is None else repr(float(kp.y))
            w.writerow([fr.index, repr(float(fr.time_ms)), joint, x, y, str(kp.visible).lower(), doc.meta.producer])
    return buf.getvalue()


def import_coco_keypoints(
    results: Sequence[dict],
    joint_map: Optional[Mapping[str, str]] = None,
    frame_map: Optional[Mapping[object, int]] = None,
    keypoint_names: Sequence[str] = COCO17_KEYPOINTS,
    meta: Optional[DocMeta] = None,
) -> PoseSeries:
    """Convert a COCO keypoint-results array to a pose series.

    Each result entry is {"image_id", "keypoints": [x, y, score, ...],
    "score"}.  joint_map sends estimator keypoint names to canonical joint
    labels and must cover all six canonical joints; frame_map sends image
    ids to output frame indices (identity for integer ids by default).
    A keypoint score of 0 marks the joint invisible; otherwise the score
    is kept as the point confidence (clamped into [0, 1]).  When several
    entries share an image id the one with the highest detection score is
    used.
    """
    if joint_map is None:
        joint_map = {j: j for j in CANONICAL_JOINTS}
    mapped = set(joint_map.values())
    for joint in CANONICAL_JOINTS:
        if joint not in mapped:
            raise SchemaError(f"joint_map missing canonical joint {joint}")
    unknown = set(joint_map) - set(keypoint_names)
    if unknown:
        raise SchemaError(f"joint_map references unknown keypoint name(s) {sorted(unknown)}")
    name_index = {name: i for i, name in enumerate(keypoint_names)}

    if not isinstance(results, list):
        raise SchemaError("COCO results must be a JSON array")
    best: Dict[int, dict] = {}
    for i, entry in enumerate(results):
        if not isinstance(entry, dict) or "image_id" not in entry or "keypoints" not in entry:
            raise SchemaError(f"results[{i}]: entry needs 'image_id' and 'keypoints'")
        kps = entry["keypoints"]
        if not isinstance(kps, list) or len(kps) % 3 != 0:
            raise SchemaError(f"results[{i}].keypoints: length must be a multiple of 3")
        if len(kps) != 3 * len(keypoint_names):
            raise SchemaError(
                f"results[{i}].keypoints: expected {3 * len(keypoint_names)} values "
                f"for {len(keypoint_names)} keypoints, got {len(kps)}"
            )
        image_id = entry["image_id"]
        if frame_map is not None:
            if image_id not in frame_map:
                raise SchemaError(f"results[{i}]: unmapped frame id {image_id!r}")
            frame_idx = frame_map[image_id]
        else:
            if not isinstance(image_id, int) or isinstance(image_id, bool):
                raise SchemaError(f"results[{i}]: non-integer image_id {image_id!r} needs a frame_map")
            frame_idx = image_id
        score = entry.get("score", 1.0)
        cur = best.get(frame_idx)
        if cur is None or score > cur[0]:
            best[frame_idx] = (score, kps)

    if meta is None:
        meta = DocMeta(sequence_id="coco-import", effective_fps=30.0, width=1, height=1, producer="estimator:coco")
    inverse = {canon: est for est, canon in joint_map.items()}
    frames: List[FrameEntry] = []
    for frame_idx in sorted(best):
        _, kps = best[frame_idx]
        points: Dict[str, Keypoint] = {}
        for joint in CANONICAL_JOINTS:
            ki = name_index[inverse[joint]]
            x, y, s = kps[3 * ki], kps[3 * ki + 1], kps[3 * ki + 2]
            if s == 0:
                points[joint] = Keypoint(visible=False)
            else:
                points[joint] = Keypoint(x=float(x), y=float(y), visible=True, confidence=min(max(float(s), 0.0), 1.0))
        frames.append(
            FrameEntry(index=frame_idx, time_ms=frame_idx / meta.effective_fps * 1000.0, points=points)
        )
    doc = PoseSeries(meta=meta, joints=CANONICAL_JOINTS, frames=frames)
    validate_doc(doc)
    return doc


def export_coco_keypoints(
    series: PoseSeries,
    joint_map: Optional[Mapping[str, str]] = None,
    keypoint_names: Sequence[str] = COCO17_KEYPOINTS,
) -> List[dict]:
    """Inverse of import_coco_keypoints for the mapped joints.

    Unmapped keypoint slots are zero triplets; invisible joints become
    (0, 0, 0) per the COCO unlabeled convention.
    """
    if joint_map is None:
        joint_map = {j: j for j in CANONICAL_JOINTS}
    name_index = {name: i for i, name in enumerate(keypoint_names)}
    out = []
    for fr in series.frames:
        kps = [0.0] * (3 * len(keypoint_names))
        for est_name, joint in joint_map.items():
            if joint not in fr.points:
                continue
            kp = fr.points[joint]
            ki = name_index[est_name]
            if kp.visible:
                kps[3 * ki] = float(kp.x)
                kps[3 * ki + 1] = float(kp.y)
                kps[3 * ki + 2] = float(kp.confidence) if kp.confidence is not None else 1.0
        out.append({"image_id": fr.index, "keypoints": kps, "score": 1.0})
    return out
