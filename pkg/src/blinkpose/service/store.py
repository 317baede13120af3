"""Durable annotation-session storage.

One JSON file per session under a data directory.  Every write lands on
disk via write-temp-then-rename before it is acknowledged, so an
acknowledged annotation survives a service restart.  Writes within a
session are serialized with a per-session lock; reads return snapshots.
"""

import json
import os
import tempfile
import threading
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional

from .. import frameio, groundtruth
from ..errors import InputError


class SessionNotFound(KeyError):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class SessionStore:
    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._locks: Dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self._sources: Dict[str, frameio.FrameSource] = {}
        self._sources_guard = threading.Lock()

    def _lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def _path(self, session_id: str) -> Path:
        return self.data_dir / f"{session_id}.json"

    def _read(self, session_id: str) -> dict:
        path = self._path(session_id)
        if not path.is_file():
            raise SessionNotFound(session_id)
        return json.loads(path.read_text())

    def _write(self, session_id: str, doc: dict):
        path = self._path(session_id)
        fd, tmp = tempfile.mkstemp(dir=self.data_dir, prefix=f".{session_id}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as fh:
                json.dump(doc, fh)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def source_for(self, manifest: str) -> frameio.FrameSource:
        key = str(Path(manifest).resolve())
        with self._sources_guard:
            src = self._sources.get(key)
            if src is None:
                src = frameio.load_manifest(key)
                self._sources[key] = src
            return src

    def create(
        self,
        manifest: str,
        operator: str,
        joints: Optional[List[str]] = None,
        detections: Optional[str] = None,
    ) -> dict:
        if not operator:
            raise InputError("operator id must not be empty")
        src = self.source_for(manifest)
        joints = list(joints) if joints else list(groundtruth.CANONICAL_JOINTS)
        if len(set(joints)) != len(joints) or not joints:
            raise InputError("joint labels must be non-empty and unique")
        session_id = uuid.uuid4().hex[:16]
        doc = {
            "id": session_id,
            "manifest": str(Path(manifest).resolve()),
            "operator": operator,
            "joints": joints,
            "detections": detections,
            "width": src.width,
            "height": src.height,
            "frame_count": src.count,
            "fps": src.fps,
            "created": _now(),
            "modified": _now(),
            "annotations": {},
        }
        with self._lock(session_id):
            self._write(session_id, doc)
        return doc

    def get(self, session_id: str) -> dict:
        return self._read(session_id)

    def put_annotation(
        self,
        session_id: str,
        frame: int,
        joint: str,
        x: Optional[float],
        y: Optional[float],
        visible: bool,
    ) -> dict:
        """Last-write-wins per (frame, joint); durable before returning."""
        with self._lock(session_id):
            doc = self._read(session_id)
            if not 0 <= frame < doc["frame_count"]:
                raise InputError(f"frame {frame} outside [0, {doc['frame_count']})")
            if joint not in doc["joints"]:
                raise InputError(f"unknown joint {joint!r}")
            if visible:
                if x is None or y is None:
                    raise InputError("visible annotation needs x and y")
                if not (0 <= x < doc["width"] and 0 <= y < doc["height"]):
                    raise InputError(
                        f"point ({x}, {y}) outside {doc['width']}x{doc['height']} image"
                    )
                entry = {"x": float(x), "y": float(y), "visible": True}
            else:
                if x is not None or y is not None:
                    raise InputError("visible=false annotation must not carry coordinates")
                entry = {"visible": False}
            doc["annotations"].setdefault(str(frame), {})[joint] = entry
            doc["modified"] = _now()
            self._write(session_id, doc)
            return doc

    def annotations(self, session_id: str) -> dict:
        return self._read(session_id)["annotations"]

    def export(self, session_id: str) -> groundtruth.GroundTruthDoc:
        """Annotations as a validated document, producer human:<operator>."""
        doc = self._read(session_id)
        eff_fps = doc["fps"]
        joints = tuple(doc["joints"])
        frames = []
        for key in sorted(doc["annotations"], key=int):
            anns = doc["annotations"][key]
            idx = int(key)
            points = {}
            for joint in joints:
                entry = anns.get(joint)
                if entry is None or not entry.get("visible", False):
                    points[joint] = groundtruth.Keypoint(visible=False)
                else:
                    points[joint] = groundtruth.Keypoint(x=entry["x"], y=entry["y"], visible=True)
            frames.append(
                groundtruth.FrameEntry(index=idx, time_ms=idx / eff_fps * 1000.0, points=points)
            )
        gt = groundtruth.GroundTruthDoc(
            meta=groundtruth.DocMeta(
                sequence_id=Path(doc["manifest"]).stem,
                effective_fps=eff_fps,
                width=doc["width"],
                height=doc["height"],
                producer=f"human:{doc['operator']}",
            ),
            joints=joints,
            frames=frames,
        )
        groundtruth.validate_doc(gt)
        return gt
