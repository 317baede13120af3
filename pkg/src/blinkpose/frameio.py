"""Frame-sequence I/O behind a uniform random-access interface.

Two persistent backing stores are supported and described by a small JSON
manifest next to the data:

  image directory   {"fps": 240, "width": 640, "height": 480,
                     "frames": ["f000.png", "f001.png", ...]}
  packed raw        {"fps": 240, "width": 640, "height": 480,
                     "count": 160, "raw_path": "frames.raw"}

Paths are relative to the manifest location.  A packed-raw file is the
concatenation of row-major 8-bit grayscale frames.  Everything downstream
works on 8-bit grayscale; color images are collapsed with an integer luma
so results are identical across platforms.
"""

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from PIL import Image

from .errors import ManifestError

PIXEL_FORMAT = "gray8"

# integer luma weights, sum to 256 so >>8 maps 255,255,255 -> 255
_LUMA_R, _LUMA_G, _LUMA_B = 77, 150, 29


@dataclass(frozen=True)
class Frame:
    """One frame: ordinal index plus a (height, width) uint8 pixel grid.

    Origin is top-left; x is the column (rightward), y the row (downward).
    """

    index: int
    pixels: np.ndarray


def _to_gray8(arr: np.ndarray) -> np.ndarray:
    if arr.ndim == 2:
        return arr.astype(np.uint8, copy=False)
    if arr.ndim == 3 and arr.shape[2] >= 3:
        rgb = arr.astype(np.uint32)
        luma = (_LUMA_R * rgb[:, :, 0] + _LUMA_G * rgb[:, :, 1] + _LUMA_B * rgb[:, :, 2]) >> 8
        return luma.astype(np.uint8)
    raise ManifestError(f"unsupported pixel layout with shape {arr.shape}")


def _load_image_gray8(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            if im.mode in ("L", "P"):
                im = im.convert("L")
                return np.asarray(im, dtype=np.uint8)
            if im.mode in ("I;16", "I", "F"):
                raise ManifestError(f"unsupported pixel format: {im.mode} in {path.name}")
            return _to_gray8(np.asarray(im.convert("RGB")))
    except FileNotFoundError:
        raise ManifestError(f"missing frame file: {path}") from None


class _DirectoryStore:
    kind = "directory"

    def __init__(self, paths: List[Path], width: int, height: int):
        self.paths = paths
        self.width = width
        self.height = height

    def read(self, index: int) -> np.ndarray:
        px = _load_image_gray8(self.paths[index])
        if px.shape != (self.height, self.width):
            raise ManifestError(
                f"frame {index} is {px.shape[1]}x{px.shape[0]}, "
                f"manifest declares {self.width}x{self.height}"
            )
        return px


class _RawStore:
    kind = "raw"

    def __init__(self, path: Path, count: int, width: int, height: int):
        self.path = path
        self._mm = np.memmap(path, dtype=np.uint8, mode="r", shape=(count, height, width))

    def read(self, index: int) -> np.ndarray:
        return np.array(self._mm[index])


class _ArrayStore:
    kind = "memory"

    def __init__(self, frames: np.ndarray):
        self.frames = frames

    def read(self, index: int) -> np.ndarray:
        return self.frames[index].copy()


class FrameSource:
    """Immutable random-access sequence of gray8 frames.

    Safe for concurrent reads; every read returns a fresh copy of the
    pixel data.
    """

    def __init__(self, fps: float, width: int, height: int, count: int, store):
        if not fps > 0:
            raise ManifestError(f"fps must be positive, got {fps}")
        if width < 1 or height < 1:
            raise ManifestError(f"bad geometry {width}x{height}")
        if count < 1:
            raise ManifestError("empty sequence")
        self.fps = float(fps)
        self.width = int(width)
        self.height = int(height)
        self.count = int(count)
        self.pixel_format = PIXEL_FORMAT
        self._store = store

    @property
    def storage(self) -> str:
        return self._store.kind

    def read(self, index: int) -> Frame:
        if not 0 <= index < self.count:
            raise IndexError(f"frame index {index} out of range [0, {self.count})")
        return Frame(index=index, pixels=self._store.read(index))

    @staticmethod
    def from_array(frames: np.ndarray, fps: float) -> "FrameSource":
        """Wrap an in-memory (count, height, width) uint8 stack."""
        if frames.ndim != 3:
            raise ManifestError(f"expected (count, height, width) array, got shape {frames.shape}")
        if frames.dtype != np.uint8:
            raise ManifestError(f"expected uint8 frames, got {frames.dtype}")
        count, height, width = frames.shape
        return FrameSource(fps, width, height, count, _ArrayStore(frames))


def load_manifest(path: Union[str, Path]) -> FrameSource:
    """Load and validate a manifest, returning a FrameSource.

    Raises ManifestError on a missing file, malformed JSON, frame count
    mismatch against the data on disk, or an unsupported pixel format.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ManifestError(f"manifest not found: {path}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ManifestError(f"malformed manifest {path}: {e}") from None
    if not isinstance(doc, dict):
        raise ManifestError(f"malformed manifest {path}: expected a JSON object")

    for key in ("fps", "width", "height"):
        if key not in doc:
            raise ManifestError(f"manifest missing field '{key}'")
        if not isinstance(doc[key], (int, float)) or isinstance(doc[key], bool):
            raise ManifestError(f"manifest field '{key}' must be a number")
    fmt = doc.get("pixel_format", PIXEL_FORMAT)
    if fmt != PIXEL_FORMAT:
        raise ManifestError(f"unsupported pixel format: {fmt!r}")
    fps, width, height = doc["fps"], int(doc["width"]), int(doc["height"])
    base = path.parent

    if "frames" in doc:
        frames = doc["frames"]
        if not isinstance(frames, list) or not all(isinstance(p, str) for p in frames):
            raise ManifestError("manifest field 'frames' must be a list of paths")
        if len(frames) == 0:
            raise ManifestError("empty sequence")
        declared = doc.get("count", len(frames))
        if declared != len(frames):
            raise ManifestError(
                f"frame count mismatch: manifest declares {declared}, lists {len(frames)} files"
            )
        paths = [base / p for p in frames]
        missing = [p for p in paths if not p.is_file()]
        if missing:
            raise ManifestError(
                f"frame count mismatch: {len(missing)} listed file(s) absent, first: {missing[0]}"
            )
        src = FrameSource(fps, width, height, len(paths), _DirectoryStore(paths, width, height))
        src.read(0)  # surfaces geometry/format problems eagerly
        return src

    if "raw_path" in doc:
        if "count" not in doc:
            raise ManifestError("packed-raw manifest missing field 'count'")
        count = doc["count"]
        if not isinstance(count, int) or isinstance(count, bool):
            raise ManifestError("manifest field 'count' must be an integer")
        if count == 0:
            raise ManifestError("empty sequence")
        raw = base / doc["raw_path"]
        if not raw.is_file():
            raise ManifestError(f"raw file not found: {raw}")
        expected = count * width * height
        actual = raw.stat().st_size
        if actual != expected:
            raise ManifestError(
                f"frame count mismatch: raw file holds {actual} bytes, "
                f"manifest implies {expected}"
            )
        return FrameSource(fps, width, height, count, _RawStore(raw, count, width, height))

    raise ManifestError("manifest must contain either 'frames' or 'raw_path'")


def read_frame(src: FrameSource, index: int) -> Frame:
    """Deterministic random access; repeated reads are byte-identical."""
    return src.read(index)


def frame_time(src_or_fps: Union[FrameSource, float], index: int) -> float:
    """Capture time of a frame index in milliseconds (index / fps * 1000)."""
    fps = src_or_fps.fps if isinstance(src_or_fps, FrameSource) else float(src_or_fps)
    if index < 0:
        raise ValueError(f"index must be >= 0, got {index}")
    return index / fps * 1000.0


def write_packed_raw(
    src: FrameSource,
    out_dir: Union[str, Path],
    stem: str,
    indices: Optional[Sequence[int]] = None,
    fps: Optional[float] = None,
) -> Path:
    """Write frames (optionally a subsequence) as packed raw plus manifest.

    Returns the manifest path.  Reloading the manifest reproduces every
    written frame bit-exactly.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if indices is None:
        indices = range(src.count)
    raw_path = out_dir / f"{stem}.raw"
    with open(raw_path, "wb") as fh:
        for i in indices:
            fh.write(src.read(i).pixels.tobytes())
    manifest = {
        "fps": fps if fps is not None else src.fps,
        "width": src.width,
        "height": src.height,
        "count": len(indices) if hasattr(indices, "__len__") else src.count,
        "raw_path": raw_path.name,
        "pixel_format": PIXEL_FORMAT,
    }
    man_path = out_dir / f"{stem}.json"
    man_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return man_path
