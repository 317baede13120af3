"""LED keypoint extraction from paired on/off frames.

The demuxed on- and off-frames of a cycle are only ~8 ms apart, so apart
from the LEDs the two images are nearly identical; a saturating difference
leaves the LED blobs on an almost black background.  Blobs are picked up
as thresholded 8-connected components with intensity-weighted centroids
and greedily associated to named joint tracks over time.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .blinksync import DemuxResult
from .errors import DetectionError, InputError
from .frameio import FrameSource
from .groundtruth import CANONICAL_JOINTS

log = logging.getLogger(__name__)

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)

PROVENANCE_DETECTED = "detected"
PROVENANCE_COASTED = "coasted"
PROVENANCE_MISSING = "missing"


@dataclass(frozen=True)
class DetectParams:
    """Blob and association thresholds; fixed defaults keep runs reproducible."""

    threshold: int = 50
    min_area: int = 4
    max_area: int = 2000
    gating_radius: float = 40.0
    max_coast: int = 5

    def __post_init__(self):
        if not 1 <= self.threshold <= 255:
            raise InputError(f"threshold must be in [1, 255], got {self.threshold}")
        if self.min_area > self.max_area:
            raise InputError(f"min_area {self.min_area} > max_area {self.max_area}")
        if not self.gating_radius > 0:
            raise InputError(f"gating_radius must be positive, got {self.gating_radius}")
        if self.max_coast < 0:
            raise InputError(f"max_coast must be >= 0, got {self.max_coast}")


@dataclass(frozen=True)
class Blob:
    """Connected bright region: sub-pixel centroid, pixel count, summed intensity."""

    x: float
    y: float
    area: int
    mass: float


def diff_image(on: np.ndarray, off: np.ndarray) -> np.ndarray:
    """Saturating per-pixel difference max(on - off, 0) as uint8."""
    on = np.asarray(on)
    off = np.asarray(off)
    if on.shape != off.shape:
        raise InputError(f"geometry mismatch: {on.shape} vs {off.shape}")
    d = on.astype(np.int16) - off.astype(np.int16)
    np.maximum(d, 0, out=d)
    return d.astype(np.uint8)


def label_components(d: np.ndarray, threshold: int) -> Tuple[np.ndarray, int]:
    """8-connected components of pixels >= threshold."""
    mask = d >= threshold
    labels, n = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    return labels, n


def detect_blobs(d: np.ndarray, p: DetectParams) -> List[Blob]:
    """Thresholded components with area in [min_area, max_area].

    Centroid is the intensity-weighted mean of member pixel coordinates
    (pixel centers at integer coordinates).  Result is sorted by
    descending mass, centroid (y, x) breaking ties.
    """
    labels, n = label_components(d, p.threshold)
    if n == 0:
        return []
    flat_labels = labels.ravel()
    weights = d.ravel().astype(np.float64)
    areas = np.bincount(flat_labels, minlength=n + 1)[1:]
    mass = np.bincount(flat_labels, weights=weights, minlength=n + 1)[1:]
    ys, xs = np.indices(d.shape)
    cy = np.bincount(flat_labels, weights=weights * ys.ravel(), minlength=n + 1)[1:] / mass
    cx = np.bincount(flat_labels, weights=weights * xs.ravel(), minlength=n + 1)[1:] / mass
    blobs = [
        Blob(x=float(cx[i]), y=float(cy[i]), area=int(areas[i]), mass=float(mass[i]))
        for i in range(n)
        if p.min_area <= areas[i] <= p.max_area
    ]
    blobs.sort(key=lambda b: (-b.mass, b.y, b.x))
    return blobs


@dataclass(frozen=True)
class JointState:
    """Association state of one track after a frame."""

    x: float
    y: float
    coast_run: int
    provenance: str

    @property
    def visible(self) -> bool:
        return self.provenance in (PROVENANCE_DETECTED, PROVENANCE_COASTED)


AssociationState = Dict[str, JointState]


def seed_state(seeds: Mapping[str, Tuple[float, float]], joints: Sequence[str]) -> AssociationState:
    state = {}
    for joint in joints:
        if joint not in seeds:
            raise InputError(f"seeds missing joint {joint}")
        x, y = seeds[joint]
        state[joint] = JointState(x=float(x), y=float(y), coast_run=0, provenance=PROVENANCE_DETECTED)
    return state


def _greedy_match(
    state: AssociationState, joints: Sequence[str], blobs: Sequence[Blob], gating: float
) -> Dict[str, int]:
    """Greedy nearest-pair matching under the gate.

    Candidate pairs are taken in ascending (distance, blob mass, joint
    order, blob centroid) so the outcome never depends on blob input
    order; each joint and each blob matches at most once.
    """
    pairs = []
    for ji, joint in enumerate(joints):
        st = state[joint]
        for bi, b in enumerate(blobs):
            dist = math.hypot(b.x - st.x, b.y - st.y)
            if dist <= gating:
                pairs.append((dist, b.mass, ji, b.y, b.x, bi))
    pairs.sort()
    taken_j: set = set()
    taken_b: set = set()
    match: Dict[str, int] = {}
    for dist, _mass, ji, _by, _bx, bi in pairs:
        if ji in taken_j or bi in taken_b:
            continue
        taken_j.add(ji)
        taken_b.add(bi)
        match[joints[ji]] = bi
    return match


def associate(
    prev: AssociationState, blobs: Sequence[Blob], p: DetectParams, joints: Sequence[str] = CANONICAL_JOINTS
) -> AssociationState:
    """Advance all tracks one frame against the detected blobs.

    Matched tracks move to the blob centroid; unmatched tracks coast at
    their last position for up to max_coast frames, then go missing (the
    last position is kept internally so the track can re-acquire).
    Unmatched blobs are discarded.
    """
    match = _greedy_match(prev, joints, blobs, p.gating_radius)
    state: AssociationState = {}
    for joint in joints:
        st = prev[joint]
        if joint in match:
            b = blobs[match[joint]]
            state[joint] = JointState(x=b.x, y=b.y, coast_run=0, provenance=PROVENANCE_DETECTED)
        elif st.coast_run < p.max_coast:
            state[joint] = JointState(
                x=st.x, y=st.y, coast_run=st.coast_run + 1, provenance=PROVENANCE_COASTED
            )
        else:
            state[joint] = JointState(
                x=st.x, y=st.y, coast_run=st.coast_run + 1, provenance=PROVENANCE_MISSING
            )
    unmatched = len(blobs) - len(match)
    if unmatched:
        log.debug("discarded %d unmatched blob(s)", unmatched)
    return state


@dataclass(frozen=True)
class TrackPoint:
    x: Optional[float]
    y: Optional[float]
    visible: bool
    provenance: str


@dataclass
class TrackSet:
    """Per output frame, one point per joint with visibility and provenance."""

    joints: Tuple[str, ...]
    frames: List[Dict[str, TrackPoint]]


def _state_to_points(state: AssociationState, joints: Sequence[str]) -> Dict[str, TrackPoint]:
    points = {}
    for joint in joints:
        st = state[joint]
        if st.visible:
            points[joint] = TrackPoint(x=st.x, y=st.y, visible=True, provenance=st.provenance)
        else:
            points[joint] = TrackPoint(x=None, y=None, visible=False, provenance=st.provenance)
    return points


def run_detection(
    dm: DemuxResult,
    src: FrameSource,
    seeds: Mapping[str, Tuple[float, float]],
    p: DetectParams = DetectParams(),
    joints: Sequence[str] = CANONICAL_JOINTS,
) -> TrackSet:
    """Detect and track all joints over the demuxed sequence.

    Frame 0 is initialized by matching blobs against the seed positions
    under the same gating; a seed that matches nothing is an error naming
    the joint.  Later frames run the parallel-friendly detect stage and a
    sequential association fold, deterministically.
    """
    for joint in joints:
        if joint not in seeds:
            raise InputError(f"seeds missing joint {joint}")
        x, y = seeds[joint]
        if not (0 <= x < src.width and 0 <= y < src.height):
            raise InputError(f"seed for {joint} at ({x}, {y}) outside {src.width}x{src.height} image")
    n = len(dm.on_indices)
    if n == 0:
        raise DetectionError("demux result has no cycles")

    def blobs_at(k: int) -> List[Blob]:
        on = src.read(dm.on_indices[k]).pixels
        off = src.read(dm.off_indices[k]).pixels
        return detect_blobs(diff_image(on, off), p)

    state = seed_state(seeds, joints)
    blobs0 = blobs_at(0)
    match0 = _greedy_match(state, joints, blobs0, p.gating_radius)
    for joint in joints:
        if joint not in match0:
            raise DetectionError(f"seed unmatched: {joint}")
    frames: List[Dict[str, TrackPoint]] = []
    state = {
        joint: JointState(
            x=blobs0[match0[joint]].x,
            y=blobs0[match0[joint]].y,
            coast_run=0,
            provenance=PROVENANCE_DETECTED,
        )
        for joint in joints
    }
    frames.append(_state_to_points(state, joints))
    for k in range(1, n):
        state = associate(state, blobs_at(k), p, joints)
        frames.append(_state_to_points(state, joints))
    return TrackSet(joints=tuple(joints), frames=frames)
