"""Deterministic synthetic blink scenes with exact ground truth.

Renders Gaussian LED blobs moving on per-axis sinusoids over a noisy
background, modulated by the blink schedule, with optional occlusion
windows and an always-on "cloth" decoy blob that lags the joint (the
failure mode that misleads annotators).  Identical config and seed
reproduce identical frames; per-frame RNG streams are derived from
(seed, frame index) so rendering order can never change the output.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .blinksync import BlinkConfig, blink_schedule
from .errors import InputError
from .frameio import FrameSource
from .groundtruth import (
    DocMeta,
    FrameEntry,
    GroundTruthDoc,
    Keypoint,
    PoseSeries,
    validate_doc,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MotionAxis:
    """Sinusoidal position along one axis: center + amplitude*sin(2*pi*t/period + phase)."""

    center: float
    amplitude: float = 0.0
    period_frames: float = 1.0
    phase: float = 0.0

    def pos(self, t: float) -> float:
        if self.amplitude == 0.0:
            return self.center
        return self.center + self.amplitude * math.sin(
            2 * math.pi * t / self.period_frames + self.phase
        )


@dataclass(frozen=True)
class ClothLag:
    """Always-on decoy blob trailing the joint by lag_frames plus a fixed offset."""

    offset: Tuple[float, float]
    lag_frames: int
    amplitude: float


@dataclass(frozen=True)
class JointScene:
    motion_x: MotionAxis
    motion_y: MotionAxis
    blob_sigma: float = 2.5
    amplitude: float = 200.0
    attenuation: float = 0.9
    occlusions: Tuple[Tuple[int, int], ...] = ()
    cloth_lag: Optional[ClothLag] = None

    def position(self, t: float) -> Tuple[float, float]:
        return self.motion_x.pos(t), self.motion_y.pos(t)

    def occluded(self, t: int) -> bool:
        return any(a <= t < b for a, b in self.occlusions)


@dataclass(frozen=True)
class SceneConfig:
    seed: int = 7
    width: int = 640
    height: int = 480
    fps: float = 240.0
    duration_frames: int = 160
    blink: Optional[BlinkConfig] = field(default_factory=BlinkConfig)
    blink_phase_ms: float = 0.0
    noise_sigma: float = 4.0
    background_level: float = 20.0
    joints: Mapping[str, JointScene] = field(default_factory=dict)

    def __post_init__(self):
        if self.duration_frames < 1:
            raise InputError("duration_frames must be >= 1")
        if self.width < 1 or self.height < 1:
            raise InputError(f"bad geometry {self.width}x{self.height}")
        if self.noise_sigma < 0:
            raise InputError("noise_sigma must be >= 0")
        if not self.joints:
            raise InputError("scene needs at least one joint")


def scene_config_from_json(doc: dict) -> SceneConfig:
    """Build a SceneConfig from its JSON form (see README for the layout)."""

    def axis(d: dict) -> MotionAxis:
        return MotionAxis(
            center=d["center"],
            amplitude=d.get("amplitude", 0.0),
            period_frames=d.get("period_frames", 1.0),
            phase=d.get("phase", 0.0),
        )

    joints = {}
    for name, jd in doc.get("joints", {}).items():
        cloth = None
        if jd.get("cloth_lag"):
            cd = jd["cloth_lag"]
            cloth = ClothLag(
                offset=tuple(cd["offset"]),
                lag_frames=cd["lag_frames"],
                amplitude=cd["amplitude"],
            )
        joints[name] = JointScene(
            motion_x=axis(jd["motion"]["x"]),
            motion_y=axis(jd["motion"]["y"]),
            blob_sigma=jd.get("blob_sigma", 2.5),
            amplitude=jd.get("amplitude", 200.0),
            attenuation=jd.get("attenuation", 0.9),
            occlusions=tuple(tuple(w) for w in jd.get("occlusions", [])),
            cloth_lag=cloth,
        )
    blink = None
    if doc.get("blink", {}) is not None:
        bd = doc.get("blink", {})
        blink = BlinkConfig(
            on_ms=bd.get("on_ms", 10.0),
            off_ms=bd.get("off_ms", 23.333),
            fps=doc.get("fps", 240.0),
        )
    return SceneConfig(
        seed=doc.get("seed", 7),
        width=doc.get("width", 640),
        height=doc.get("height", 480),
        fps=doc.get("fps", 240.0),
        duration_frames=doc.get("duration_frames", 160),
        blink=blink,
        blink_phase_ms=doc.get("blink_phase_ms", 0.0),
        noise_sigma=doc.get("noise_sigma", 4.0),
        background_level=doc.get("background_level", 20.0),
        joints=joints,
    )


def scene_config_to_json(cfg: SceneConfig) -> dict:
    joints = {}
    for name, js in cfg.joints.items():
        jd = {
            "motion": {
                "x": {
                    "center": js.motion_x.center,
                    "amplitude": js.motion_x.amplitude,
                    "period_frames": js.motion_x.period_frames,
                    "phase": js.motion_x.phase,
                },
                "y": {
                    "center": js.motion_y.center,
                    "amplitude": js.motion_y.amplitude,
                    "period_frames": js.motion_y.period_frames,
                    "phase": js.motion_y.phase,
                },
            },
            "blob_sigma": js.blob_sigma,
            "amplitude": js.amplitude,
            "attenuation": js.attenuation,
            "occlusions": [list(w) for w in js.occlusions],
        }
        if js.cloth_lag:
            jd["cloth_lag"] = {
                "offset": list(js.cloth_lag.offset),
                "lag_frames": js.cloth_lag.lag_frames,
                "amplitude": js.cloth_lag.amplitude,
            }
        joints[name] = jd
    doc = {
        "seed": cfg.seed,
        "width": cfg.width,
        "height": cfg.height,
        "fps": cfg.fps,
        "duration_frames": cfg.duration_frames,
        "blink": None
        if cfg.blink is None
        else {"on_ms": cfg.blink.on_ms, "off_ms": cfg.blink.off_ms},
        "blink_phase_ms": cfg.blink_phase_ms,
        "noise_sigma": cfg.noise_sigma,
        "background_level": cfg.background_level,
        "joints": joints,
    }
    return doc


@dataclass
class SceneTruth:
    """Exact per-source-frame state of the generated scene."""

    fps: float
    period_frames: int
    joints: Tuple[str, ...]
    positions: Dict[str, List[Tuple[float, float]]]
    on_fraction: List[float]
    direction_change_frames: List[int]
    decoy_positions: Dict[str, List[Tuple[float, float]]]
    width: int
    height: int

    def n_cycles(self) -> int:
        return len(self.on_fraction) // self.period_frames

    def canonical_on_frames(self) -> List[int]:
        """Per complete cycle, the first source frame with on-fraction >= 0.99.

        Falls back to the brightest frame of the cycle when nothing is
        fully on (possible with exotic phase/exposure combinations).
        """
        P = self.period_frames
        out = []
        for k in range(self.n_cycles()):
            window = self.on_fraction[k * P : (k + 1) * P]
            full = [i for i, f in enumerate(window) if f >= 0.99]
            pick = full[0] if full else int(np.argmax(window))
            out.append(k * P + pick)
        return out

    def direction_change_output_frames(self) -> List[int]:
        """Output-frame indices of the cycles containing a direction change."""
        P = self.period_frames
        n = self.n_cycles()
        marks = sorted({t // P for t in self.direction_change_frames if t // P < n})
        return marks

    def to_ground_truth_doc(self, sequence_id: str = "synthetic") -> GroundTruthDoc:
        """Sub-sample the exact positions onto the output timeline."""
        eff_fps = self.fps / self.period_frames
        frames = []
        for k, src_idx in enumerate(self.canonical_on_frames()):
            points = {
                j: Keypoint(x=self.positions[j][src_idx][0], y=self.positions[j][src_idx][1], visible=True)
                for j in self.joints
            }
            frames.append(FrameEntry(index=k, time_ms=k / eff_fps * 1000.0, points=points))
        doc = GroundTruthDoc(
            meta=DocMeta(
                sequence_id=sequence_id,
                effective_fps=eff_fps,
                width=self.width,
                height=self.height,
                producer="synthetic",
            ),
            joints=self.joints,
            frames=frames,
        )
        validate_doc(doc)
        return doc

    def to_json_dict(self) -> dict:
        return {
            "fps": self.fps,
            "period_frames": self.period_frames,
            "width": self.width,
            "height": self.height,
            "joints": list(self.joints),
            "positions": {j: [list(p) for p in ps] for j, ps in self.positions.items()},
            "on_fraction": self.on_fraction,
            "direction_change_frames": self.direction_change_frames,
            "decoy_positions": {j: [list(p) for p in ps] for j, ps in self.decoy_positions.items()},
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "SceneTruth":
        return SceneTruth(
            fps=doc["fps"],
            period_frames=doc["period_frames"],
            joints=tuple(doc["joints"]),
            positions={j: [tuple(p) for p in ps] for j, ps in doc["positions"].items()},
            on_fraction=doc["on_fraction"],
            direction_change_frames=doc["direction_change_frames"],
            decoy_positions={j: [tuple(p) for p in ps] for j, ps in doc["decoy_positions"].items()},
            width=doc["width"],
            height=doc["height"],
        )


def _add_gaussian(img: np.ndarray, cx: float, cy: float, sigma: float, amp: float) -> bool:
    """Accumulate a Gaussian blob; returns True when any part landed inside."""
    if amp <= 0:
        return False
    h, w = img.shape
    r = int(math.ceil(4 * sigma))
    x0, x1 = int(math.floor(cx)) - r, int(math.floor(cx)) + r + 1
    y0, y1 = int(math.floor(cy)) - r, int(math.floor(cy)) + r + 1
    x0c, x1c = max(x0, 0), min(x1, w)
    y0c, y1c = max(y0, 0), min(y1, h)
    if x0c >= x1c or y0c >= y1c:
        return False
    ys = np.arange(y0c, y1c, dtype=np.float64)
    xs = np.arange(x0c, x1c, dtype=np.float64)
    gy = np.exp(-((ys - cy) ** 2) / (2 * sigma * sigma))
    gx = np.exp(-((xs - cx) ** 2) / (2 * sigma * sigma))
    img[y0c:y1c, x0c:x1c] += amp * np.outer(gy, gx)
    return True


def _direction_changes(cfg: SceneConfig) -> List[int]:
    """Frames where any joint's discrete velocity changes sign on either axis."""
    n = cfg.duration_frames
    marks = set()
    for js in cfg.joints.values():
        for axis in (js.motion_x, js.motion_y):
            if axis.amplitude == 0:
                continue
            pos = [axis.pos(t) for t in range(n)]
            for t in range(1, n - 1):
                d0 = pos[t] - pos[t - 1]
                d1 = pos[t + 1] - pos[t]
                if d0 * d1 < 0:
                    marks.add(t)
    return sorted(marks)


def simulate(cfg: SceneConfig) -> Tuple[FrameSource, SceneTruth]:
    """Render the scene; returns the frames and the exact truth."""
    n, h, w = cfg.duration_frames, cfg.height, cfg.width
    if cfg.blink is not None:
        if abs(cfg.blink.fps - cfg.fps) > 1e-9:
            raise InputError(f"blink fps {cfg.blink.fps} != scene fps {cfg.fps}")
        P = cfg.blink.period_frames
        sched = blink_schedule(cfg.blink, cfg.blink_phase_ms)
        on_fraction = [sched[t % P] for t in range(n)]
    else:
        P = 1
        on_fraction = [1.0] * n

    joints = tuple(cfg.joints)
    positions = {j: [cfg.joints[j].position(t) for t in range(n)] for j in joints}
    decoy_positions = {}
    for j in joints:
        cl = cfg.joints[j].cloth_lag
        if cl is not None:
            decoy_positions[j] = [
                (
                    cfg.joints[j].motion_x.pos(max(t - cl.lag_frames, 0)) + cl.offset[0],
                    cfg.joints[j].motion_y.pos(max(t - cl.lag_frames, 0)) + cl.offset[1],
                )
                for t in range(n)
            ]

    frames = np.empty((n, h, w), dtype=np.uint8)
    landed = {j: False for j in joints}
    for t in range(n):
        img = np.full((h, w), float(cfg.background_level), dtype=np.float64)
        if cfg.noise_sigma > 0:
            rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, t]))
            img += rng.normal(0.0, cfg.noise_sigma, size=(h, w))
        for j in joints:
            js = cfg.joints[j]
            amp = js.amplitude * js.attenuation * on_fraction[t]
            if js.occluded(t):
                amp = 0.0
            cx, cy = positions[j][t]
            if _add_gaussian(img, cx, cy, js.blob_sigma, amp):
                landed[j] = True
            if js.cloth_lag is not None:
                dx, dy = decoy_positions[j][t]
                _add_gaussian(img, dx, dy, js.blob_sigma * 1.6, js.cloth_lag.amplitude)
        frames[t] = np.clip(np.rint(img), 0, 255).astype(np.uint8)

    for j, ok in landed.items():
        if not ok:
            log.warning("joint %s blob never landed inside the %dx%d image", j, w, h)

    truth = SceneTruth(
        fps=cfg.fps,
        period_frames=P,
        joints=joints,
        positions=positions,
        on_fraction=on_fraction,
        direction_change_frames=_direction_changes(cfg),
        decoy_positions=decoy_positions,
        width=w,
        height=h,
    )
    return FrameSource.from_array(frames, cfg.fps), truth


def default_scene(noise_sigma: float = 4.0, seed: int = 7, blink_phase_ms: float = 2.0) -> SceneConfig:
    """Six lower-body LEDs on slow two-axis sinusoids, cloth decoys on the knees.

    The off-grid blink phase makes exactly one frame per cycle fully on,
    so on-frame picks are canonical and detection output lines up with
    the sub-sampled truth document frame for frame.
    """
    anchors = {
        "left_hip": (270.0, 180.0),
        "right_hip": (370.0, 180.0),
        "left_knee": (270.0, 280.0),
        "right_knee": (370.0, 280.0),
        "left_ankle": (270.0, 370.0),
        "right_ankle": (370.0, 370.0),
    }
    joints = {}
    for name, (cx, cy) in anchors.items():
        cloth = ClothLag(offset=(12.0, 0.0), lag_frames=6, amplitude=120.0) if "knee" in name else None
        joints[name] = JointScene(
            motion_x=MotionAxis(center=cx, amplitude=10.0, period_frames=320.0),
            motion_y=MotionAxis(center=cy, amplitude=6.0, period_frames=256.0),
            blob_sigma=2.5,
            amplitude=200.0,
            attenuation=0.9,
            cloth_lag=cloth,
        )
    return SceneConfig(
        seed=seed,
        width=640,
        height=480,
        fps=240.0,
        duration_frames=160,
        blink=BlinkConfig(),
        blink_phase_ms=blink_phase_ms,
        noise_sigma=noise_sigma,
        background_level=20.0,
        joints=joints,
    )


@dataclass(frozen=True)
class OffsetModel:
    dx: float
    dy: float


@dataclass(frozen=True)
class JitterModel:
    sigma: float


@dataclass(frozen=True)
class SwapToDecoyModel:
    """Replace affected joints at the given output frames with decoy positions."""

    frames: Tuple[int, ...]
    decoy: Mapping[str, Mapping[int, Tuple[float, float]]]


def swap_to_decoy_model(truth: SceneTruth, output_frames: Optional[Sequence[int]] = None) -> SwapToDecoyModel:
    """Model swapping cloth-lagged joints to their decoy at marked output frames."""
    if output_frames is None:
        output_frames = truth.direction_change_output_frames()
    canonical = truth.canonical_on_frames()
    decoy = {
        j: {k: truth.decoy_positions[j][canonical[k]] for k in output_frames if k < len(canonical)}
        for j in truth.decoy_positions
    }
    return SwapToDecoyModel(frames=tuple(output_frames), decoy=decoy)


def degrade(series: PoseSeries, model, seed: int = 0) -> PoseSeries:
    """Deterministic corrupted copy simulating annotator/estimator error patterns."""
    validate_doc(series)
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    frames = []
    for fr in series.frames:
        points = {}
        for joint in series.joints:
            kp = fr.points[joint]
            if not kp.visible:
                points[joint] = Keypoint(visible=False, confidence=kp.confidence)
                continue
            x, y = kp.x, kp.y
            if isinstance(model, OffsetModel):
                x, y = x + model.dx, y + model.dy
            elif isinstance(model, JitterModel):
                dx, dy = rng.normal(0.0, model.sigma, size=2)
                x, y = x + dx, y + dy
            elif isinstance(model, SwapToDecoyModel):
                if fr.index in model.frames and joint in model.decoy and fr.index in model.decoy[joint]:
                    x, y = model.decoy[joint][fr.index]
            else:
                raise InputError(f"unknown degrade model {model!r}")
            points[joint] = Keypoint(x=float(x), y=float(y), visible=True, confidence=kp.confidence)
        frames.append(FrameEntry(index=fr.index, time_ms=fr.time_ms, points=points))
    out = PoseSeries(meta=series.meta, joints=series.joints, frames=frames)
    validate_doc(out)
    return out
