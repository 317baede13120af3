"""LED duty-cycle model, phase recovery and temporal demultiplexing.

The capture setup flashes an LED with a fixed on/off duty cycle while a
high-frame-rate camera records.  With the defaults (10 ms on, 23.333 ms
off, 240 fps) one blink cycle spans exactly 8 frames, so the stream can be
split into an LED-on and an LED-off sequence at 30 fps each.  This module
recovers where the on-window sits relative to the frame grid, labels every
frame, and picks one on-frame and one off-frame per cycle.
"""

import logging
import math
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from fractions import Fraction
from typing import List, Sequence, Tuple, Union

import numpy as np

from .errors import DemuxError, InputError
from .frameio import FrameSource

log = logging.getLogger(__name__)

DEFAULT_ON_MS = 10.0
DEFAULT_OFF_MS = 23.333
DEFAULT_FPS = 240.0

# schedule on-fraction cutoffs for labeling; schedule is exact once the
# phase is known, so these do not need per-scene tuning
ON_FRACTION = 0.99
OFF_FRACTION = 0.01

# relative tolerance for the duty-cycle period rounding to whole frames
PERIOD_TOLERANCE = 0.01


def _frac(x: Union[float, int, Fraction]) -> Fraction:
    """Exact rational from a user-facing number (decimal repr, not binary)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(Decimal(repr(float(x))))


@dataclass(frozen=True)
class BlinkConfig:
    """LED duty cycle against a fixed capture rate.

    The period (on_ms + off_ms) must land on a whole number of frames
    within 1% so that cycles tile the frame grid; the rounded value is
    the cycle length P in frames.
    """

    on_ms: float = DEFAULT_ON_MS
    off_ms: float = DEFAULT_OFF_MS
    fps: float = DEFAULT_FPS

    def __post_init__(self):
        if not self.on_ms > 0 or not self.off_ms > 0:
            raise InputError(f"on_ms and off_ms must be positive, got {self.on_ms}, {self.off_ms}")
        if not self.fps > 0:
            raise InputError(f"fps must be positive, got {self.fps}")
        period = (_frac(self.on_ms) + _frac(self.off_ms)) * _frac(self.fps) / 1000
        rounded = int(round(period))
        if rounded < 3:
            raise InputError(f"blink period is {float(period):.3f} frames; need at least 3")
        if abs(period - rounded) > Fraction(PERIOD_TOLERANCE) * rounded:
            raise InputError(
                f"blink period {float(period):.4f} frames is not within "
                f"{PERIOD_TOLERANCE:.0%} of a whole frame count"
            )

    @property
    def period_frames(self) -> int:
        """Cycle length P in frames."""
        period = (_frac(self.on_ms) + _frac(self.off_ms)) * _frac(self.fps) / 1000
        return int(round(period))

    @property
    def frame_interval_ms(self) -> float:
        return 1000.0 / self.fps

    def on_slots(self) -> int:
        """Number of folded slots scored as 'on' during phase search."""
        n = math.floor(_frac(self.on_ms) * _frac(self.fps) / 1000)
        return min(max(1, n), self.period_frames - 1)


class FrameLabel(Enum):
    ON = "on"
    OFF = "off"
    TRANSITION = "transition"


def brightness_signal(src: FrameSource, percentile: float = 0.999) -> np.ndarray:
    """Per-frame upper-percentile intensity, min-max normalized to [0,1].

    The high percentile reacts to the small bright LED blobs while staying
    insensitive to isolated hot pixels.  A constant sequence normalizes to
    all zeros.
    """
    if not 0 < percentile <= 1:
        raise InputError(f"percentile must be in (0, 1], got {percentile}")
    values = np.empty(src.count, dtype=np.float64)
    for i in range(src.count):
        values[i] = np.quantile(src.read(i).pixels, percentile)
    lo = values.min()
    hi = values.max()
    if hi <= lo:
        return np.zeros(src.count, dtype=np.float64)
    return (values - lo) / (hi - lo)


def blink_schedule(cfg: BlinkConfig, phase_ms: Union[float, Fraction]) -> List[float]:
    """Per-frame on-fraction over one cycle for an on-window starting at phase_ms.

    The frame is modeled as integrating light over its full inter-frame
    interval.  Overlaps are computed with exact rational arithmetic; the
    on-window wraps around the cycle boundary.
    """
    phase = _frac(phase_ms)
    on = _frac(cfg.on_ms)
    off = _frac(cfg.off_ms)
    if not 0 <= phase < on + off:
        raise InputError(f"phase_ms must be in [0, {float(on + off)}), got {float(phase)}")
    P = cfg.period_frames
    delta = Fraction(1000) / _frac(cfg.fps)
    span = P * delta
    phase = phase % span
    end = phase + on
    windows = [(phase, min(end, span))]
    if end > span:
        windows.append((Fraction(0), end - span))
    fractions = []
    for k in range(P):
        a, b = k * delta, (k + 1) * delta
        overlap = Fraction(0)
        for w0, w1 in windows:
            lo, hi = max(a, w0), min(b, w1)
            if hi > lo:
                overlap += hi - lo
        fractions.append(float(overlap / delta))
    return fractions


@dataclass(frozen=True)
class PhaseEstimate:
    """Recovered alignment of the on-window to the frame grid.

    offset is the frame index within a cycle where the on-run begins;
    confidence is the contrast between the best and second-best offset.
    """

    offset: int
    confidence: float


def estimate_phase(sig: np.ndarray, cfg: BlinkConfig) -> PhaseEstimate:
    """Recover the cycle offset by folding the brightness signal modulo P.

    Each candidate offset is scored as the mean folded brightness over the
    on-slots starting there minus the mean over the remaining slots; the
    argmax wins, smallest offset on ties.
    """
    sig = np.asarray(sig, dtype=np.float64)
    P = cfg.period_frames
    if len(sig) < 2 * P:
        raise InputError(f"signal too short: {len(sig)} frames < 2 cycles of {P}")
    slot_mean = np.array([sig[s::P].mean() for s in range(P)])
    n_on = cfg.on_slots()
    scores = []
    for o in range(P):
        on_idx = [(o + j) % P for j in range(n_on)]
        off_idx = [s for s in range(P) if s not in on_idx]
        scores.append(slot_mean[on_idx].mean() - slot_mean[off_idx].mean())
    scores = np.array(scores)
    offset = int(np.argmax(scores))  # argmax returns the first (smallest) index on ties
    best = scores[offset]
    second = max(s for o, s in enumerate(scores) if o != offset)
    confidence = float((best - second) / max(best, 1e-9))
    return PhaseEstimate(offset=offset, confidence=min(max(confidence, 0.0), 1.0))


def classify_frames(
    sig: Sequence[float], phase: PhaseEstimate, cfg: BlinkConfig
) -> List[FrameLabel]:
    """Label every frame ON / OFF / TRANSITION from the schedule at the phase."""
    P = cfg.period_frames
    if not 0 <= phase.offset < P:
        raise InputError(f"phase offset {phase.offset} outside [0, {P})")
    delta = Fraction(1000) / _frac(cfg.fps)
    sched = blink_schedule(cfg, phase.offset * delta)
    labels = []
    for i in range(len(sig)):
        f = sched[i % P]
        if f >= ON_FRACTION:
            labels.append(FrameLabel.ON)
        elif f <= OFF_FRACTION:
            labels.append(FrameLabel.OFF)
        else:
            labels.append(FrameLabel.TRANSITION)
    return labels


@dataclass
class DemuxResult:
    """Per-cycle on/off frame picks forming two low-rate sequences."""

    period_frames: int
    phase_offset: int
    on_indices: List[int]
    off_indices: List[int]
    skew_frames: List[int]
    effective_fps: float
    source_fps: float

    def to_json_dict(self) -> dict:
        return {
            "period_frames": self.period_frames,
            "phase_offset": self.phase_offset,
            "effective_fps": self.effective_fps,
            "source_fps": self.source_fps,
            "cycles": [
                {"on_index": on, "off_index": off, "skew_frames": skew}
                for on, off, skew in zip(self.on_indices, self.off_indices, self.skew_frames)
            ],
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "DemuxResult":
        cycles = doc["cycles"]
        return DemuxResult(
            period_frames=doc["period_frames"],
            phase_offset=doc["phase_offset"],
            on_indices=[c["on_index"] for c in cycles],
            off_indices=[c["off_index"] for c in cycles],
            skew_frames=[c["skew_frames"] for c in cycles],
            effective_fps=doc["effective_fps"],
            source_fps=doc["source_fps"],
        )


def demux(
    src: FrameSource,
    labels: Sequence[FrameLabel],
    sig: np.ndarray,
    cfg: BlinkConfig,
    phase: PhaseEstimate,
) -> DemuxResult:
    """Pick one on-frame and one off-frame per complete cycle.

    Within a cycle the ON-labeled frame with maximal brightness wins and
    the OFF-labeled frame with minimal brightness wins (earliest frame on
    ties); off candidates are limited to within floor(P/2) frames of the
    on pick so the temporal skew of a pair stays small, falling back to
    the whole cycle if that window has no OFF frame.  Incomplete trailing
    cycles are dropped.  A cycle missing either label signals a phase or
    classification failure and raises DemuxError.
    """
    if len(labels) != src.count:
        raise InputError(f"labels length {len(labels)} != frame count {src.count}")
    P = cfg.period_frames
    n_cycles = src.count // P
    if n_cycles == 0:
        raise DemuxError(f"no complete cycles: {src.count} frames, cycle is {P}")
    on_indices: List[int] = []
    off_indices: List[int] = []
    skew: List[int] = []
    for k in range(n_cycles):
        lo = k * P
        ons = [i for i in range(lo, lo + P) if labels[i] is FrameLabel.ON]
        offs = [i for i in range(lo, lo + P) if labels[i] is FrameLabel.OFF]
        if not ons:
            raise DemuxError(f"cycle {k} has no ON-labeled frame")
        if not offs:
            raise DemuxError(f"cycle {k} has no OFF-labeled frame")
        on_pick = max(ons, key=lambda i: (sig[i], -i))
        near = [i for i in offs if abs(i - on_pick) <= P // 2]
        off_pick = min(near or offs, key=lambda i: (sig[i], i))
        on_indices.append(on_pick)
        off_indices.append(off_pick)
        skew.append(abs(on_pick - off_pick))
    return DemuxResult(
        period_frames=P,
        phase_offset=phase.offset,
        on_indices=on_indices,
        off_indices=off_indices,
        skew_frames=skew,
        effective_fps=src.fps / P,
        source_fps=src.fps,
    )


def phase_drift_offsets(
    sig: np.ndarray, cfg: BlinkConfig, window_s: float = 2.0
) -> List[Tuple[int, int]]:
    """Re-estimate the phase over sliding windows; guards against clock drift.

    Returns (window_start_frame, offset) pairs; empty when the sequence is
    shorter than one window.  Callers warn when offsets disagree.
    """
    P = cfg.period_frames
    win = int(round(window_s * cfg.fps))
    win = max(win, 2 * P)
    if len(sig) < win:
        return []
    step = max(win // 2, P)
    out = []
    for start in range(0, len(sig) - win + 1, step):
        est = estimate_phase(sig[start : start + win], cfg)
        # fold the window start back so offsets are comparable across windows
        out.append((start, (est.offset + start) % P))
    return out


def check_phase_drift(
    sig: np.ndarray, cfg: BlinkConfig, global_offset: int, window_s: float = 2.0
) -> bool:
    """True (and a warning logged) when any sliding window disagrees."""
    drifted = False
    for start, offset in phase_drift_offsets(sig, cfg, window_s):
        if offset != global_offset:
            log.warning(
                "phase drift: window at frame %d estimates offset %d, global is %d",
                start,
                offset,
                global_offset,
            )
            drifted = True
    return drifted
