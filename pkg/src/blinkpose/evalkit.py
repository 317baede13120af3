"""Compare keypoint series against ground truth.

Produces per-joint Euclidean error time series, aggregate metrics (mean,
median, RMSE, PCK at pixel thresholds) and long-format trajectory CSVs
for plotting horizontal/vertical position over time.  Aggregates are
computed in plain Python so a naive recomputation reproduces them
exactly.
"""

import csv
import io
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import EvalError
from .groundtruth import GroundTruthDoc, Keypoint, PoseSeries

DEFAULT_PCK_THRESHOLDS = (5.0, 10.0, 20.0)


@dataclass
class PairedFrames:
    """Frames shared by two series, keyed by output-frame index."""

    joints: Tuple[str, ...]
    indices: List[int]
    times_ms: List[float]
    pairs: List[Dict[str, Tuple[Keypoint, Keypoint]]]
    dropped_first: int
    dropped_second: int


def align_series(gt: GroundTruthDoc, est: PoseSeries) -> PairedFrames:
    """Pair frames by output-frame index; one-sided frames are dropped and counted."""
    if set(gt.joints) != set(est.joints):
        raise EvalError(
            f"joint sets differ: {sorted(set(gt.joints) ^ set(est.joints))} not shared"
        )
    gt_by_index = {fr.index: fr for fr in gt.frames}
    est_by_index = {fr.index: fr for fr in est.frames}
    shared = sorted(set(gt_by_index) & set(est_by_index))
    if not shared:
        raise EvalError("no overlapping frames between the two series")
    pairs = []
    times = []
    for idx in shared:
        g, e = gt_by_index[idx], est_by_index[idx]
        pairs.append({j: (g.points[j], e.points[j]) for j in gt.joints})
        times.append(g.time_ms)
    return PairedFrames(
        joints=tuple(gt.joints),
        indices=shared,
        times_ms=times,
        pairs=pairs,
        dropped_first=len(gt.frames) - len(shared),
        dropped_second=len(est.frames) - len(shared),
    )


@dataclass
class ErrorSeries:
    """Per joint, per paired frame: Euclidean error or None when either side is invisible."""

    joints: Tuple[str, ...]
    indices: List[int]
    times_ms: List[float]
    errors: Dict[str, List[Optional[float]]]


def per_joint_error(paired: PairedFrames) -> ErrorSeries:
    errors: Dict[str, List[Optional[float]]] = {j: [] for j in paired.joints}
    for frame in paired.pairs:
        for joint in paired.joints:
            a, b = frame[joint]
            if a.visible and b.visible:
                errors[joint].append(math.hypot(a.x - b.x, a.y - b.y))
            else:
                errors[joint].append(None)
    return ErrorSeries(
        joints=paired.joints, indices=list(paired.indices), times_ms=list(paired.times_ms), errors=errors
    )


def _quantile(sorted_vals: Sequence[float], q: float) -> float:
    """Linear-interpolation quantile of an ascending sequence."""
    n = len(sorted_vals)
    if n == 1:
        return sorted_vals[0]
    pos = q * (n - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    return sorted_vals[lo] * (1 - frac) + sorted_vals[hi] * frac


@dataclass
class MetricBlock:
    mean: float
    median: float
    rmse: float
    pck: Dict[float, float]
    compared: int
    unavailable: int


@dataclass
class Summary:
    per_joint: Dict[str, MetricBlock]
    overall: MetricBlock
    pck_thresholds: Tuple[float, ...]

    def to_json_dict(self) -> dict:
        def block(b: MetricBlock) -> dict:
            return {
                "mean": b.mean,
                "median": b.median,
                "rmse": b.rmse,
                "pck": {repr(float(t)): v for t, v in b.pck.items()},
                "compared": b.compared,
                "unavailable": b.unavailable,
            }

        return {
            "pck_thresholds": list(self.pck_thresholds),
            "per_joint": {j: block(b) for j, b in self.per_joint.items()},
            "overall": block(self.overall),
        }

    def to_table(self) -> str:
        headers = ["joint", "mean", "median", "rmse"]
        headers += [f"pck@{t:g}" for t in self.pck_thresholds]
        headers += ["compared", "missing"]
        rows = []
        for joint, b in list(self.per_joint.items()) + [("overall", self.overall)]:
            row = [joint, f"{b.mean:.3f}", f"{b.median:.3f}", f"{b.rmse:.3f}"]
            row += [f"{b.pck[t]:.3f}" for t in self.pck_thresholds]
            row += [str(b.compared), str(b.unavailable)]
            rows.append(row)
        widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
        for r in rows:
            lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
        return "\n".join(lines)


def _metrics(values: List[float], total: int, thresholds: Sequence[float]) -> MetricBlock:
    n = len(values)
    mean = math.fsum(values) / n
    s = sorted(values)
    mid = n // 2
    median = s[mid] if n % 2 else (s[mid - 1] + s[mid]) / 2
    rmse = math.sqrt(math.fsum(v * v for v in values) / n)
    pck = {float(t): sum(1 for v in values if v <= t) / n for t in thresholds}
    return MetricBlock(mean=mean, median=median, rmse=rmse, pck=pck, compared=n, unavailable=total - n)


def summarize(err: ErrorSeries, pck_thresholds: Sequence[float] = DEFAULT_PCK_THRESHOLDS) -> Summary:
    """Aggregate available errors per joint and pooled overall.

    PCK@t is the fraction of available errors <= t; unavailable frames are
    excluded from every aggregate and reported as counts.
    """
    per_joint = {}
    pooled: List[float] = []
    pooled_total = 0
    for joint in err.joints:
        vals = [v for v in err.errors[joint] if v is not None]
        total = len(err.errors[joint])
        pooled_total += total
        pooled.extend(vals)
        if vals:
            per_joint[joint] = _metrics(vals, total, pck_thresholds)
        else:
            per_joint[joint] = MetricBlock(
                mean=math.nan,
                median=math.nan,
                rmse=math.nan,
                pck={float(t): math.nan for t in pck_thresholds},
                compared=0,
                unavailable=total,
            )
    if not pooled:
        raise EvalError("no available errors: every frame has an invisible side")
    overall = _metrics(pooled, pooled_total, pck_thresholds)
    return Summary(per_joint=per_joint, overall=overall, pck_thresholds=tuple(float(t) for t in pck_thresholds))


def export_trajectories(series_list: Sequence[GroundTruthDoc], joint: str) -> str:
    """Long-format CSV (frame,time_ms,producer,x,y) for one joint across producers.

    Invisible frames keep their row with empty coordinate cells so gaps
    stay visible when plotting.
    """
    for doc in series_list:
        if joint not in doc.joints:
            raise EvalError(f"unknown joint label {joint!r} for producer {doc.meta.producer}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frame", "time_ms", "producer", "x", "y"])
    for doc in series_list:
        for fr in doc.frames:
            kp = fr.points[joint]
            x = "" if kp.x is None else repr(float(kp.x))
            y = "" if kp.y is None else repr(float(kp.y))
            w.writerow([fr.index, repr(float(fr.time_ms)), doc.meta.producer, x, y])
    return buf.getvalue()


def flag_outlier_frames(err: ErrorSeries, k: float = 3.0) -> Dict[str, List[int]]:
    """Frames whose error exceeds median + k*IQR, per joint.

    Surfaces cloth-bulge style failures for visual review.  Joints with
    fewer than 4 available errors are skipped; an entirely too-short
    series is an error.
    """
    available_total = sum(1 for j in err.joints for v in err.errors[j] if v is not None)
    if available_total < 4:
        raise EvalError(f"need at least 4 available errors, have {available_total}")
    flagged: Dict[str, List[int]] = {}
    for joint in err.joints:
        vals = [(i, v) for i, v in zip(err.indices, err.errors[joint]) if v is not None]
        if len(vals) < 4:
            flagged[joint] = []
            continue
        s = sorted(v for _, v in vals)
        iqr = _quantile(s, 0.75) - _quantile(s, 0.25)
        cutoff = _quantile(s, 0.5) + k * iqr
        flagged[joint] = [i for i, v in vals if v > cutoff]
    return flagged
