"""Workflow handlers shared by the CLI and the HTTP service.

Each handler validates inputs, runs the corresponding core modules and
writes deterministic outputs; both entry points construct the same
requests and read the same result dicts, so there is exactly one
implementation of every workflow.
"""

import json
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from . import blinksync, evalkit, frameio, groundtruth, leddetect, synthgen
from .errors import DemuxError, InputError

DEMUX_JSON = "demux.json"
DETECTIONS_JSON = "detections.json"


def _read_json(path: Path, what: str):
    if not path.is_file():
        raise InputError(f"{what} not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise InputError(f"malformed {what} {path}: {e}") from None


def run_demux(
    manifest: str,
    out_dir: str,
    on_ms: float = blinksync.DEFAULT_ON_MS,
    off_ms: float = blinksync.DEFAULT_OFF_MS,
    percentile: float = 0.999,
    force_offset: Optional[int] = None,
) -> dict:
    """Demultiplex a HFR manifest into on/off manifests plus demux.json."""
    src = frameio.load_manifest(manifest)
    cfg = blinksync.BlinkConfig(on_ms=on_ms, off_ms=off_ms, fps=src.fps)
    P = cfg.period_frames
    if src.count < P:
        raise DemuxError(f"no complete cycles: {src.count} frames, cycle is {P}")
    sig = blinksync.brightness_signal(src, percentile)
    if force_offset is not None:
        if not 0 <= force_offset < P:
            raise InputError(f"forced offset {force_offset} outside [0, {P})")
        phase = blinksync.PhaseEstimate(offset=force_offset, confidence=1.0)
    else:
        phase = blinksync.estimate_phase(sig, cfg)
    drift = blinksync.check_phase_drift(sig, cfg, phase.offset)
    labels = blinksync.classify_frames(sig, phase, cfg)
    dm = blinksync.demux(src, labels, sig, cfg, phase)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    on_manifest = frameio.write_packed_raw(src, out, "on", dm.on_indices, fps=dm.effective_fps)
    off_manifest = frameio.write_packed_raw(src, out, "off", dm.off_indices, fps=dm.effective_fps)
    demux_doc = dm.to_json_dict()
    demux_doc["source_manifest"] = str(Path(manifest).resolve())
    demux_doc["confidence"] = phase.confidence
    demux_path = out / DEMUX_JSON
    demux_path.write_text(json.dumps(demux_doc, indent=2) + "\n")
    return {
        "period_frames": dm.period_frames,
        "phase_offset": dm.phase_offset,
        "confidence": phase.confidence,
        "effective_fps": dm.effective_fps,
        "cycles": len(dm.on_indices),
        "max_skew_frames": max(dm.skew_frames),
        "drift_warning": drift,
        "on_manifest": str(on_manifest),
        "off_manifest": str(off_manifest),
        "demux_json": str(demux_path),
    }


def load_seeds(path: str) -> Dict[str, Tuple[float, float]]:
    """Per-joint seed positions for frame 0.

    Accepts either the plain seeds layout {"joints": {"left_hip": [x, y],
    ...}} or a keypoint document (e.g. an annotation-session export whose
    first frame was clicked once per joint).
    """
    doc = _read_json(Path(path), "seeds file")
    if isinstance(doc, dict) and "frames" in doc and "meta" in doc:
        parsed = groundtruth.import_doc(doc)
        if not parsed.frames:
            raise InputError(f"seeds document {path} has no frames")
        first = parsed.frames[0]
        return {
            joint: (kp.x, kp.y) for joint, kp in first.points.items() if kp.visible
        }
    if not isinstance(doc, dict) or "joints" not in doc or not isinstance(doc["joints"], dict):
        raise InputError(f"seeds file {path} must look like {{\"joints\": {{\"left_hip\": [x, y], ...}}}}")
    seeds = {}
    for joint, xy in doc["joints"].items():
        if not isinstance(xy, (list, tuple)) or len(xy) != 2:
            raise InputError(f"seed for {joint} must be [x, y]")
        seeds[joint] = (float(xy[0]), float(xy[1]))
    return seeds


def run_detect(
    demux_dir: str,
    seeds_path: str,
    params: leddetect.DetectParams = leddetect.DetectParams(),
    out_path: Optional[str] = None,
    sequence_id: Optional[str] = None,
) -> dict:
    """Auto-detect joint tracks over a demuxed directory, writing a truth doc."""
    demux_dir = Path(demux_dir)
    demux_doc = _read_json(demux_dir / DEMUX_JSON, "demux result")
    dm = blinksync.DemuxResult.from_json_dict(demux_doc)
    source_manifest = demux_doc.get("source_manifest")
    if not source_manifest:
        raise InputError(f"{demux_dir / DEMUX_JSON} does not record its source manifest")
    src = frameio.load_manifest(source_manifest)
    seeds = load_seeds(seeds_path)
    tracks = leddetect.run_detection(dm, src, seeds, params)
    doc = trackset_to_doc(
        tracks,
        effective_fps=dm.effective_fps,
        width=src.width,
        height=src.height,
        sequence_id=sequence_id or Path(source_manifest).stem,
    )
    out = Path(out_path) if out_path else demux_dir / DETECTIONS_JSON
    groundtruth.save_doc(doc, out)
    provenance_counts: Dict[str, int] = {}
    for frame in tracks.frames:
        for pt in frame.values():
            provenance_counts[pt.provenance] = provenance_counts.get(pt.provenance, 0) + 1
    return {
        "detections": str(out),
        "frames": len(tracks.frames),
        "joints": list(tracks.joints),
        "provenance_counts": provenance_counts,
    }


def trackset_to_doc(
    tracks: leddetect.TrackSet,
    effective_fps: float,
    width: int,
    height: int,
    sequence_id: str = "sequence",
    producer: str = "auto-detect",
) -> groundtruth.GroundTruthDoc:
    """Convert a TrackSet to the canonical document on the output timeline."""
    frames = []
    for k, points in enumerate(tracks.frames):
        entry = {}
        for joint in tracks.joints:
            pt = points[joint]
            if pt.visible:
                entry[joint] = groundtruth.Keypoint(x=pt.x, y=pt.y, visible=True)
            else:
                entry[joint] = groundtruth.Keypoint(visible=False)
        frames.append(
            groundtruth.FrameEntry(index=k, time_ms=k / effective_fps * 1000.0, points=entry)
        )
    doc = groundtruth.GroundTruthDoc(
        meta=groundtruth.DocMeta(
            sequence_id=sequence_id,
            effective_fps=effective_fps,
            width=width,
            height=height,
            producer=producer,
        ),
        joints=tracks.joints,
        frames=frames,
    )
    groundtruth.validate_doc(doc)
    return doc


def _load_series(path: str, joint_map: Optional[Mapping[str, str]], frame_map) -> groundtruth.PoseSeries:
    """Load a keypoint series: canonical document or COCO results array."""
    data = _read_json(Path(path), "keypoint series")
    if isinstance(data, list):
        return groundtruth.import_coco_keypoints(data, joint_map=joint_map, frame_map=frame_map)
    return groundtruth.import_doc(data)


def run_eval(
    gt_path: str,
    est_paths: Sequence[str],
    pck_thresholds: Sequence[float] = evalkit.DEFAULT_PCK_THRESHOLDS,
    joint_map: Optional[Mapping[str, str]] = None,
    frame_map: Optional[Mapping[object, int]] = None,
    out_dir: Optional[str] = None,
    outlier_k: float = 3.0,
) -> dict:
    """Evaluate one or more estimate series against ground truth.

    Writes per-joint trajectory CSVs and an outlier list when out_dir is
    given; returns summaries keyed by producer.
    """
    gt = groundtruth.import_doc(_read_json(Path(gt_path), "ground truth document"))
    results = {}
    series_by_producer: Dict[str, groundtruth.PoseSeries] = {}
    for path in est_paths:
        est = _load_series(path, joint_map, frame_map)
        paired = evalkit.align_series(gt, est)
        err = evalkit.per_joint_error(paired)
        summary = evalkit.summarize(err, pck_thresholds)
        outliers = evalkit.flag_outlier_frames(err, outlier_k)
        producer = est.meta.producer
        if producer in series_by_producer:
            producer = f"{producer}:{Path(path).stem}"
        series_by_producer[producer] = est
        results[producer] = {
            "summary": summary.to_json_dict(),
            "table": summary.to_table(),
            "outlier_frames": outliers,
            "paired_frames": len(paired.indices),
            "dropped_gt": paired.dropped_first,
            "dropped_est": paired.dropped_second,
        }

    written: List[str] = []
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        all_series = [gt] + list(series_by_producer.values())
        for joint in gt.joints:
            csv_path = out / f"trajectory_{joint}.csv"
            csv_path.write_text(evalkit.export_trajectories(all_series, joint))
            written.append(str(csv_path))
        summary_path = out / "summary.json"
        summary_path.write_text(
            json.dumps(
                {
                    p: {"summary": r["summary"], "outlier_frames": r["outlier_frames"]}
                    for p, r in results.items()
                },
                indent=2,
            )
            + "\n"
        )
        written.append(str(summary_path))
    return {"producers": results, "written": written}


def run_simulate(
    out_dir: str,
    scene_path: Optional[str] = None,
    noise_sigma: Optional[float] = None,
    seed: Optional[int] = None,
) -> dict:
    """Render a scene to a packed-raw manifest plus truth documents."""
    if scene_path is not None:
        cfg = synthgen.scene_config_from_json(_read_json(Path(scene_path), "scene config"))
    else:
        cfg = synthgen.default_scene()
    if noise_sigma is not None or seed is not None:
        doc = synthgen.scene_config_to_json(cfg)
        if noise_sigma is not None:
            doc["noise_sigma"] = noise_sigma
        if seed is not None:
            doc["seed"] = seed
        cfg = synthgen.scene_config_from_json(doc)
    src, truth = synthgen.simulate(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = frameio.write_packed_raw(src, out, "frames")
    truth_doc = truth.to_ground_truth_doc(sequence_id=out.name or "synthetic")
    truth_path = out / "truth.json"
    groundtruth.save_doc(truth_doc, truth_path)
    scene_truth_path = out / "scene_truth.json"
    scene_truth_path.write_text(json.dumps(truth.to_json_dict()) + "\n")
    seeds = {
        "joints": {j: [truth.positions[j][0][0], truth.positions[j][0][1]] for j in truth.joints}
    }
    seeds_path = out / "seeds.json"
    seeds_path.write_text(json.dumps(seeds, indent=2) + "\n")
    return {
        "manifest": str(manifest),
        "truth": str(truth_path),
        "scene_truth": str(scene_truth_path),
        "seeds": str(seeds_path),
        "frames": src.count,
        "width": src.width,
        "height": src.height,
        "fps": src.fps,
    }
