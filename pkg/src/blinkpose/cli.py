"""Command-line entry point.

Subcommands: demux, detect, eval, simulate, serve.  Each one is a thin
client over the handlers in pipeline (the same ones the HTTP service
exposes under /ops); --server routes an op to a running service instead
of executing in-process.

Exit codes: 0 ok, 1 usage, 2 validation, 3 pipeline failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from . import leddetect, pipeline
from .errors import InputError, PipelineError

log = logging.getLogger("blinkpose")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_PIPELINE = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="blinkpose", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file with default flag values")
    parser.add_argument("--json", action="store_true", help="print machine-readable results")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    parser.add_argument("--server", help="base URL of a running service to execute ops remotely")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demux", help="split a HFR manifest into on/off sequences")
    p.add_argument("manifest")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--on-ms", type=float, default=None)
    p.add_argument("--off-ms", type=float, default=None)
    p.add_argument("--percentile", type=float, default=None)
    p.add_argument("--phase-offset", type=int, default=None, help="skip estimation, force this offset")

    p = sub.add_parser("detect", help="auto-detect LED joint tracks over a demuxed directory")
    p.add_argument("demux_dir")
    p.add_argument("--seeds", required=True, help="JSON seeds file with per-joint [x, y]")
    p.add_argument("--out", default=None, help="detections output path (default <demux_dir>/detections.json)")
    p.add_argument("--threshold", type=int, default=None)
    p.add_argument("--min-area", type=int, default=None)
    p.add_argument("--max-area", type=int, default=None)
    p.add_argument("--gating", type=float, default=None)
    p.add_argument("--max-coast", type=int, default=None)

    p = sub.add_parser("eval", help="compare estimate series against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--est", action="append", required=True, help="estimate path (repeatable); canonical doc or COCO results")
    p.add_argument("--joint-map", default=None, help="JSON {estimator_name: canonical_joint}")
    p.add_argument("--frame-map", default=None, help="JSON {image_id: output_frame}")
    p.add_argument("--pck", default=None, help="comma-separated pixel thresholds (default 5,10,20)")
    p.add_argument("--out", default=None, help="directory for trajectory CSVs and summary JSON")
    p.add_argument("--outlier-k", type=float, default=None)

    p = sub.add_parser("simulate", help="render a synthetic scene with exact truth")
    p.add_argument("--scene", default=None, help="scene config JSON (default: built-in 6-LED scene)")
    p.add_argument("--out", required=True)
    p.add_argument("--noise", type=float, default=None, help="override noise sigma")
    p.add_argument("--seed", type=int, default=None, help="override RNG seed")

    p = sub.add_parser("serve", help="run the annotation service until interrupted")
    p.add_argument("demux_dir", nargs="?", default=".", help="directory whose manifests will be annotated")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8710)
    p.add_argument("--data", default=None, help="session store directory (default <demux_dir>/sessions)")
    p.add_argument("--ui", default=None, help="directory of built UI assets to serve at /")
    return parser


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise InputError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise InputError(f"malformed config {p}: {e}") from None
    if not isinstance(doc, dict):
        raise InputError(f"config {p} must be a JSON object")
    return doc


def _pick(flag_value, config: dict, key: str, default):
    """CLI flag beats config file beats built-in default."""
    if flag_value is not None:
        return flag_value
    if key in config:
        return config[key]
    return default


def _remote(server: str, op: str, payload: dict) -> dict:
    import httpx

    url = server.rstrip("/") + "/ops/" + op
    resp = httpx.post(url, json=payload, timeout=600.0)
    if resp.status_code != 200:
        try:
            message = resp.json().get("error", resp.text)
        except ValueError:
            message = resp.text
        raise PipelineError(f"server {op} failed ({resp.status_code}): {message}")
    return resp.json()


def _cmd_demux(args, config: dict) -> dict:
    payload = {
        "manifest": args.manifest,
        "out_dir": args.out,
        "on_ms": _pick(args.on_ms, config, "on_ms", 10.0),
        "off_ms": _pick(args.off_ms, config, "off_ms", 23.333),
        "percentile": _pick(args.percentile, config, "percentile", 0.999),
        "force_offset": args.phase_offset,
    }
    if args.server:
        return _remote(args.server, "demux", payload)
    return pipeline.run_demux(
        payload["manifest"],
        payload["out_dir"],
        on_ms=payload["on_ms"],
        off_ms=payload["off_ms"],
        percentile=payload["percentile"],
        force_offset=payload["force_offset"],
    )


def _cmd_detect(args, config: dict) -> dict:
    params = {
        "threshold": int(_pick(args.threshold, config, "threshold", 50)),
        "min_area": int(_pick(args.min_area, config, "min_area", 4)),
        "max_area": int(_pick(args.max_area, config, "max_area", 2000)),
        "gating_radius": float(_pick(args.gating, config, "gating_radius", 40.0)),
        "max_coast": int(_pick(args.max_coast, config, "max_coast", 5)),
    }
    if args.server:
        return _remote(
            args.server,
            "detect",
            {"demux_dir": args.demux_dir, "seeds": args.seeds, "params": params, "out_path": args.out},
        )
    return pipeline.run_detect(
        args.demux_dir, args.seeds, leddetect.DetectParams(**params), args.out
    )


def _parse_thresholds(text: Optional[str], config: dict) -> List[float]:
    raw = text if text is not None else config.get("pck_thresholds")
    if raw is None:
        return [5.0, 10.0, 20.0]
    if isinstance(raw, list):
        return [float(t) for t in raw]
    try:
        return [float(t) for t in str(raw).split(",") if t.strip() != ""]
    except ValueError:
        raise InputError(f"bad PCK threshold list {raw!r}") from None


def _cmd_eval(args, config: dict) -> dict:
    thresholds = _parse_thresholds(args.pck, config)
    joint_map = None
    if args.joint_map:
        joint_map = json.loads(Path(args.joint_map).read_text())
    frame_map = None
    if args.frame_map:
        raw = json.loads(Path(args.frame_map).read_text())
        frame_map = {int(k): int(v) for k, v in raw.items()}
    if args.server:
        return _remote(
            args.server,
            "eval",
            {
                "gt": args.gt,
                "estimates": args.est,
                "pck_thresholds": thresholds,
                "joint_map": joint_map,
                "out_dir": args.out,
                "outlier_k": _pick(args.outlier_k, config, "outlier_k", 3.0),
            },
        )
    return pipeline.run_eval(
        args.gt,
        args.est,
        pck_thresholds=thresholds,
        joint_map=joint_map,
        frame_map=frame_map,
        out_dir=args.out,
        outlier_k=_pick(args.outlier_k, config, "outlier_k", 3.0),
    )


def _cmd_simulate(args, config: dict) -> dict:
    if args.server:
        return _remote(
            args.server,
            "simulate",
            {"out_dir": args.out, "scene": args.scene, "noise_sigma": args.noise, "seed": args.seed},
        )
    return pipeline.run_simulate(args.out, scene_path=args.scene, noise_sigma=args.noise, seed=args.seed)


def _cmd_serve(args, config: dict) -> dict:
    import uvicorn

    from .service import create_app

    data = args.data or str(Path(args.demux_dir) / "sessions")
    ui = args.ui
    if ui is None:
        bundled = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
        if bundled.is_dir():
            ui = str(bundled)
    app = create_app(data, ui_dir=ui)
    log.info("serving on http://%s:%d (sessions in %s)", args.host, args.port, data)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return {}


def _print_result(command: str, result: dict, as_json: bool):
    if as_json:
        print(json.dumps(result, indent=2))
        return
    if command == "demux":
        print(
            f"period {result['period_frames']} frames, offset {result['phase_offset']} "
            f"(confidence {result['confidence']:.3f}), {result['cycles']} cycles at "
            f"{result['effective_fps']:g} fps, max skew {result['max_skew_frames']} frames"
        )
        if result.get("drift_warning"):
            print("warning: sliding-window phase estimates disagree; check for clock drift")
        print(f"wrote {result['on_manifest']}, {result['off_manifest']}, {result['demux_json']}")
    elif command == "detect":
        counts = ", ".join(f"{k}={v}" for k, v in sorted(result["provenance_counts"].items()))
        print(f"tracked {len(result['joints'])} joints over {result['frames']} frames ({counts})")
        print(f"wrote {result['detections']}")
    elif command == "eval":
        for producer, r in result["producers"].items():
            print(f"== {producer} ({r['paired_frames']} paired frames, "
                  f"{r['dropped_gt']}+{r['dropped_est']} dropped)")
            print(r["table"])
            outliers = {j: f for j, f in r["outlier_frames"].items() if f}
            if outliers:
                print(f"outlier frames: {outliers}")
        for path in result["written"]:
            print(f"wrote {path}")
    elif command == "simulate":
        print(
            f"rendered {result['frames']} frames of {result['width']}x{result['height']} "
            f"at {result['fps']:g} fps"
        )
        for key in ("manifest", "truth", "scene_truth", "seeds"):
            print(f"wrote {result[key]}")


_COMMANDS = {
    "demux": _cmd_demux,
    "detect": _cmd_detect,
    "eval": _cmd_eval,
    "simulate": _cmd_simulate,
    "serve": _cmd_serve,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _load_config(args.config)
        result = _COMMANDS[args.command](args, config)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except PipelineError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PIPELINE
    except KeyboardInterrupt:
        return EXIT_OK
    except Exception as e:  # noqa: BLE001 - surfaced with module context
        if args.verbose:
            raise
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_PIPELINE
    _print_result(args.command, result, args.json)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
