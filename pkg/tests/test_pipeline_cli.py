import json

import numpy as np
import pytest

from blinkpose import cli, frameio, groundtruth
from blinkpose.cli import EXIT_OK, EXIT_PIPELINE, EXIT_USAGE, EXIT_VALIDATION


def run_cli(*argv):
    return cli.main(list(argv))


@pytest.fixture(scope="module")
def workflow(tmp_path_factory):
    """simulate -> demux -> detect once; several tests read the outputs."""
    root = tmp_path_factory.mktemp("flow")
    scene_dir, demux_dir = root / "scene", root / "demux"
    assert run_cli("simulate", "--out", str(scene_dir)) == EXIT_OK
    assert run_cli("demux", str(scene_dir / "frames.json"), "--out", str(demux_dir)) == EXIT_OK
    assert run_cli("detect", str(demux_dir), "--seeds", str(scene_dir / "seeds.json")) == EXIT_OK
    return root


class TestWorkflow:
    def test_simulate_outputs(self, workflow):
        scene = workflow / "scene"
        for name in ("frames.json", "frames.raw", "truth.json", "scene_truth.json", "seeds.json"):
            assert (scene / name).is_file()
        src = frameio.load_manifest(scene / "frames.json")
        assert src.count == 160

    def test_demux_outputs(self, workflow):
        demux = workflow / "demux"
        doc = json.loads((demux / "demux.json").read_text())
        assert doc["period_frames"] == 8
        assert len(doc["cycles"]) == 20
        assert doc["effective_fps"] == 30.0
        on = frameio.load_manifest(demux / "on.json")
        off = frameio.load_manifest(demux / "off.json")
        assert on.count == off.count == 20
        assert on.fps == 30.0

    def test_detect_output_validates(self, workflow):
        doc = groundtruth.load_doc(workflow / "demux" / "detections.json")
        assert doc.meta.producer == "auto-detect"
        assert len(doc.frames) == 20

    def test_eval_end_to_end_rmse_below_half_pixel(self, workflow, capsys):
        out = workflow / "eval"
        code = run_cli(
            "--json", "eval",
            "--gt", str(workflow / "scene" / "truth.json"),
            "--est", str(workflow / "demux" / "detections.json"),
            "--out", str(out),
        )
        assert code == EXIT_OK
        result = json.loads(capsys.readouterr().out)
        summary = result["producers"]["auto-detect"]["summary"]
        assert summary["overall"]["rmse"] <= 0.5
        assert summary["overall"]["compared"] == 120
        for joint in groundtruth.CANONICAL_JOINTS:
            csv_path = out / f"trajectory_{joint}.csv"
            assert csv_path.is_file()
            lines = csv_path.read_text().strip().split("\n")
            assert len(lines) == 1 + 2 * 20  # truth + detections
        assert (out / "summary.json").is_file()

    def test_demux_rerun_is_byte_identical(self, workflow, tmp_path):
        manifest = workflow / "scene" / "frames.json"
        out1, out2 = tmp_path / "d1", tmp_path / "d2"
        assert run_cli("demux", str(manifest), "--out", str(out1)) == EXIT_OK
        assert run_cli("demux", str(manifest), "--out", str(out2)) == EXIT_OK
        for name in ("on.raw", "off.raw", "on.json", "off.json", "demux.json"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_forced_phase_offset_matches_estimate(self, workflow, tmp_path, capsys):
        manifest = workflow / "scene" / "frames.json"
        est = json.loads((workflow / "demux" / "demux.json").read_text())
        out = tmp_path / "forced"
        code = run_cli("--json", "demux", str(manifest), "--out", str(out),
                       "--phase-offset", str(est["phase_offset"]))
        assert code == EXIT_OK
        forced = json.loads(capsys.readouterr().out)
        assert forced["phase_offset"] == est["phase_offset"]
        assert (out / "on.raw").read_bytes() == (workflow / "demux" / "on.raw").read_bytes()


class TestExitCodes:
    def test_usage_error_unknown_flag(self):
        assert run_cli("demux", "--bogus") == EXIT_USAGE

    def test_usage_error_no_command(self):
        assert run_cli() == EXIT_USAGE

    def test_validation_error_missing_manifest(self, tmp_path):
        assert run_cli("demux", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")) == EXIT_VALIDATION

    def test_pipeline_error_no_complete_cycles(self, tmp_path, capsys):
        frames = np.zeros((7, 8, 8), dtype=np.uint8)
        src = frameio.FrameSource.from_array(frames, 240.0)
        manifest = frameio.write_packed_raw(src, tmp_path, "short")
        code = run_cli("demux", str(manifest), "--out", str(tmp_path / "out"))
        assert code == EXIT_PIPELINE
        assert "no complete cycles" in capsys.readouterr().err

    def test_pipeline_error_disjoint_eval(self, tmp_path, capsys, default_sim):
        cfg, srcf, truth = default_sim
        doc = truth.to_ground_truth_doc()
        a = tmp_path / "a.json"
        groundtruth.save_doc(doc, a)
        shifted = groundtruth.GroundTruthDoc(
            meta=doc.meta,
            joints=doc.joints,
            frames=[
                groundtruth.FrameEntry(index=f.index + 1000, time_ms=f.time_ms, points=f.points)
                for f in doc.frames
            ],
        )
        b = tmp_path / "b.json"
        groundtruth.save_doc(shifted, b)
        code = run_cli("eval", "--gt", str(a), "--est", str(b))
        assert code == EXIT_PIPELINE
        assert "no overlapping frames" in capsys.readouterr().err

    def test_validation_error_bad_seeds(self, tmp_path, workflow):
        seeds = tmp_path / "seeds.json"
        seeds.write_text(json.dumps({"joints": {"left_hip": [1]}}))
        code = run_cli("detect", str(workflow / "demux"), "--seeds", str(seeds))
        assert code == EXIT_VALIDATION

    def test_seeds_accept_annotation_document(self, tmp_path, workflow):
        # a session export whose frame 0 was clicked works as the seeds file
        detections = workflow / "demux" / "detections.json"
        out = tmp_path / "from_doc.json"
        code = run_cli(
            "detect", str(workflow / "demux"),
            "--seeds", str(detections), "--out", str(out),
        )
        assert code == EXIT_OK
        assert groundtruth.load_doc(out).frames

    def test_validation_error_bad_pck_list(self, workflow):
        code = run_cli(
            "eval", "--gt", str(workflow / "scene" / "truth.json"),
            "--est", str(workflow / "demux" / "detections.json"), "--pck", "5,ten",
        )
        assert code == EXIT_VALIDATION


class TestConfigFile:
    def test_config_supplies_defaults_and_flags_override(self, tmp_path, workflow, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"pck_thresholds": [2, 4]}))
        code = run_cli(
            "--config", str(config), "--json", "eval",
            "--gt", str(workflow / "scene" / "truth.json"),
            "--est", str(workflow / "demux" / "detections.json"),
        )
        assert code == EXIT_OK
        result = json.loads(capsys.readouterr().out)
        summary = result["producers"]["auto-detect"]["summary"]
        assert summary["pck_thresholds"] == [2.0, 4.0]

    def test_missing_config_is_validation_error(self, tmp_path):
        assert run_cli("--config", str(tmp_path / "none.json"), "simulate", "--out", str(tmp_path / "o")) == EXIT_VALIDATION


class TestCocoEval:
    def test_eval_accepts_coco_results(self, tmp_path, workflow, capsys):
        doc = groundtruth.load_doc(workflow / "demux" / "detections.json")
        coco = groundtruth.export_coco_keypoints(doc)
        est = tmp_path / "coco.json"
        est.write_text(json.dumps(coco))
        code = run_cli(
            "--json", "eval",
            "--gt", str(workflow / "scene" / "truth.json"), "--est", str(est),
        )
        assert code == EXIT_OK
        result = json.loads(capsys.readouterr().out)
        (producer,) = result["producers"].keys()
        assert producer.startswith("estimator:")
