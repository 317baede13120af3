import json

import numpy as np
import pytest

from blinkpose import groundtruth as gt
from blinkpose.errors import SchemaError


def random_doc(rng, n_frames=10, producer="auto-detect", with_confidence=False):
    joints = gt.CANONICAL_JOINTS
    frames = []
    for k in range(n_frames):
        points = {}
        for j in joints:
            if rng.random() < 0.15:
                points[j] = gt.Keypoint(visible=False)
            else:
                conf = float(rng.integers(1, 100)) / 100 if with_confidence else None
                points[j] = gt.Keypoint(
                    x=float(rng.integers(0, 640 * 16)) / 16,
                    y=float(rng.integers(0, 480 * 16)) / 16,
                    visible=True,
                    confidence=conf,
                )
        frames.append(gt.FrameEntry(index=k, time_ms=k / 30 * 1000.0, points=points))
    return gt.GroundTruthDoc(
        meta=gt.DocMeta(sequence_id="seq", effective_fps=30.0, width=640, height=480, producer=producer),
        joints=joints,
        frames=frames,
    )


class TestRoundTrip:
    def test_random_docs_round_trip_losslessly(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            doc = random_doc(rng, n_frames=int(rng.integers(1, 30)), with_confidence=True)
            back = gt.import_doc(gt.export_doc(doc))
            assert back == doc

    def test_round_trip_through_json_text(self):
        doc = random_doc(np.random.default_rng(1))
        text = json.dumps(gt.export_doc(doc))
        assert gt.import_doc(text) == doc

    def test_save_and_load(self, tmp_path):
        doc = random_doc(np.random.default_rng(2))
        path = tmp_path / "doc.json"
        gt.save_doc(doc, path)
        assert gt.load_doc(path) == doc


class TestValidation:
    def valid_dict(self):
        return gt.export_doc(random_doc(np.random.default_rng(3), n_frames=4))

    def test_frames_out_of_order(self):
        d = self.valid_dict()
        d["frames"][1]["index"] = d["frames"][0]["index"]
        with pytest.raises(SchemaError, match=r"frames\[1\].index.*not increasing"):
            gt.import_doc(d)

    def test_invisible_with_coordinates(self):
        d = self.valid_dict()
        d["frames"][0]["points"]["left_hip"] = {"visible": False, "x": 1.0, "y": 2.0}
        with pytest.raises(SchemaError, match=r"frames\[0\].points.left_hip"):
            gt.import_doc(d)

    def test_missing_joint_in_frame(self):
        d = self.valid_dict()
        del d["frames"][2]["points"]["right_knee"]
        with pytest.raises(SchemaError, match=r"frames\[2\].points"):
            gt.import_doc(d)

    def test_extra_joint_in_frame(self):
        d = self.valid_dict()
        d["frames"][0]["points"]["tail"] = {"x": 1.0, "y": 1.0, "visible": True}
        with pytest.raises(SchemaError, match=r"frames\[0\].points"):
            gt.import_doc(d)

    def test_confidence_out_of_range(self):
        d = self.valid_dict()
        for j, entry in d["frames"][0]["points"].items():
            if entry["visible"]:
                entry["confidence"] = 1.5
                break
        with pytest.raises(SchemaError, match="confidence"):
            gt.import_doc(d)

    def test_visible_point_without_coordinates(self):
        d = self.valid_dict()
        d["frames"][0]["points"]["left_hip"] = {"visible": True}
        with pytest.raises(SchemaError, match=r"frames\[0\].points.left_hip"):
            gt.import_doc(d)

    def test_empty_producer(self):
        d = self.valid_dict()
        d["meta"]["producer"] = ""
        with pytest.raises(SchemaError, match="meta.producer"):
            gt.import_doc(d)

    def test_missing_meta_field(self):
        d = self.valid_dict()
        del d["meta"]["effective_fps"]
        with pytest.raises(SchemaError, match="meta.effective_fps"):
            gt.import_doc(d)

    def test_single_field_corruptions_all_rejected_with_field_path(self):
        corruptions = [
            (("meta", "width"), 0, "meta.width"),
            (("meta", "effective_fps"), -1, "meta.effective_fps"),
            (("frames", 1, "time_ms"), -5.0, "frames[1].time_ms"),
            (("frames", 0, "index"), -1, "frames[0].index"),
        ]
        for path, value, expect in corruptions:
            d = self.valid_dict()
            target = d
            for key in path[:-1]:
                target = target[key]
            target[path[-1]] = value
            with pytest.raises(SchemaError) as err:
                gt.import_doc(d)
            assert expect in str(err.value)


class TestCsvExport:
    def test_columns_and_invisible_cells(self):
        doc = random_doc(np.random.default_rng(4), n_frames=3)
        doc.frames[1].points["left_knee"] = gt.Keypoint(visible=False)
        text = gt.doc_to_csv(doc)
        lines = text.strip().split("\n")
        assert lines[0] == "frame,time_ms,joint,x,y,visible,producer"
        assert len(lines) == 1 + 3 * len(doc.joints)
        knee_row = [l for l in lines if l.startswith("1,") and ",left_knee," in l][0]
        parts = knee_row.split(",")
        assert parts[3] == "" and parts[4] == "" and parts[5] == "false"


class TestCocoImport:
    def entry(self, image_id, overrides=None, score=0.9):
        kps = []
        for i, name in enumerate(gt.COCO17_KEYPOINTS):
            kps.extend([10.0 * i, 20.0 * i, 0.5])
        if overrides:
            for name, triplet in overrides.items():
                i = gt.COCO17_KEYPOINTS.index(name)
                kps[3 * i : 3 * i + 3] = list(triplet)
        return {"image_id": image_id, "keypoints": kps, "score": score}

    def test_left_knee_is_the_13th_keypoint(self):
        results = [self.entry(0, {"left_knee": (120.5, 300.2, 0.91)})]
        series = gt.import_coco_keypoints(results)
        kp = series.frames[0].points["left_knee"]
        assert (kp.x, kp.y, kp.confidence) == (120.5, 300.2, 0.91)
        assert kp.visible

    def test_zero_triplet_means_invisible(self):
        results = [self.entry(0, {"right_ankle": (0.0, 0.0, 0.0)})]
        series = gt.import_coco_keypoints(results)
        kp = series.frames[0].points["right_ankle"]
        assert not kp.visible and kp.x is None

    def test_joint_map_must_cover_canonical_joints(self):
        with pytest.raises(SchemaError, match="joint_map missing canonical joint"):
            gt.import_coco_keypoints([self.entry(0)], joint_map={"left_hip": "left_hip"})

    def test_unmapped_frame_id(self):
        with pytest.raises(SchemaError, match="unmapped frame id"):
            gt.import_coco_keypoints([self.entry(5)], frame_map={0: 0})

    def test_frame_map_applied(self):
        series = gt.import_coco_keypoints([self.entry("clip_000007")], frame_map={"clip_000007": 7})
        assert series.frames[0].index == 7

    def test_highest_score_entry_wins_per_image(self):
        low = self.entry(0, {"left_knee": (1.0, 1.0, 0.2)}, score=0.3)
        high = self.entry(0, {"left_knee": (9.0, 9.0, 0.8)}, score=0.9)
        series = gt.import_coco_keypoints([low, high])
        assert series.frames[0].points["left_knee"].x == 9.0

    def test_bad_keypoints_length(self):
        bad = {"image_id": 0, "keypoints": [1.0, 2.0, 0.5], "score": 1.0}
        with pytest.raises(SchemaError, match="keypoints"):
            gt.import_coco_keypoints([bad])

    def test_full_round_trip_export_import(self):
        rng = np.random.default_rng(5)
        doc = random_doc(rng, n_frames=12, producer="estimator:test", with_confidence=True)
        coco = gt.export_coco_keypoints(doc)
        back = gt.import_coco_keypoints(coco, meta=doc.meta)
        for a, b in zip(doc.frames, back.frames):
            assert a.index == b.index
            for j in doc.joints:
                ka, kb = a.points[j], b.points[j]
                assert ka.visible == kb.visible
                if ka.visible:
                    assert (ka.x, ka.y, ka.confidence) == (kb.x, kb.y, kb.confidence)
