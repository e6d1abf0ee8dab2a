"""Sample assembly, canonical manifests, and whole-dataset validation.

Manifests are JSONL with one canonical JSON object per line (sorted keys,
floats at 9 significant digits), so equal content means equal bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from pointsynth.dataset import (
    KeyframeRecord,
    Sample,
    assemble_sample,
    canonical_dumps,
    manifest_header,
    read_manifest,
    template_instruction,
    validate_dataset,
    write_manifest,
)
from pointsynth.errors import (
    EmptyDataset,
    InconsistentSample,
    ManifestError,
    UnknownSample,
    UnknownTaskType,
)
from pointsynth.features import KeypointFrame, discretize_coord, encode_feature
from pointsynth.grounding import GroundedTarget, TaskPlan
from pointsynth.motion import GestureTrajectory, make_pointing_pose


def _target(order: int = 0, idx: int = 0, role: str = "pick", u: int = 100, v: int = 200):
    return GroundedTarget(
        candidate_index=idx,
        label="block" if role == "pick" else "plate",
        role=role,
        order=order,
        point_px=(u, v),
        point_norm=(u / 640.0, v / 480.0),
        point_3d=np.array([0.1, 0.05, 1.2]),
        loc_tokens=(discretize_coord(u / 640.0), discretize_coord(v / 480.0)),
    )


def _keypoint_frame(i: int = 0, x: float = 300.0) -> KeypointFrame:
    kp = np.array(
        [[x - 90, 240.0, 0.8], [x - 40, 240.0, 0.9], [x - 20, 240.0, 0.95], [x, 240.0, 1.0]]
    )
    return KeypointFrame(frame_index=i, keypoints=kp)


# ── instruction templates ────────────────────────────────────────────────


class TestTemplates:
    def test_fixed_strings(self):
        assert template_instruction(0, 1) == "Pick this up and put it there."
        assert template_instruction(1, 2) == "Pick these up in order and put them there."

    def test_unknown_type(self):
        with pytest.raises(UnknownTaskType):
            template_instruction(7, 1)

    def test_bad_pick_count(self):
        with pytest.raises(ValueError):
            template_instruction(0, 0)


# ── canonical JSON ───────────────────────────────────────────────────────


class TestCanonicalDumps:
    def test_frozen_layout(self):
        """Keys sort, no spaces, null/true literals, bare ints."""
        value = {"b": 1, "a": [1.5, "x", None, True]}
        assert canonical_dumps(value) == '{"a":[1.5,"x",null,true],"b":1}'

    def test_float_formatting(self):
        # .9g drops the trailing zeros of exact values and caps precision
        assert canonical_dumps(2.0) == "2"
        assert canonical_dumps(0.1) == "0.1"
        assert canonical_dumps(1.0 / 3.0) == "0.333333333"
        assert canonical_dumps(-0.25) == "-0.25"

    def test_numpy_scalars(self):
        assert canonical_dumps({"n": np.int64(3), "x": np.float64(0.5)}) == '{"n":3,"x":0.5}'

    def test_bool_is_not_int(self):
        assert canonical_dumps([True, 1]) == "[true,1]"

    def test_stable_under_round_trip(self):
        value = {"z": [0.333333333, {"k": 2.0}], "a": "s", "n": None}
        once = canonical_dumps(value)
        assert canonical_dumps(json.loads(once)) == once

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            canonical_dumps(float("nan"))
        with pytest.raises(ValueError):
            canonical_dumps({"x": float("inf")})

    def test_non_string_key_rejected(self):
        with pytest.raises(ValueError):
            canonical_dumps({1: "x"})

    def test_unsupported_type_rejected(self):
        with pytest.raises(ValueError):
            canonical_dumps({"x": {1, 2}})


# ── record round trips ───────────────────────────────────────────────────


class TestRecords:
    def test_keyframe_record_round_trip(self):
        frame = _keypoint_frame(5)
        rec = KeyframeRecord(
            frame=5, keypoints=frame.keypoints, feature=encode_feature(frame, 640, 480)
        )
        back = KeyframeRecord.from_record(json.loads(canonical_dumps(rec.to_record())))
        assert back.frame == 5
        np.testing.assert_allclose(back.keypoints, rec.keypoints, atol=1e-7)
        np.testing.assert_allclose(back.feature, rec.feature, atol=1e-7)

    def test_sample_round_trip(self):
        frame = _keypoint_frame(15)
        sample = Sample(
            sample_id="s01",
            scene_id="scene_000",
            task_type=0,
            instruction=template_instruction(0, 1),
            frames_dir="frames/s01",
            num_frames=19,
            image_size=(640, 480),
            keyframes=[
                KeyframeRecord(
                    frame=15, keypoints=frame.keypoints, feature=encode_feature(frame, 640, 480)
                )
            ],
            supervision=[_target(0, 2, "pick"), _target(1, 5, "place", u=500, v=300)],
            meta={"seed": 7},
        )
        back = Sample.from_record(json.loads(canonical_dumps(sample.to_record())))
        assert back.sample_id == "s01"
        assert back.image_size == (640, 480)
        assert [t.order for t in back.supervision] == [0, 1]
        assert back.supervision[1].role == "place"
        assert back.meta == {"seed": 7}


# ── sample assembly ──────────────────────────────────────────────────────


class TestAssembleSample:
    def _traj(self, n: int = 19, holds=((0, 13, 18),)) -> GestureTrajectory:
        pose = make_pointing_pose(
            np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]), np.array([0.0, -1.0, 0.0])
        )
        return GestureTrajectory(frames=[pose] * n, holds=[tuple(h) for h in holds])

    def _frames_on_disk(self, root: Path, n: int = 19) -> str:
        d = root / "frames" / "s"
        d.mkdir(parents=True)
        for i in range(n):
            (d / f"{i:04d}.png").write_bytes(b"")
        return "frames/s"

    def _assemble(self, root: Path, **overrides):
        kw = dict(
            sample_id="s",
            scene_id="scene_000",
            task_type=0,
            instruction=template_instruction(0, 1),
            image_size=(640, 480),
            trajectory=self._traj(),
            keyframe_indices=[15],
            keypoint_frames=[_keypoint_frame(i) for i in range(19)],
            plan=TaskPlan(scene_id="scene_000", task_type=0, targets=[_target(0)]),
            dataset_dir=root,
            frames_dir="frames/s",
            meta={},
        )
        kw.update(overrides)
        return assemble_sample(**kw)

    def test_happy_path(self, tmp_path):
        self._frames_on_disk(tmp_path)
        sample = self._assemble(tmp_path)
        assert sample.num_frames == 19
        assert sample.keyframes[0].frame == 15
        expected = encode_feature(_keypoint_frame(15), 640, 480)
        np.testing.assert_allclose(sample.keyframes[0].feature, expected, atol=0)

    def test_keyframe_count_must_match_holds(self, tmp_path):
        self._frames_on_disk(tmp_path)
        with pytest.raises(InconsistentSample, match="keyframes"):
            self._assemble(tmp_path, keyframe_indices=[14, 15])

    def test_keyframe_must_sit_inside_its_hold(self, tmp_path):
        self._frames_on_disk(tmp_path)
        with pytest.raises(InconsistentSample, match="span"):
            self._assemble(tmp_path, keyframe_indices=[7])  # hold is 13..18

    def test_holds_must_match_targets(self, tmp_path):
        self._frames_on_disk(tmp_path)
        plan = TaskPlan(
            scene_id="scene_000", task_type=0, targets=[_target(0), _target(1, role="place")]
        )
        with pytest.raises(InconsistentSample, match="targets"):
            self._assemble(tmp_path, plan=plan)

    def test_missing_frame_file(self, tmp_path):
        frames_dir = self._frames_on_disk(tmp_path)
        (tmp_path / frames_dir / "0007.png").unlink()
        with pytest.raises(InconsistentSample, match="0007"):
            self._assemble(tmp_path)


# ── manifest I/O ─────────────────────────────────────────────────────────


class TestManifestIO:
    def _records(self):
        return [{"sample_id": "s00", "num_frames": 19}, {"sample_id": "s01", "num_frames": 35}]

    def test_round_trip(self, tmp_path):
        header = manifest_header(11, "ab" * 8, 2, n_scenes=3)
        path = write_manifest(self._records(), tmp_path, header)
        manifest = read_manifest(path)
        assert manifest.headers[0]["global_seed"] == 11
        assert manifest.headers[0]["n_scenes"] == 3
        assert manifest.sample_ids() == ["s00", "s01"]
        assert manifest.find("s01")["num_frames"] == 35

    def test_unknown_sample(self, tmp_path):
        path = write_manifest(self._records(), tmp_path, manifest_header(0, "x", 2))
        with pytest.raises(UnknownSample):
            read_manifest(path).find("nope")

    def test_byte_layout(self, tmp_path):
        """One canonical line per record, header first, trailing newline."""
        header = manifest_header(0, "deadbeef", 1)
        path = write_manifest([{"sample_id": "s", "z": 2.0, "a": 1}], tmp_path, header)
        expected = canonical_dumps(header) + "\n" + '{"a":1,"sample_id":"s","z":2}' + "\n"
        assert path.read_text() == expected

    def test_concatenated_manifests(self, tmp_path):
        a = write_manifest([{"sample_id": "s00"}], tmp_path / "a", manifest_header(0, "x", 1))
        b = write_manifest([{"sample_id": "s01"}], tmp_path / "b", manifest_header(1, "y", 1))
        merged = tmp_path / "manifest.jsonl"
        merged.write_text(a.read_text() + b.read_text())
        manifest = read_manifest(merged)
        assert len(manifest.headers) == 2
        assert manifest.sample_ids() == ["s00", "s01"]

    def test_missing_file(self, tmp_path):
        with pytest.raises(ManifestError):
            read_manifest(tmp_path / "manifest.jsonl")

    def test_bad_json_names_the_line(self, tmp_path):
        path = tmp_path / "manifest.jsonl"
        path.write_text(canonical_dumps(manifest_header(0, "x", 1)) + "\n{oops\n")
        with pytest.raises(ManifestError, match="line 2"):
            read_manifest(path)

    def test_non_object_line(self, tmp_path):
        path = tmp_path / "manifest.jsonl"
        path.write_text(canonical_dumps(manifest_header(0, "x", 1)) + "\n[1,2]\n")
        with pytest.raises(ManifestError, match="not a JSON object"):
            read_manifest(path)

    def test_record_without_sample_id(self, tmp_path):
        path = tmp_path / "manifest.jsonl"
        path.write_text(canonical_dumps(manifest_header(0, "x", 1)) + '\n{"a":1}\n')
        with pytest.raises(ManifestError, match="sample_id"):
            read_manifest(path)

    def test_duplicate_sample_id(self, tmp_path):
        path = tmp_path / "manifest.jsonl"
        lines = [
            canonical_dumps(manifest_header(0, "x", 2)),
            '{"sample_id":"s"}',
            '{"sample_id":"s"}',
        ]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ManifestError, match="duplicate"):
            read_manifest(path)

    def test_header_count_mismatch(self, tmp_path):
        path = tmp_path / "manifest.jsonl"
        path.write_text(canonical_dumps(manifest_header(0, "x", 5)) + '\n{"sample_id":"s"}\n')
        with pytest.raises(ManifestError, match="declare 5"):
            read_manifest(path)

    def test_headerless_file(self, tmp_path):
        path = tmp_path / "manifest.jsonl"
        path.write_text('{"sample_id":"s"}\n')
        with pytest.raises(ManifestError, match="header"):
            read_manifest(path)


# ── dataset validation ───────────────────────────────────────────────────


def _edit_sample(dataset_dir: Path, index: int, mutate) -> str:
    """Apply `mutate(record)` to the index-th sample line; returns its id."""
    path = dataset_dir / "manifest.jsonl"
    lines = path.read_text().splitlines()
    rec = json.loads(lines[1 + index])  # line 0 is the header
    mutate(rec)
    lines[1 + index] = canonical_dumps(rec)
    path.write_text("\n".join(lines) + "\n")
    return rec["sample_id"]


class TestValidateDataset:
    def test_generated_dataset_is_clean(self, small_dataset):
        out, _ = small_dataset
        report = validate_dataset(out)
        assert report.n_samples == 6
        assert report.ok
        assert report.n_failed == 0

    def test_missing_frame_detected(self, dataset_copy):
        manifest = read_manifest(dataset_copy / "manifest.jsonl")
        rec = manifest.samples[0]
        (dataset_copy / rec["frames_dir"] / "0000.png").unlink()
        report = validate_dataset(dataset_copy)
        assert report.n_failed == 1
        failure = report.failures[0]
        assert failure["sample_id"] == rec["sample_id"]
        assert any("missing frame" in e for e in failure["errors"])

    def test_corrupt_frame_detected(self, dataset_copy):
        rec = read_manifest(dataset_copy / "manifest.jsonl").samples[1]
        (dataset_copy / rec["frames_dir"] / "0000.png").write_bytes(b"junk")
        report = validate_dataset(dataset_copy)
        assert any(
            "not a PNG" in e for f in report.failures for e in f["errors"]
        )

    def test_feature_tamper_detected(self, dataset_copy):
        def mutate(rec):
            rec["keyframes"][0]["feature"][0] += 0.05

        sid = _edit_sample(dataset_copy, 0, mutate)
        report = validate_dataset(dataset_copy)
        assert [f["sample_id"] for f in report.failures] == [sid]
        assert any("feature" in e for e in report.failures[0]["errors"])

    def test_loc_token_tamper_detected(self, dataset_copy):
        def mutate(rec):
            token = rec["supervision"][0]["loc_tokens"][0]
            rec["supervision"][0]["loc_tokens"][0] = (token + 100) % 1024

        _edit_sample(dataset_copy, 2, mutate)
        report = validate_dataset(dataset_copy)
        assert any(
            "loc_token" in e for f in report.failures for e in f["errors"]
        )

    def test_keyframe_order_tamper_detected(self, dataset_copy):
        def mutate(rec):
            rec["keyframes"][0]["frame"] = rec["num_frames"] + 3

        _edit_sample(dataset_copy, 3, mutate)
        report = validate_dataset(dataset_copy)
        assert any(
            "outside the clip" in e for f in report.failures for e in f["errors"]
        )

    def test_supervision_order_tamper_detected(self, dataset_copy):
        def mutate(rec):
            rec["supervision"][0]["order"] = 5

        _edit_sample(dataset_copy, 4, mutate)
        report = validate_dataset(dataset_copy)
        assert any(
            "contiguous" in e for f in report.failures for e in f["errors"]
        )

    def test_empty_manifest_raises(self, tmp_path):
        write_manifest([], tmp_path, manifest_header(0, "x", 0))
        with pytest.raises(EmptyDataset):
            validate_dataset(tmp_path)
