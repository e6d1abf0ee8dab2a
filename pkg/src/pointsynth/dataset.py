"""Sample assembly, canonical JSONL manifests, and dataset validation.

Manifests must be byte-reproducible, so records are serialized in a canonical
form: keys sorted, floats at 9 significant digits, no whitespace variance.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptyDataset,
    InconsistentSample,
    ManifestError,
    UnknownSample,
    UnknownTaskType,
)
from .features import KeypointFrame, encode_feature, undiscretize_coord
from .grounding import GroundedTarget, TaskPlan
from .motion import GestureTrajectory

GENERATOR_VERSION = "0.1.0"

_TEMPLATES = {
    0: "Pick this up and put it there.",
    1: "Pick these up in order and put them there.",
}


def template_instruction(task_type: int, n_picks: int) -> str:
    """Fixed instruction text per task type (the dataset's language modality)."""
    if task_type not in _TEMPLATES:
        raise UnknownTaskType(f"task type {task_type} not in the template table")
    if n_picks < 1:
        raise ValueError("n_picks must be >= 1")
    return _TEMPLATES[task_type]


# --- canonical JSON ----------------------------------------------------------


def _canon(value, out: list[str]) -> None:
    if value is None:
        out.append("null")
    elif isinstance(value, bool):
        out.append("true" if value else "false")
    elif isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        f = float(value)
        if not math.isfinite(f):
            raise ValueError(f"non-finite float {f!r} cannot be serialized")
        out.append(format(f, ".9g"))
    elif isinstance(value, str):
        out.append(json.dumps(value, ensure_ascii=True))
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, item in enumerate(value):
            if i:
                out.append(",")
            _canon(item, out)
        out.append("]")
    elif isinstance(value, dict):
        out.append("{")
        for i, key in enumerate(sorted(value)):
            if not isinstance(key, str):
                raise ValueError(f"non-string key {key!r}")
            if i:
                out.append(",")
            out.append(json.dumps(key, ensure_ascii=True))
            out.append(":")
            _canon(value[key], out)
        out.append("}")
    else:
        raise ValueError(f"cannot canonically serialize {type(value).__name__}")


def canonical_dumps(value) -> str:
    """Deterministic JSON: sorted keys, 9-significant-digit floats."""
    out: list[str] = []
    _canon(value, out)
    return "".join(out)


# --- sample records ----------------------------------------------------------


@dataclass
class KeyframeRecord:
    frame: int
    keypoints: np.ndarray  # (4, 3) float64
    feature: np.ndarray  # (12,) float64

    def to_record(self) -> dict:
        return {
            "frame": self.frame,
            "keypoints": [[float(c) for c in row] for row in self.keypoints],
            "feature": [float(c) for c in self.feature],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "KeyframeRecord":
        return cls(
            frame=int(rec["frame"]),
            keypoints=np.asarray(rec["keypoints"], dtype=np.float64),
            feature=np.asarray(rec["feature"], dtype=np.float64),
        )


@dataclass
class Sample:
    sample_id: str
    scene_id: str
    task_type: int
    instruction: str
    frames_dir: str  # relative to the dataset root
    num_frames: int
    image_size: tuple[int, int]  # (width, height)
    keyframes: list[KeyframeRecord]
    supervision: list[GroundedTarget]
    meta: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "scene_id": self.scene_id,
            "task_type": self.task_type,
            "instruction": self.instruction,
            "frames_dir": self.frames_dir,
            "num_frames": self.num_frames,
            "image_size": list(self.image_size),
            "keyframes": [k.to_record() for k in self.keyframes],
            "supervision": [t.to_record() for t in self.supervision],
            "meta": self.meta,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Sample":
        return cls(
            sample_id=str(rec["sample_id"]),
            scene_id=str(rec["scene_id"]),
            task_type=int(rec["task_type"]),
            instruction=str(rec["instruction"]),
            frames_dir=str(rec["frames_dir"]),
            num_frames=int(rec["num_frames"]),
            image_size=(int(rec["image_size"][0]), int(rec["image_size"][1])),
            keyframes=[KeyframeRecord.from_record(k) for k in rec["keyframes"]],
            supervision=[GroundedTarget.from_record(t) for t in rec["supervision"]],
            meta=dict(rec["meta"]),
        )


def assemble_sample(
    sample_id: str,
    scene_id: str,
    task_type: int,
    instruction: str,
    image_size: tuple[int, int],
    trajectory: GestureTrajectory,
    keyframe_indices: list[int],
    keypoint_frames: list[KeypointFrame],
    plan: TaskPlan,
    dataset_dir: Path,
    frames_dir: str,
    meta: dict,
) -> Sample:
    """Cross-check one generated sample and build its manifest record.

    Raises InconsistentSample naming the violated invariant: keyframe count
    must equal hold count with each keyframe inside its hold span, frame
    files must all exist, and features must re-derive from their keypoints.
    """
    num_frames = len(trajectory.frames)
    if len(keyframe_indices) != len(trajectory.holds):
        raise InconsistentSample(
            f"{sample_id}: {len(keyframe_indices)} keyframes for "
            f"{len(trajectory.holds)} holds"
        )
    for kf, (order, start, end) in zip(keyframe_indices, trajectory.holds):
        if not 0 <= kf < num_frames:
            raise InconsistentSample(f"{sample_id}: keyframe {kf} outside the clip")
        if not start <= kf <= end:
            raise InconsistentSample(
                f"{sample_id}: keyframe {kf} outside hold {order} span ({start}, {end})"
            )
    if len(trajectory.holds) != len(plan.targets):
        raise InconsistentSample(
            f"{sample_id}: {len(trajectory.holds)} holds for {len(plan.targets)} targets"
        )
    frames_path = dataset_dir / frames_dir
    for i in range(num_frames):
        if not (frames_path / f"{i:04d}.png").is_file():
            raise InconsistentSample(f"{sample_id}: missing frame file {i:04d}.png")

    width, height = image_size
    records = []
    for kf in keyframe_indices:
        frame = keypoint_frames[kf]
        records.append(
            KeyframeRecord(
                frame=kf,
                keypoints=frame.keypoints.copy(),
                feature=encode_feature(frame, width, height),
            )
        )
    return Sample(
        sample_id=sample_id,
        scene_id=scene_id,
        task_type=task_type,
        instruction=instruction,
        frames_dir=frames_dir,
        num_frames=num_frames,
        image_size=image_size,
        keyframes=records,
        supervision=list(plan.targets),
        meta=meta,
    )


# --- manifest I/O ------------------------------------------------------------


@dataclass
class Manifest:
    headers: list[dict]
    samples: list[dict]  # raw records, manifest order

    def sample_ids(self) -> list[str]:
        return [s["sample_id"] for s in self.samples]

    def find(self, sample_id: str) -> dict:
        for s in self.samples:
            if s["sample_id"] == sample_id:
                return s
        raise UnknownSample(f"sample {sample_id!r} not in manifest")


def manifest_header(global_seed: int, config_hash: str, n_samples: int, **extra) -> dict:
    header = {
        "manifest_header": True,
        "global_seed": global_seed,
        "config_hash": config_hash,
        "n_samples": n_samples,
        "generator_version": GENERATOR_VERSION,
    }
    header.update(extra)
    return header


def write_manifest(records: list[dict], out_dir: str | Path, header: dict) -> Path:
    """Write header + one canonical JSON record per line to manifest.jsonl."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "manifest.jsonl"
    lines = [canonical_dumps(header)]
    lines.extend(canonical_dumps(rec) for rec in records)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_manifest(path: str | Path) -> Manifest:
    """Parse a manifest; tolerant of concatenated manifests (multiple headers).

    Raises ManifestError naming the line number on parse failures, duplicate
    sample ids, or header counts that disagree with the records present.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"no manifest at {path}")
    headers: list[dict] = []
    samples: list[dict] = []
    seen: set[str] = set()
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestError(f"{path}: line {lineno}: {e}") from e
            if not isinstance(rec, dict):
                raise ManifestError(f"{path}: line {lineno}: not a JSON object")
            if rec.get("manifest_header"):
                headers.append(rec)
                continue
            sid = rec.get("sample_id")
            if not isinstance(sid, str):
                raise ManifestError(f"{path}: line {lineno}: record without sample_id")
            if sid in seen:
                raise ManifestError(f"{path}: line {lineno}: duplicate sample_id {sid!r}")
            seen.add(sid)
            samples.append(rec)
    if not headers:
        raise ManifestError(f"{path}: no header line")
    declared = sum(int(h.get("n_samples", 0)) for h in headers)
    if declared != len(samples):
        raise ManifestError(
            f"{path}: headers declare {declared} samples, found {len(samples)}"
        )
    return Manifest(headers=headers, samples=samples)


# --- validation --------------------------------------------------------------


def _png_size(path: Path) -> tuple[int, int]:
    """Read (width, height) from the PNG IHDR without decoding pixels."""
    with path.open("rb") as fh:
        head = fh.read(24)
    if len(head) < 24 or head[:8] != b"\x89PNG\r\n\x1a\n" or head[12:16] != b"IHDR":
        raise ValueError(f"{path} is not a PNG")
    width, height = struct.unpack(">II", head[16:24])
    return int(width), int(height)


@dataclass
class ValidationReport:
    n_samples: int
    failures: list[dict] = field(default_factory=list)  # {sample_id, errors}

    @property
    def n_failed(self) -> int:
        return len(self.failures)

    @property
    def ok(self) -> bool:
        return not self.failures


def _validate_sample(rec: dict, dataset_dir: Path, n_bins: int) -> list[str]:
    errors: list[str] = []
    try:
        sample = Sample.from_record(rec)
    except (KeyError, TypeError, ValueError, IndexError) as e:
        return [f"unparseable record: {e}"]

    width, height = sample.image_size
    frames_path = dataset_dir / sample.frames_dir
    if sample.num_frames < 1:
        errors.append("num_frames < 1")
    for i in range(sample.num_frames):
        f = frames_path / f"{i:04d}.png"
        if not f.is_file():
            errors.append(f"missing frame {i:04d}.png")
            continue
        try:
            size = _png_size(f)
        except (OSError, ValueError) as e:
            errors.append(str(e))
            continue
        if size != (width, height):
            errors.append(f"frame {i:04d}.png is {size}, expected {(width, height)}")

    orders = [t.order for t in sample.supervision]
    if orders != list(range(len(orders))) or not orders:
        errors.append("supervision orders not contiguous from 0")
    if len(sample.keyframes) != len(sample.supervision):
        errors.append(
            f"{len(sample.keyframes)} keyframes for {len(sample.supervision)} targets"
        )
    prev = -1
    for k in sample.keyframes:
        if not 0 <= k.frame < sample.num_frames:
            errors.append(f"keyframe index {k.frame} outside the clip")
        if k.frame <= prev:
            errors.append("keyframe indices not strictly increasing")
        prev = k.frame
        if k.keypoints.shape != (4, 3):
            errors.append("keypoints not 4x(x,y,d)")
            continue
        if (k.keypoints[:, 2] <= 0).any():
            errors.append(f"keyframe {k.frame}: keypoint depth <= 0")
        if k.feature.shape != (12,):
            errors.append(f"keyframe {k.frame}: feature length != 12")
            continue
        want = encode_feature(
            KeypointFrame(frame_index=k.frame, keypoints=k.keypoints), width, height
        )
        if not np.allclose(k.feature, want, atol=1e-6, rtol=0):
            errors.append(f"keyframe {k.frame}: feature does not match keypoints")

    # loc tokens are written from unrounded floats; after the 9-significant-
    # digit round trip, bin-center agreement is the strongest safe check
    half_bin = 0.5 / n_bins + 1e-6
    for t in sample.supervision:
        for axis in (0, 1):
            center = undiscretize_coord(t.loc_tokens[axis], n_bins)
            if abs(center - t.point_norm[axis]) > half_bin:
                errors.append(
                    f"target {t.order}: loc_token[{axis}] disagrees with point_norm"
                )
        u, v = t.point_px
        if not (0 <= u < width and 0 <= v < height):
            errors.append(f"target {t.order}: point_px outside the image")
        if t.point_3d[2] <= 0:
            errors.append(f"target {t.order}: non-positive depth")
    return errors


def validate_dataset(dataset_dir: str | Path) -> ValidationReport:
    """Re-check every sample invariant plus file presence and image sizes.

    Failures become report entries; only a missing or unreadable manifest
    raises.
    """
    dataset_dir = Path(dataset_dir)
    manifest = read_manifest(dataset_dir / "manifest.jsonl")
    if not manifest.samples:
        raise EmptyDataset(f"{dataset_dir}: manifest has no samples")
    n_bins = int(manifest.headers[0].get("n_bins", 1024))
    failures = []
    for rec in manifest.samples:
        errors = _validate_sample(rec, dataset_dir, n_bins)
        if errors:
            failures.append({"sample_id": rec.get("sample_id"), "errors": errors})
    return ValidationReport(n_samples=len(manifest.samples), failures=failures)
