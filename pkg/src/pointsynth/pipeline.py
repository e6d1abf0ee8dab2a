"""End-to-end generation and decoding orchestration.

Determinism contract: (config, global_seed) fully determines every dataset
byte. Every sample derives its own seed from (global_seed, scene_id, index)
and consumes independent per-stage substreams, so worker count and completion
order cannot influence any output, and single samples can be regenerated in
isolation.
"""

from __future__ import annotations

import dataclasses
import json
import multiprocessing
import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .dataset import (
    GENERATOR_VERSION,
    Manifest,
    assemble_sample,
    canonical_dumps,
    manifest_header,
    read_manifest,
    template_instruction,
    write_manifest,
)
from .errors import (
    DegenerateUp,
    EmptyDataset,
    InconsistentSample,
    InsufficientCandidates,
    ManifestError,
    NoFeasibleDirection,
    NonPositiveDepth,
    PointsynthError,
    UngroundableTarget,
)
from .features import (
    KeyframeConfig,
    KeypointFrame,
    project_keypoints,
    select_keyframes,
)
from .grounding import GroundingConfig, sample_task_plan
from .motion import HandDims, MotionConfig, compose_trajectory, make_pointing_pose
from .oracle import ResolveResult, resolve_sequence
from .render import (
    AppearanceConfig,
    HandMesh,
    augment_appearance,
    build_proxy_hand,
    render_frame,
)
from .scene import CameraIntrinsics, SceneObservation, load_scene, load_scenes
from .seeding import derive_rng, stable_hash

# machine-readable skip reasons (free text goes to logs, not to these)
SKIP_INSUFFICIENT_CANDIDATES = "insufficient_candidates"
SKIP_UNGROUNDABLE_TARGET = "ungroundable_target"
SKIP_NO_FEASIBLE_DIRECTION = "no_feasible_direction"
SKIP_DEGENERATE_UP = "degenerate_up"
SKIP_KEYPOINT_BEHIND_CAMERA = "keypoint_behind_camera"
SKIP_INCONSISTENT_SAMPLE = "inconsistent_sample"


@dataclass(frozen=True)
class TaskMixEntry:
    task_type: int
    weight: float = 1.0
    n_picks: tuple[int, int] = (1, 1)  # inclusive range
    pick_labels: tuple[str, ...] | None = None  # None: use the grounding defaults
    place_labels: tuple[str, ...] | None = None
    instruction_template_id: int | None = None  # None: same as task_type

    def __post_init__(self) -> None:
        if self.weight < 0:
            raise ValueError("weights must be >= 0")
        lo, hi = self.n_picks
        if not 1 <= lo <= hi:
            raise ValueError(f"bad n_picks range {self.n_picks}")
        if self.task_type == 0 and self.n_picks != (1, 1):
            raise ValueError("task type 0 is single-pick; n_picks must be (1, 1)")

    def to_dict(self) -> dict:
        return {
            "task_type": self.task_type,
            "weight": self.weight,
            "n_picks": list(self.n_picks),
            "pick_labels": None if self.pick_labels is None else list(self.pick_labels),
            "place_labels": None
            if self.place_labels is None
            else list(self.place_labels),
            "instruction_template_id": self.instruction_template_id,
        }


_DEFAULT_MIX = (
    TaskMixEntry(task_type=0, weight=1.0, n_picks=(1, 1)),
    TaskMixEntry(task_type=1, weight=1.0, n_picks=(2, 3)),
)


@dataclass(frozen=True)
class RunConfig:
    scenes_dir: str
    out_dir: str
    num_samples: int
    global_seed: int = 0
    task_mix: tuple[TaskMixEntry, ...] = _DEFAULT_MIX
    grounding: GroundingConfig = GroundingConfig()
    motion: MotionConfig = MotionConfig(min_step_px=3.0)
    keyframe: KeyframeConfig = KeyframeConfig()
    appearance: AppearanceConfig = AppearanceConfig()
    n_bins: int = 1024
    workers: int = 1
    write_masks: bool = False
    png_compression: int = 1

    def __post_init__(self) -> None:
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if not self.task_mix:
            raise ValueError("task_mix must not be empty")
        if sum(e.weight for e in self.task_mix) <= 0:
            raise ValueError("task weights must have a positive sum")
        if self.n_bins < 2:
            raise ValueError("n_bins must be >= 2")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 0 <= self.png_compression <= 9:
            raise ValueError("png_compression must be in [0, 9]")

    def semantic_dict(self) -> dict:
        """Fields that determine dataset content (paths and workers excluded)."""
        return {
            "num_samples": self.num_samples,
            "global_seed": self.global_seed,
            "task_mix": [e.to_dict() for e in self.task_mix],
            "grounding": dataclasses.asdict(self.grounding),
            "motion": dataclasses.asdict(self.motion),
            "keyframe": dataclasses.asdict(self.keyframe),
            "appearance": dataclasses.asdict(self.appearance),
            "n_bins": self.n_bins,
            "write_masks": self.write_masks,
            "png_compression": self.png_compression,
        }

    def config_hash(self) -> str:
        return f"{stable_hash(canonical_dumps(self.semantic_dict())):016x}"


def _tuple_or_none(value) -> tuple | None:
    return None if value is None else tuple(value)


def config_from_dict(raw: dict) -> RunConfig:
    """Build a RunConfig from parsed JSON, applying defaults per section."""
    mix_raw = raw.get("task_mix")
    if mix_raw is None:
        mix = _DEFAULT_MIX
    else:
        mix = tuple(
            TaskMixEntry(
                task_type=int(e["task_type"]),
                weight=float(e.get("weight", 1.0)),
                n_picks=tuple(e.get("n_picks", (1, 1))),
                pick_labels=_tuple_or_none(e.get("pick_labels")),
                place_labels=_tuple_or_none(e.get("place_labels")),
                instruction_template_id=e.get("instruction_template_id"),
            )
            for e in mix_raw
        )

    def section(cls, key: str, defaults: dict | None = None, **fixups):
        data = dict(defaults or {})
        data.update(raw.get(key, {}))
        for name, fn in fixups.items():
            if name in data:
                data[name] = fn(data[name])
        return cls(**data)

    return RunConfig(
        scenes_dir=str(raw["scenes_dir"]),
        out_dir=str(raw["out_dir"]),
        num_samples=int(raw["num_samples"]),
        global_seed=int(raw.get("global_seed", 0)),
        task_mix=mix,
        grounding=section(
            GroundingConfig,
            "grounding",
            pick_labels=tuple,
            place_labels=tuple,
        ),
        motion=section(
            MotionConfig, "motion", {"min_step_px": 3.0}, n_up=tuple
        ),
        keyframe=section(KeyframeConfig, "keyframe"),
        appearance=section(
            AppearanceConfig, "appearance", base_albedo=tuple, light_dir=tuple
        ),
        n_bins=int(raw.get("n_bins", 1024)),
        workers=int(raw.get("workers", 1)),
        write_masks=bool(raw.get("write_masks", False)),
        png_compression=int(raw.get("png_compression", 1)),
    )


def load_config(path: str | Path, seed: int | None = None, workers: int | None = None) -> RunConfig:
    """Read a JSON run config; --seed / --workers CLI overrides win."""
    raw = json.loads(Path(path).read_text())
    if seed is not None:
        raw["global_seed"] = seed
    if workers is not None:
        raw["workers"] = workers
    return config_from_dict(raw)


# --- per-sample generation ---------------------------------------------------


def assign_scene(global_seed: int, index: int, n_scenes: int) -> int:
    """Stable scene choice for a sample index, independent of other samples."""
    return stable_hash(global_seed, "scene-assign", index) % n_scenes


def _choose_task(
    cfg: RunConfig, rng: np.random.Generator
) -> tuple[TaskMixEntry, int]:
    weights = np.array([e.weight for e in cfg.task_mix], dtype=np.float64)
    probs = weights / weights.sum()
    entry = cfg.task_mix[int(rng.choice(len(cfg.task_mix), p=probs))]
    lo, hi = entry.n_picks
    return entry, int(rng.integers(lo, hi + 1))


def generate_sample(
    scene: SceneObservation,
    index: int,
    cfg: RunConfig,
    mesh: HandMesh,
    out_dir: Path,
) -> tuple[dict | None, str | None]:
    """Generate one sample end to end; returns (record, None) or (None, skip_reason).

    Frames are written before assembly so the record cross-check also covers
    the files; a skipped sample's partial directory is removed.
    """
    sample_id = f"s{index:06d}"
    seed_i = stable_hash(cfg.global_seed, scene.scene_id, index)
    rng_task = derive_rng(seed_i, "task")
    rng_ground = derive_rng(seed_i, "grounding")
    rng_motion = derive_rng(seed_i, "motion")
    rng_appearance = derive_rng(seed_i, "appearance")
    intr = scene.intrinsics

    entry, n_picks = _choose_task(cfg, rng_task)
    ground_cfg = cfg.grounding
    if entry.pick_labels is not None or entry.place_labels is not None:
        ground_cfg = dataclasses.replace(
            ground_cfg,
            pick_labels=entry.pick_labels or ground_cfg.pick_labels,
            place_labels=entry.place_labels or ground_cfg.place_labels,
        )

    try:
        plan = sample_task_plan(scene, entry.task_type, n_picks, ground_cfg, rng_ground)
    except InsufficientCandidates:
        return None, SKIP_INSUFFICIENT_CANDIDATES
    except UngroundableTarget:
        return None, SKIP_UNGROUNDABLE_TARGET

    try:
        trajectory = compose_trajectory(
            [t.point_3d for t in plan.targets], intr, cfg.motion, rng_motion
        )
    except NoFeasibleDirection:
        return None, SKIP_NO_FEASIBLE_DIRECTION
    except DegenerateUp:
        return None, SKIP_DEGENERATE_UP

    dims = HandDims()
    try:
        keypoint_frames = [
            project_keypoints(pose, dims, intr, frame_index=i)
            for i, pose in enumerate(trajectory.frames)
        ]
    except NonPositiveDepth:
        return None, SKIP_KEYPOINT_BEHIND_CAMERA

    keyframe_indices = select_keyframes(keypoint_frames, cfg.keyframe)
    appearance = augment_appearance(cfg.appearance, rng_appearance)

    sample_dir = out_dir / "samples" / sample_id
    frames_dir = sample_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    if cfg.write_masks:
        (sample_dir / "masks").mkdir(exist_ok=True)
    png_opts = [cv2.IMWRITE_PNG_COMPRESSION, cfg.png_compression]
    for i, pose in enumerate(trajectory.frames):
        frame = render_frame(
            scene.rgb, scene.depth.meters, intr, mesh, pose, appearance
        )
        cv2.imwrite(str(frames_dir / f"{i:04d}.png"), frame.rgb[:, :, ::-1], png_opts)
        if cfg.write_masks:
            cv2.imwrite(
                str(sample_dir / "masks" / f"{i:04d}.png"),
                frame.mask.astype(np.uint8) * 255,
                png_opts,
            )

    meta = {
        "seed": seed_i,
        "motion": dataclasses.asdict(cfg.motion),
        "appearance": {
            "augmented": cfg.appearance.augment,
            "albedo": list(appearance.albedo),
            "scale": appearance.scale,
            "light_dir": list(appearance.light_dir),
            "ambient": appearance.ambient,
        },
        "generator_version": GENERATOR_VERSION,
    }
    try:
        sample = assemble_sample(
            sample_id=sample_id,
            scene_id=scene.scene_id,
            task_type=entry.task_type,
            instruction=template_instruction(
                entry.task_type
                if entry.instruction_template_id is None
                else entry.instruction_template_id,
                plan.n_picks,
            ),
            image_size=(intr.width, intr.height),
            trajectory=trajectory,
            keyframe_indices=keyframe_indices,
            keypoint_frames=keypoint_frames,
            plan=plan,
            dataset_dir=out_dir,
            frames_dir=f"samples/{sample_id}/frames",
            meta=meta,
        )
    except InconsistentSample:
        shutil.rmtree(sample_dir, ignore_errors=True)
        return None, SKIP_INCONSISTENT_SAMPLE
    return sample.to_record(), None


# --- run orchestration -------------------------------------------------------

_WORKER_STATE: dict = {}


def _init_worker_state(cfg: RunConfig, scenes: list[SceneObservation]) -> None:
    _WORKER_STATE["cfg"] = cfg
    _WORKER_STATE["scenes"] = scenes
    _WORKER_STATE["mesh"] = build_proxy_hand()
    _WORKER_STATE["out_dir"] = Path(cfg.out_dir)


def _generate_by_index(index: int) -> tuple[int, dict | None, str | None]:
    cfg: RunConfig = _WORKER_STATE["cfg"]
    scenes: list[SceneObservation] = _WORKER_STATE["scenes"]
    scene = scenes[assign_scene(cfg.global_seed, index, len(scenes))]
    record, reason = generate_sample(
        scene, index, cfg, _WORKER_STATE["mesh"], _WORKER_STATE["out_dir"]
    )
    return index, record, reason


def warmup_renderer() -> None:
    """Compile (or load from cache) the raster kernel before timing or forking."""
    intr = CameraIntrinsics(fx=50.0, fy=50.0, cx=8.0, cy=8.0, width=16, height=16)
    scene_rgb = np.zeros((16, 16, 3), dtype=np.uint8)
    scene_depth = np.full((16, 16), 2.0, dtype=np.float32)
    mesh = HandMesh(
        vertices=np.array([[-0.1, 0.0, 0.0], [0.1, 0.0, 0.0], [0.0, 0.1, 0.0]]),
        triangles=np.array([[0, 1, 2]], dtype=np.int32),
    )
    pose = make_pointing_pose(
        np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, 1.0]), np.array([0.0, -1.0, 0.0])
    )
    app = augment_appearance(AppearanceConfig(augment=False), derive_rng(0))
    render_frame(scene_rgb, scene_depth, intr, mesh, pose, app)


@dataclass
class GenerationSummary:
    requested: int
    generated: int
    skipped: dict[str, int]
    wall_time_s: float  # generation window only (scenes loaded, kernel warm)
    out_dir: str
    manifest_path: str
    config_hash: str
    global_seed: int

    @property
    def samples_per_min(self) -> float:
        if self.wall_time_s <= 0:
            return float("inf")
        return 60.0 * self.generated / self.wall_time_s

    def to_record(self) -> dict:
        # timing is run-dependent and deliberately kept out of on-disk output
        return {
            "requested": self.requested,
            "generated": self.generated,
            "skipped": dict(sorted(self.skipped.items())),
            "config_hash": self.config_hash,
            "global_seed": self.global_seed,
            "generator_version": GENERATOR_VERSION,
        }


def run_generation(cfg: RunConfig) -> GenerationSummary:
    """Generate the full dataset: samples in parallel, manifest single-writer."""
    scenes = load_scenes(cfg.scenes_dir)  # fatal before any output if unreadable
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    cv2.setNumThreads(0)  # single-threaded image codecs: no cross-fork surprises
    warmup_renderer()
    _init_worker_state(cfg, scenes)

    t0 = time.perf_counter()
    if cfg.workers == 1:
        results = [_generate_by_index(i) for i in range(cfg.num_samples)]
    else:
        ctx = multiprocessing.get_context("fork")
        chunk = max(1, cfg.num_samples // (cfg.workers * 4))
        with ctx.Pool(processes=cfg.workers) as pool:
            results = pool.map(_generate_by_index, range(cfg.num_samples), chunk)
    results.sort(key=lambda r: r[0])  # deterministic manifest order by index

    records = [rec for _, rec, _ in results if rec is not None]
    skipped: dict[str, int] = {}
    for _, rec, reason in results:
        if rec is None and reason is not None:
            skipped[reason] = skipped.get(reason, 0) + 1
    wall = time.perf_counter() - t0

    header = manifest_header(
        global_seed=cfg.global_seed,
        config_hash=cfg.config_hash(),
        n_samples=len(records),
        n_scenes=len(scenes),
        scenes_dir=str(cfg.scenes_dir),
        n_bins=cfg.n_bins,
    )
    manifest_path = write_manifest(records, out_dir, header)
    summary = GenerationSummary(
        requested=cfg.num_samples,
        generated=len(records),
        skipped=skipped,
        wall_time_s=wall,
        out_dir=str(out_dir),
        manifest_path=str(manifest_path),
        config_hash=cfg.config_hash(),
        global_seed=cfg.global_seed,
    )
    (out_dir / "summary.json").write_text(canonical_dumps(summary.to_record()) + "\n")
    return summary


# --- decoding ----------------------------------------------------------------


def _keyframes_of(rec: dict) -> list[KeypointFrame]:
    return [
        KeypointFrame(
            frame_index=int(k["frame"]),
            keypoints=np.asarray(k["keypoints"], dtype=np.float64),
        )
        for k in rec["keyframes"]
    ]


def decode_dataset(
    dataset_dir: str | Path,
    stride: int = 4,
    t_min: float = 0.0,
    scenes_dir: str | Path | None = None,
) -> dict:
    """Run the geometric resolver over every stored keyframe.

    Scene files are located via the manifest header (or the override); a
    sample whose scene or keypoints are unusable yields unresolved entries
    for all its targets and never aborts the run. Returns the predictions
    object and writes it to predictions.json next to the manifest.
    """
    dataset_dir = Path(dataset_dir)
    manifest = read_manifest(dataset_dir / "manifest.jsonl")
    if not manifest.samples:
        raise EmptyDataset(f"{dataset_dir}: no samples")
    if scenes_dir is None:
        scenes_dir = manifest.headers[0].get("scenes_dir")
        if scenes_dir is None:
            raise ManifestError(
                "manifest header lacks scenes_dir; pass the scene root explicitly"
            )
    scenes_root = Path(scenes_dir)

    scene_cache: dict[str, SceneObservation] = {}
    samples_out: list[dict] = []
    for rec in manifest.samples:
        sid = rec["sample_id"]
        n_targets = len(rec["supervision"])
        try:
            scene_id = rec["scene_id"]
            if scene_id not in scene_cache:
                scene_cache[scene_id] = load_scene(scenes_root / scene_id)
            scene = scene_cache[scene_id]
            frames = _keyframes_of(rec)
            resolved = resolve_sequence(frames, scene, stride=stride, t_min=t_min)
        except (PointsynthError, KeyError, ValueError):
            resolved = [None] * n_targets
        per_target = []
        for k in range(n_targets):
            r = resolved[k] if k < len(resolved) else None
            if r is None:
                per_target.append(
                    {"order": k, "candidate_index": None, "distance": None, "ray_param": None}
                )
            else:
                per_target.append(
                    {
                        "order": k,
                        "candidate_index": r.candidate_index,
                        "distance": r.distance,
                        "ray_param": r.ray_param,
                    }
                )
        samples_out.append({"sample_id": sid, "per_target": per_target})

    predictions = {"stride": stride, "t_min": t_min, "samples": samples_out}
    (dataset_dir / "predictions.json").write_text(canonical_dumps(predictions) + "\n")
    return predictions


def supervision_of(manifest: Manifest) -> dict[str, list[int]]:
    """sample_id -> supervised candidate indices in gesture order."""
    out: dict[str, list[int]] = {}
    for rec in manifest.samples:
        targets = sorted(rec["supervision"], key=lambda t: t["order"])
        out[rec["sample_id"]] = [int(t["candidate_index"]) for t in targets]
    return out


def predictions_as_results(predictions: dict) -> dict[str, list[ResolveResult | None]]:
    """Predictions JSON -> per-sample ResolveResult lists for evaluate()."""
    out: dict[str, list[ResolveResult | None]] = {}
    for s in predictions["samples"]:
        entries = sorted(s["per_target"], key=lambda t: t["order"])
        row: list[ResolveResult | None] = []
        for e in entries:
            if e["candidate_index"] is None:
                row.append(None)
            else:
                row.append(
                    ResolveResult(
                        candidate_index=int(e["candidate_index"]),
                        distance=float(e["distance"]),
                        ray_param=float(e["ray_param"]),
                    )
                )
        out[s["sample_id"]] = row
    return out
