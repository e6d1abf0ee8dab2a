"""Geometric intent decoding: keypoints -> pointing ray -> candidate choice.

The decoder is deliberately independent of the synthesis path: it consumes
only stored keypoints, scene depth, and candidate boxes, reconstructing all
3-D quantities from those inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateRay, EmptyDataset, NoResolvableCandidate
from .features import KeypointFrame
from .scene import CameraIntrinsics, SceneObservation, backproject, bbox_point_cloud

_MIN_RAY_BASELINE = 1e-9  # meters between mcp and tip below which no ray exists


@dataclass(frozen=True)
class PointingRay:
    origin: np.ndarray  # (3,) camera frame, meters
    direction: np.ndarray  # (3,) unit


@dataclass(frozen=True)
class ResolveResult:
    """Winning candidate for one pointing ray."""

    candidate_index: int
    distance: float  # closest cloud-point-to-ray distance, meters
    ray_param: float  # ray parameter t at the winning point, meters


@dataclass
class EvalReport:
    n_samples: int
    accuracy: float  # percent of samples with every target correct
    progress_score: float  # mean per-sample correct fraction, percent
    per_sample: list[dict] = field(default_factory=list)


def pointing_ray(frame: KeypointFrame, intr: CameraIntrinsics) -> PointingRay:
    """Ray from the index mcp through the index tip.

    Both keypoints are lifted with their stored depths; the direction is the
    normalized tip - mcp vector. Raises DegenerateRay when the two points
    nearly coincide (no stable direction).
    """
    kp = frame.keypoints
    mcp = backproject(intr, kp[1, 0], kp[1, 1], kp[1, 2])
    tip = backproject(intr, kp[3, 0], kp[3, 1], kp[3, 2])
    d = tip - mcp
    n = float(np.linalg.norm(d))
    if n < _MIN_RAY_BASELINE:
        raise DegenerateRay(f"mcp and tip are {n:.3g} m apart")
    return PointingRay(origin=mcp, direction=d / n)


def point_ray_distance(point: np.ndarray, ray: PointingRay) -> tuple[float, float]:
    """Perpendicular distance from a point to the ray's supporting line.

    Returns (distance, t) where t = (point - origin) . direction is the ray
    parameter of the foot of the perpendicular (t may be negative; callers
    decide whether behind-the-origin points count).
    """
    w = np.asarray(point, dtype=np.float64) - ray.origin
    t = float(np.dot(w, ray.direction))
    return float(np.linalg.norm(w - t * ray.direction)), t


def _candidate_score(
    scene: SceneObservation, cand_idx: int, ray: PointingRay, stride: int, t_min: float
) -> tuple[float, float] | None:
    """Min (distance, t) over the candidate's cloud, restricted to t >= t_min."""
    cloud = bbox_point_cloud(scene, scene.candidates[cand_idx].bbox, stride)
    if not len(cloud):
        return None
    w = cloud - ray.origin[None, :]
    t = w @ ray.direction
    ok = t >= t_min
    if not ok.any():
        return None
    w, t = w[ok], t[ok]
    dist = np.linalg.norm(w - t[:, None] * ray.direction[None, :], axis=1)
    best = int(np.argmin(dist))
    return float(dist[best]), float(t[best])


def resolve_target(
    scene: SceneObservation,
    ray: PointingRay,
    stride: int = 4,
    t_min: float = 0.0,
) -> ResolveResult:
    """Pick the candidate whose cloud passes closest to the pointing ray.

    Each candidate scores the minimum point-to-ray distance over its bbox
    cloud (stride-sampled, valid depth only), considering only points at ray
    parameter t >= t_min. Ties break toward the smaller t, then the lower
    candidate index. Raises NoResolvableCandidate when no candidate has any
    admissible cloud point.
    """
    best: tuple[float, float, int] | None = None
    for idx in range(len(scene.candidates)):
        score = _candidate_score(scene, idx, ray, stride, t_min)
        if score is None:
            continue
        key = (score[0], score[1], idx)
        if best is None or key < best:
            best = key
    if best is None:
        raise NoResolvableCandidate(
            f"{scene.scene_id}: no candidate cloud point at t >= {t_min}"
        )
    return ResolveResult(candidate_index=best[2], distance=best[0], ray_param=best[1])


def resolve_sequence(
    frames: list[KeypointFrame],
    scene: SceneObservation,
    stride: int = 4,
    t_min: float = 0.0,
) -> list[ResolveResult | None]:
    """Resolve each keyframe independently, in order.

    A keyframe whose ray is degenerate or hits no admissible candidate yields
    None in its slot; other keyframes are unaffected.
    """
    if not frames:
        raise ValueError("resolve_sequence needs at least one keyframe")
    out: list[ResolveResult | None] = []
    for f in frames:
        try:
            ray = pointing_ray(f, scene.intrinsics)
            out.append(resolve_target(scene, ray, stride, t_min))
        except (DegenerateRay, NoResolvableCandidate):
            out.append(None)
    return out


def evaluate(
    predictions: dict[str, list[ResolveResult | None]],
    supervision: dict[str, list[int]],
) -> EvalReport:
    """Score resolved candidates against supervision.

    `supervision` maps sample_id -> candidate indices in gesture order;
    `predictions` carries one ResolveResult (or None if unresolved) per
    target. A sample missing from `predictions` counts as all-incorrect;
    unresolved targets count as incorrect. A predicted sample id absent from
    the supervision, or a per-sample length mismatch, is a hard error naming
    the sample. Accuracy is the percentage of samples with every target
    correct; progress is the mean per-sample correct fraction, as a
    percentage, so one sample with 1 of 2 targets correct contributes 50.
    """
    if not supervision:
        raise EmptyDataset("cannot evaluate an empty dataset")
    unknown = sorted(set(predictions) - set(supervision))
    if unknown:
        raise KeyError(f"predictions for unknown sample ids: {unknown}")

    n_all_correct = 0
    fractions: list[float] = []
    per_sample: list[dict] = []
    for sid in sorted(supervision):
        exp = supervision[sid]
        pred = predictions.get(sid)
        if pred is not None and len(pred) != len(exp):
            raise ValueError(
                f"sample {sid}: {len(pred)} predictions for {len(exp)} targets"
            )
        rows = []
        n_correct = 0
        for k, want in enumerate(exp):
            got = None if pred is None else pred[k]
            n_correct += int(got is not None and got.candidate_index == want)
            rows.append(
                {
                    "expected": want,
                    "predicted": None if got is None else got.candidate_index,
                    "distance": None if got is None else got.distance,
                }
            )
        frac = n_correct / len(exp)
        fractions.append(frac)
        n_all_correct += int(n_correct == len(exp))
        per_sample.append({"sample_id": sid, "per_target": rows})
    n = len(supervision)
    return EvalReport(
        n_samples=n,
        accuracy=100.0 * n_all_correct / n,
        progress_score=100.0 * float(np.mean(fractions)),
        per_sample=per_sample,
    )
