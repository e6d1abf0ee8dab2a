"""Grounding candidate boxes to supervision points and sampling task plans."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientCandidates, UngroundableTarget, UnknownTaskType
from .features import discretize_coord
from .scene import SceneObservation, backproject, robust_depth_at

TASK_SINGLE_PICK_PLACE = 0
TASK_SEQUENTIAL_PICKS = 1


@dataclass(frozen=True)
class GroundingConfig:
    jitter_frac: float = 0.2  # jitter amplitude as a fraction of bbox half-extent
    enable_jitter: bool = True
    max_retries: int = 50  # re-jitter budget when depth is invalid
    depth_half_window: int = 2  # robust depth window half-size, px
    pick_labels: tuple[str, ...] = ("block",)  # labels eligible as pick targets
    place_labels: tuple[str, ...] = ("plate",)  # labels eligible as place targets

    def __post_init__(self) -> None:
        if not 0 <= self.jitter_frac <= 1:
            raise ValueError("jitter_frac must be in [0, 1]")
        if self.max_retries < 1 or self.depth_half_window < 0:
            raise ValueError("max_retries >= 1 and depth_half_window >= 0 required")


@dataclass
class GroundedTarget:
    """One supervision target: a candidate grounded to a concrete 3-D point."""

    candidate_index: int
    label: str
    role: str  # "pick" or "place"
    order: int  # position in the gesture sequence, 0-based
    point_px: tuple[int, int]  # grounded pixel (u, v)
    point_norm: tuple[float, float]  # (u / width, v / height)
    point_3d: np.ndarray  # camera-frame point, meters
    loc_tokens: tuple[int, int]  # discretized point_norm

    def to_record(self) -> dict:
        return {
            "candidate_index": self.candidate_index,
            "label": self.label,
            "role": self.role,
            "order": self.order,
            "point_px": list(self.point_px),
            "point_norm": list(self.point_norm),
            "point_3d": [float(c) for c in self.point_3d],
            "loc_tokens": list(self.loc_tokens),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "GroundedTarget":
        return cls(
            candidate_index=int(rec["candidate_index"]),
            label=str(rec["label"]),
            role=str(rec["role"]),
            order=int(rec["order"]),
            point_px=(int(rec["point_px"][0]), int(rec["point_px"][1])),
            point_norm=(float(rec["point_norm"][0]), float(rec["point_norm"][1])),
            point_3d=np.asarray(rec["point_3d"], dtype=np.float64),
            loc_tokens=(int(rec["loc_tokens"][0]), int(rec["loc_tokens"][1])),
        )


@dataclass
class TaskPlan:
    """Ordered targets of one sample: picks in gesture order, then the place."""

    scene_id: str
    task_type: int
    targets: list[GroundedTarget] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.targets:
            raise ValueError("a task plan needs at least one target")
        if [t.order for t in self.targets] != list(range(len(self.targets))):
            raise ValueError("target orders must be contiguous from 0")

    @property
    def n_picks(self) -> int:
        return sum(1 for t in self.targets if t.role == "pick")


def jittered_center(
    bbox: tuple[int, int, int, int],
    jitter_frac: float,
    rng: np.random.Generator,
) -> tuple[int, int]:
    """Bbox center plus per-axis uniform jitter of +/- jitter_frac * half-extent.

    The result is rounded to integer pixels and clipped to stay inside the
    (inclusive) bbox. jitter_frac = 0 returns the rounded center exactly.
    """
    x0, y0, x1, y1 = bbox
    cx = (x0 + x1) / 2.0
    cy = (y0 + y1) / 2.0
    if jitter_frac > 0:
        hx = (x1 - x0) / 2.0
        hy = (y1 - y0) / 2.0
        cx += rng.uniform(-jitter_frac * hx, jitter_frac * hx)
        cy += rng.uniform(-jitter_frac * hy, jitter_frac * hy)
    u = min(max(int(round(cx)), x0), x1)
    v = min(max(int(round(cy)), y0), y1)
    return u, v


def ground_target(
    scene: SceneObservation,
    candidate_index: int,
    cfg: GroundingConfig,
    rng: np.random.Generator,
    role: str = "pick",
    order: int = 0,
) -> GroundedTarget:
    """Ground one candidate to a pixel with valid depth and lift it to 3-D.

    Re-jitters up to cfg.max_retries times when the robust depth window holds
    no valid pixel; raises UngroundableTarget once the budget is exhausted.
    """
    cand = scene.candidates[candidate_index]
    frac = cfg.jitter_frac if cfg.enable_jitter else 0.0
    intr = scene.intrinsics
    attempts = cfg.max_retries if cfg.enable_jitter else 1
    for _ in range(attempts):
        u, v = jittered_center(cand.bbox, frac, rng)
        try:
            z = robust_depth_at(scene.depth, u, v, cfg.depth_half_window)
        except Exception:
            continue
        point_norm = (u / intr.width, v / intr.height)
        return GroundedTarget(
            candidate_index=candidate_index,
            label=cand.label,
            role=role,
            order=order,
            point_px=(u, v),
            point_norm=point_norm,
            point_3d=backproject(intr, u, v, z),
            loc_tokens=(
                discretize_coord(point_norm[0]),
                discretize_coord(point_norm[1]),
            ),
        )
    raise UngroundableTarget(
        f"candidate {candidate_index} ({cand.label}) in {scene.scene_id}: "
        f"no valid depth after {attempts} attempts"
    )


def sample_task_plan(
    scene: SceneObservation,
    task_type: int,
    n_picks: int,
    cfg: GroundingConfig,
    rng: np.random.Generator,
) -> TaskPlan:
    """Draw distinct pick candidates and one place candidate, then ground all.

    Task type 0 is a single pick-place (n_picks must be 1); type 1 is a
    sequential multi-pick ending at one place. Eligibility comes from the
    label allowlists in cfg. Raises InsufficientCandidates when the scene
    cannot supply distinct eligible candidates.
    """
    if task_type == TASK_SINGLE_PICK_PLACE:
        if n_picks != 1:
            raise ValueError("task type 0 takes exactly one pick")
    elif task_type == TASK_SEQUENTIAL_PICKS:
        if n_picks < 1:
            raise ValueError("task type 1 needs n_picks >= 1")
    else:
        raise UnknownTaskType(f"task type {task_type} not in the template table")

    pick_pool = [
        i for i, c in enumerate(scene.candidates) if c.label in cfg.pick_labels
    ]
    place_pool = [
        i for i, c in enumerate(scene.candidates) if c.label in cfg.place_labels
    ]
    if len(pick_pool) < n_picks:
        raise InsufficientCandidates(
            f"{scene.scene_id}: {len(pick_pool)} pick candidates, need {n_picks}"
        )
    picks = [int(i) for i in rng.choice(pick_pool, size=n_picks, replace=False)]
    place_pool = [i for i in place_pool if i not in picks]
    if not place_pool:
        raise InsufficientCandidates(f"{scene.scene_id}: no place candidate left")
    place = int(place_pool[int(rng.integers(len(place_pool)))])

    targets = [
        ground_target(scene, idx, cfg, rng, role="pick", order=k)
        for k, idx in enumerate(picks)
    ]
    targets.append(
        ground_target(scene, place, cfg, rng, role="place", order=n_picks)
    )
    return TaskPlan(scene_id=scene.scene_id, task_type=task_type, targets=targets)
