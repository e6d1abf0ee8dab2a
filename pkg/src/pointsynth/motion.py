"""Hand motion synthesis: approach, hold, and transfer segments.

All poses live in the camera frame. A pose's rotation maps the canonical hand
frame (index finger along +x, fingertip at the origin) into the camera frame,
so column 0 of the rotation is the pointing direction and the four canonical
keypoints are offsets along +x behind the fingertip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateUp, NoFeasibleDirection
from .scene import CameraIntrinsics, project


@dataclass(frozen=True)
class HandDims:
    """Canonical keypoint offsets along +x from the fingertip, meters."""

    wrist: float = -0.19
    index_mcp: float = -0.09
    index_pip: float = -0.05
    index_tip: float = 0.0

    def __post_init__(self) -> None:
        if not (self.wrist < self.index_mcp < self.index_pip < self.index_tip):
            raise ValueError("offsets must increase from wrist to tip")
        if self.index_tip != 0.0:
            raise ValueError("the fingertip anchors the canonical origin")

    def offsets(self) -> np.ndarray:
        """(4,) offsets in [wrist, mcp, pip, tip] order."""
        return np.array(
            [self.wrist, self.index_mcp, self.index_pip, self.index_tip],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class HandPose:
    """Fingertip position plus canonical-to-camera rotation."""

    tip: np.ndarray  # (3,) camera frame, meters
    orientation: np.ndarray  # (3, 3) rotation, columns = canonical axes

    def direction(self) -> np.ndarray:
        """Unit pointing direction (canonical +x in the camera frame)."""
        return self.orientation[:, 0].copy()


@dataclass
class GestureTrajectory:
    """Composed pose sequence with the frame span held at each target."""

    frames: list[HandPose]
    holds: list[tuple[int, int, int]] = field(default_factory=list)
    # holds entries: (target_order, start_frame, end_frame) inclusive

    def __post_init__(self) -> None:
        n = len(self.frames)
        prev_end = -1
        for order, (k, s, e) in enumerate(self.holds):
            if k != order:
                raise ValueError("hold orders must be contiguous from 0")
            if not (0 <= s <= e < n):
                raise ValueError(f"hold span ({s}, {e}) outside 0..{n - 1}")
            if s <= prev_end:
                raise ValueError("hold spans must not overlap")
            prev_end = e


@dataclass(frozen=True)
class MotionConfig:
    tau: float = 0.06  # fingertip standoff from the target, meters
    delta: float = 0.02  # approach step length, meters
    approach_steps: int = 12  # K; the approach has K + 1 frames
    hold_frames: int = 6  # P; a final hold of 1 frame is too short to pause-detect
    transfer_frames: int = 10  # M frames per transfer, endpoints included
    h_max: float = 0.08  # peak transfer lift, meters
    n_up: tuple[float, float, float] = (0.0, -1.0, 0.0)  # scene-up in camera frame
    cone_half_angle: float = 1.0  # approach direction cone half-angle, radians
    max_direction_retries: int = 100
    min_step_px: float = 0.0  # reject approaches whose projected motion stalls

    def __post_init__(self) -> None:
        if self.tau <= 0 or self.delta <= 0 or self.h_max < 0:
            raise ValueError("tau, delta must be > 0 and h_max >= 0")
        if self.approach_steps < 0 or self.hold_frames < 1 or self.transfer_frames < 2:
            raise ValueError(
                "approach_steps >= 0, hold_frames >= 1, transfer_frames >= 2"
            )
        if not 0 <= self.cone_half_angle <= math.pi / 2:
            raise ValueError("cone_half_angle must be in [0, pi/2]")
        if self.max_direction_retries < 1:
            raise ValueError("max_direction_retries must be >= 1")
        if abs(np.linalg.norm(np.asarray(self.n_up)) - 1.0) > 1e-9:
            raise ValueError("n_up must be a unit vector")

    def up(self) -> np.ndarray:
        return np.asarray(self.n_up, dtype=np.float64)


def _unit(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ValueError("zero vector has no direction")
    return v / n


def make_pointing_pose(
    tip: np.ndarray, direction: np.ndarray, up_hint: np.ndarray
) -> HandPose:
    """Build the pose whose +x is `direction`, with +y tied to -up_hint.

    Column y is -up_hint with its component along the direction removed and
    renormalized; column z completes a right-handed frame. Raises DegenerateUp
    when the direction is parallel to the up hint (residual below 1e-6).
    """
    d = _unit(np.asarray(direction, dtype=np.float64))
    y_raw = -np.asarray(up_hint, dtype=np.float64)
    y_raw = y_raw - np.dot(y_raw, d) * d
    norm = float(np.linalg.norm(y_raw))
    if norm < 1e-6:
        raise DegenerateUp("pointing direction parallel to the up hint")
    y = y_raw / norm
    z = np.cross(d, y)
    rot = np.column_stack([d, y, z])
    return HandPose(tip=np.asarray(tip, dtype=np.float64).copy(), orientation=rot)


def hand_keypoints(pose: HandPose, dims: HandDims) -> np.ndarray:
    """Camera-frame keypoints (4, 3) in [wrist, mcp, pip, tip] order."""
    return pose.tip[None, :] + dims.offsets()[:, None] * pose.orientation[:, 0][None, :]


def approach_segment(
    target: np.ndarray, direction: np.ndarray, cfg: MotionConfig
) -> np.ndarray:
    """Fingertip positions closing on the target from far to near.

    Frame k of the returned (K+1, 3) array sits at
    target - direction * (tau + (K - k) * delta), so the last frame is the
    standoff point target - direction * tau.
    """
    k = np.arange(cfg.approach_steps, -1, -1, dtype=np.float64)
    dist = cfg.tau + k * cfg.delta
    return np.asarray(target, dtype=np.float64)[None, :] - dist[:, None] * np.asarray(
        direction, dtype=np.float64
    )[None, :]


def _direction_in_cone(
    axis: np.ndarray, half_angle: float, rng: np.random.Generator
) -> np.ndarray:
    """Uniform draw from the spherical cap of half_angle around axis."""
    if half_angle == 0.0:
        return axis.copy()
    cos_t = 1.0 - rng.uniform() * (1.0 - math.cos(half_angle))
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    phi = rng.uniform(0.0, 2.0 * math.pi)
    # orthonormal basis around the axis; seed differs per axis orientation
    helper = np.array([1.0, 0.0, 0.0])
    if abs(axis[0]) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    e1 = _unit(np.cross(axis, helper))
    e2 = np.cross(axis, e1)
    return cos_t * axis + sin_t * (math.cos(phi) * e1 + math.sin(phi) * e2)


def _mean_keypoint_steps(
    positions: np.ndarray,
    rot_x: np.ndarray,
    dims: HandDims,
    intr: CameraIntrinsics,
) -> np.ndarray | None:
    """Per-step mean keypoint pixel displacement, or None if any keypoint is
    behind the camera or projects outside the image."""
    offs = dims.offsets()
    pix = np.empty((positions.shape[0], offs.size, 2), dtype=np.float64)
    for i, pos in enumerate(positions):
        pts = pos[None, :] + offs[:, None] * rot_x[None, :]
        if (pts[:, 2] <= 0).any():
            return None
        pix[i, :, 0] = intr.fx * pts[:, 0] / pts[:, 2] + intr.cx
        pix[i, :, 1] = intr.fy * pts[:, 1] / pts[:, 2] + intr.cy
    if (
        (pix[..., 0] < 0).any()
        or (pix[..., 0] > intr.width - 1).any()
        or (pix[..., 1] < 0).any()
        or (pix[..., 1] > intr.height - 1).any()
    ):
        return None
    delta = pix[1:] - pix[:-1]
    return np.mean(np.hypot(delta[..., 0], delta[..., 1]), axis=1)


def sample_approach_direction(
    target: np.ndarray,
    intr: CameraIntrinsics,
    cfg: MotionConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw an approach direction whose whole approach path is observable.

    Directions are uniform in a cone around the camera->target axis. A draw is
    rejected unless every approach frame keeps all four keypoints in front of
    the camera and inside the image, the pose orientation is non-degenerate,
    and (when cfg.min_step_px > 0) the projected hand never moves less than
    min_step_px per frame along the approach. Raises NoFeasibleDirection after
    cfg.max_direction_retries rejected draws.
    """
    target = np.asarray(target, dtype=np.float64)
    axis = _unit(target)
    dims = HandDims()
    for _ in range(cfg.max_direction_retries):
        d = _unit(_direction_in_cone(axis, cfg.cone_half_angle, rng))
        try:
            pose_rot_x = make_pointing_pose(target, d, cfg.up()).orientation[:, 0]
        except DegenerateUp:
            continue
        positions = approach_segment(target, d, cfg)
        steps = _mean_keypoint_steps(positions, pose_rot_x, dims, intr)
        if steps is None:
            continue
        if cfg.min_step_px > 0 and (steps < cfg.min_step_px).any():
            continue
        return d
    raise NoFeasibleDirection(
        f"no feasible approach direction after {cfg.max_direction_retries} draws"
    )


def slerp_direction(u: np.ndarray, v: np.ndarray, t: float) -> np.ndarray:
    """Spherical interpolation between unit vectors; exact at the endpoints."""
    if t <= 0.0:
        return u.copy()
    if t >= 1.0:
        return v.copy()
    dot = float(np.clip(np.dot(u, v), -1.0, 1.0))
    theta = math.acos(dot)
    if theta < 1e-9:
        return _unit((1.0 - t) * u + t * v)
    if theta > math.pi - 1e-6:
        # antiparallel: rotate within a deterministically chosen plane
        helper = np.array([1.0, 0.0, 0.0])
        if abs(u[0]) > 0.9:
            helper = np.array([0.0, 1.0, 0.0])
        e = _unit(np.cross(u, helper))
        ang = t * theta
        return math.cos(ang) * u + math.sin(ang) * np.cross(e, u)
    s = math.sin(theta)
    return _unit(
        (math.sin((1.0 - t) * theta) / s) * u + (math.sin(t * theta) / s) * v
    )


def transfer_segment(
    pose_from: HandPose,
    tip_to: np.ndarray,
    dir_to: np.ndarray,
    cfg: MotionConfig,
) -> list[HandPose]:
    """Parabolic-lift transfer between two hold poses, M frames inclusive.

    Frame i (alpha = i / (M - 1)) places the fingertip at the linear blend of
    the endpoint tips plus h_max * (1 - (2*alpha - 1)^2) along n_up, and turns
    the pointing direction by spherical interpolation. Frame 0 reproduces
    pose_from exactly; frame M-1 is the arrival pose.
    """
    m = cfg.transfer_frames
    tip_from = pose_from.tip
    dir_from = pose_from.direction()
    tip_to = np.asarray(tip_to, dtype=np.float64)
    dir_to = _unit(np.asarray(dir_to, dtype=np.float64))
    up = cfg.up()
    poses: list[HandPose] = []
    for i in range(m):
        alpha = i / (m - 1)
        base = (1.0 - alpha) * tip_from + alpha * tip_to
        lift = cfg.h_max * (1.0 - (2.0 * alpha - 1.0) ** 2)
        d = slerp_direction(dir_from, dir_to, alpha)
        poses.append(make_pointing_pose(base + lift * up, d, up))
    return poses


def hold_segment(pose: HandPose, cfg: MotionConfig) -> list[HandPose]:
    """P identical frames pausing at a target's standoff pose."""
    return [pose] * cfg.hold_frames


def compose_trajectory(
    plan_targets: list[np.ndarray],
    intr: CameraIntrinsics,
    cfg: MotionConfig,
    rng: np.random.Generator,
) -> GestureTrajectory:
    """Full gesture over the ordered target points.

    Approach to the first target, hold; then for each later target a transfer
    followed by a hold. Total frames: (K+1) + P + sum over transfers of (M + P).
    Transfer frame 0 duplicates the previous hold pose and frame M-1 the next
    one, which is what makes each hold read as a motion pause.
    """
    if not plan_targets:
        raise ValueError("cannot compose a trajectory over zero targets")
    up = cfg.up()
    frames: list[HandPose] = []
    holds: list[tuple[int, int, int]] = []

    first = np.asarray(plan_targets[0], dtype=np.float64)
    d0 = sample_approach_direction(first, intr, cfg, rng)
    for pos in approach_segment(first, d0, cfg):
        frames.append(make_pointing_pose(pos, d0, up))
    hold_pose = frames[-1]
    holds.append((0, len(frames), len(frames) + cfg.hold_frames - 1))
    frames.extend(hold_segment(hold_pose, cfg))

    for order in range(1, len(plan_targets)):
        target = np.asarray(plan_targets[order], dtype=np.float64)
        d = sample_approach_direction(target, intr, cfg, rng)
        tip_to = target - cfg.tau * d
        frames.extend(transfer_segment(hold_pose, tip_to, d, cfg))
        hold_pose = frames[-1]
        holds.append((order, len(frames), len(frames) + cfg.hold_frames - 1))
        frames.extend(hold_segment(hold_pose, cfg))

    return GestureTrajectory(frames=frames, holds=holds)
