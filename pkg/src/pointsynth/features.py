"""Per-frame hand keypoints, keyframe selection, and coordinate tokens.

Keypoint order is fixed everywhere: [wrist, index_mcp, index_pip, index_tip].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveDepth
from .motion import HandDims, HandPose, hand_keypoints
from .scene import CameraIntrinsics

KEYPOINT_NAMES = ("wrist", "index_mcp", "index_pip", "index_tip")


@dataclass
class KeypointFrame:
    """Projected hand keypoints for one frame: rows of (x_px, y_px, depth_m)."""

    frame_index: int
    keypoints: np.ndarray  # (4, 3) float64, rows in KEYPOINT_NAMES order

    def __post_init__(self) -> None:
        self.keypoints = np.asarray(self.keypoints, dtype=np.float64)
        if self.keypoints.shape != (4, 3):
            raise ValueError("keypoints must be (4, 3)")
        if not np.isfinite(self.keypoints).all():
            raise ValueError("keypoints must be finite")
        if (self.keypoints[:, 2] <= 0).any():
            raise ValueError("keypoint depths must be > 0")


@dataclass(frozen=True)
class KeyframeConfig:
    eps_v: float = 2.0  # stagnation threshold on mean keypoint motion, px/frame
    min_run: int = 3  # minimum pause length, frames

    def __post_init__(self) -> None:
        if self.eps_v <= 0 or self.min_run < 1:
            raise ValueError("eps_v must be > 0 and min_run >= 1")


def project_keypoints(
    pose: HandPose, dims: HandDims, intr: CameraIntrinsics, frame_index: int = 0
) -> KeypointFrame:
    """Project the four canonical keypoints of a pose to (x_px, y_px, depth_m).

    Pixels are continuous (not rounded, not clipped); depth is each keypoint's
    camera z. Raises NonPositiveDepth if any keypoint lies behind the camera.
    """
    pts = hand_keypoints(pose, dims)
    if (pts[:, 2] <= 0).any():
        raise NonPositiveDepth("keypoint behind the camera")
    kp = np.empty((4, 3), dtype=np.float64)
    kp[:, 0] = intr.fx * pts[:, 0] / pts[:, 2] + intr.cx
    kp[:, 1] = intr.fy * pts[:, 1] / pts[:, 2] + intr.cy
    kp[:, 2] = pts[:, 2]
    return KeypointFrame(frame_index=frame_index, keypoints=kp)


def keypoint_motion(frames: list[KeypointFrame]) -> np.ndarray:
    """Backward-difference motion signal: mean 2-D pixel displacement of the
    four keypoints from the previous frame. motion[0] is +inf (no predecessor).
    """
    n = len(frames)
    motion = np.empty(n, dtype=np.float64)
    motion[0] = math.inf
    for i in range(1, n):
        delta = frames[i].keypoints[:, :2] - frames[i - 1].keypoints[:, :2]
        motion[i] = float(np.mean(np.hypot(delta[:, 0], delta[:, 1])))
    return motion


def select_keyframes(frames: list[KeypointFrame], cfg: KeyframeConfig) -> list[int]:
    """Indices of motion-stagnation pauses, one per pause, ascending.

    A pause is a maximal run of frames whose motion falls below eps_v,
    extended backward by one frame (the frame the first stagnant step was
    measured against is part of the pause). Pauses shorter than min_run are
    dropped; each surviving pause contributes its floor-middle frame.
    """
    if not frames:
        return []
    motion = keypoint_motion(frames)
    stagnant = motion < cfg.eps_v
    keyframes: list[int] = []
    i = 0
    n = len(frames)
    while i < n:
        if not stagnant[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and stagnant[j + 1]:
            j += 1
        start = max(0, i - 1)  # extend to the frame the run is measured against
        if j - start + 1 >= cfg.min_run:
            keyframes.append((start + j) // 2)
        i = j + 1
    return keyframes


def encode_feature(frame: KeypointFrame, width: int, height: int) -> np.ndarray:
    """Flatten one keyframe into the 12-D gesture feature.

    Layout: [wrist, mcp, pip, tip] x (x/width, y/height, depth_m). Pixel
    coordinates are normalized by image size; depth stays in meters.
    """
    if width <= 0 or height <= 0:
        raise ValueError("image size must be positive")
    kp = frame.keypoints
    out = np.empty(12, dtype=np.float64)
    out[0::3] = kp[:, 0] / width
    out[1::3] = kp[:, 1] / height
    out[2::3] = kp[:, 2]
    return out


def discretize_coord(x: float, n_bins: int = 1024) -> int:
    """Map a normalized coordinate to its token bin.

    bin = floor(x * n_bins) clamped to [0, n_bins - 1]; values outside [0, 1)
    clamp to the edge bins. Non-finite input is rejected.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    if not math.isfinite(x):
        raise ValueError(f"non-finite coordinate {x!r}")
    return min(max(int(math.floor(x * n_bins)), 0), n_bins - 1)


def undiscretize_coord(token: int, n_bins: int = 1024) -> float:
    """Bin center of a coordinate token: (token + 0.5) / n_bins."""
    if not 0 <= token < n_bins:
        raise ValueError(f"token {token} outside [0, {n_bins})")
    return (token + 0.5) / n_bins
