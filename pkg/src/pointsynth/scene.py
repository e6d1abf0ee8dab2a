"""RGB-D scene observations: camera model, depth access, candidate boxes.

Camera frame: +x right, +y down, +z forward (optical axis). Pixel (u, v) has
u along image columns and v along rows. Depth images store uint16 millimeters
(0 = invalid) and convert to float meters through ``depth_scale``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .errors import NonPositiveDepth, NoValidDepth, SceneFormatError


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics of one RGB-D capture."""

    fx: float  # focal length, px
    fy: float
    cx: float  # principal point, px
    cy: float
    width: int  # image size, px
    height: int
    depth_scale: float = 0.001  # meters per stored depth unit

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")
        if self.depth_scale <= 0:
            raise ValueError("depth_scale must be positive")


@dataclass
class DepthMap:
    """Per-pixel depth in meters; 0 marks invalid pixels."""

    meters: np.ndarray  # (H, W) float32

    def __post_init__(self) -> None:
        if self.meters.ndim != 2:
            raise ValueError("depth must be a 2-D array")
        if not np.isfinite(self.meters).all() or (self.meters < 0).any():
            raise ValueError("depth values must be finite and >= 0")

    @property
    def height(self) -> int:
        return int(self.meters.shape[0])

    @property
    def width(self) -> int:
        return int(self.meters.shape[1])


@dataclass(frozen=True)
class ObjectCandidate:
    """One detected object: label plus an inclusive pixel-aligned box."""

    label: str
    bbox: tuple[int, int, int, int]  # x_min, y_min, x_max, y_max (inclusive)
    score: float = 1.0

    def __post_init__(self) -> None:
        x0, y0, x1, y1 = self.bbox
        if not (x0 <= x1 and y0 <= y1):
            raise ValueError(f"degenerate bbox {self.bbox}")
        if x0 < 0 or y0 < 0:
            raise ValueError(f"bbox {self.bbox} has negative corner")

    @property
    def center(self) -> tuple[float, float]:
        x0, y0, x1, y1 = self.bbox
        return (x0 + x1) / 2.0, (y0 + y1) / 2.0


@dataclass
class SceneObservation:
    """One static RGB-D capture with its detected candidates."""

    scene_id: str
    rgb: np.ndarray  # (H, W, 3) uint8, RGB order
    depth: DepthMap
    intrinsics: CameraIntrinsics
    candidates: list[ObjectCandidate] = field(default_factory=list)

    def __post_init__(self) -> None:
        h, w = self.depth.height, self.depth.width
        if self.rgb.shape != (h, w, 3) or self.rgb.dtype != np.uint8:
            raise ValueError("rgb must be (H, W, 3) uint8 matching the depth size")
        if (w, h) != (self.intrinsics.width, self.intrinsics.height):
            raise ValueError("intrinsics size disagrees with the images")
        for cand in self.candidates:
            x0, y0, x1, y1 = cand.bbox
            if x1 >= w or y1 >= h:
                raise ValueError(f"candidate bbox {cand.bbox} exceeds image bounds")


# --- camera geometry ---------------------------------------------------------


def backproject(intr: CameraIntrinsics, u: float, v: float, z: float) -> np.ndarray:
    """Lift pixel (u, v) at depth z to a camera-frame 3-D point.

    Parameters
    ----------
    intr : CameraIntrinsics
    u, v : float
        Pixel coordinates (need not be integral or inside the image).
    z : float
        Depth along the optical axis, meters. Must be > 0.

    Returns
    -------
    ndarray, shape (3,)
        ((u - cx) * z / fx, (v - cy) * z / fy, z).
    """
    if not z > 0:
        raise NonPositiveDepth(f"backproject requires z > 0, got {z}")
    return np.array(
        [(u - intr.cx) * z / intr.fx, (v - intr.cy) * z / intr.fy, z],
        dtype=np.float64,
    )


def project(intr: CameraIntrinsics, p) -> tuple[float, float]:
    """Project a camera-frame point to continuous pixel coordinates.

    Inverse of :func:`backproject` for z > 0: u = fx*x/z + cx, v = fy*y/z + cy.
    """
    x, y, z = float(p[0]), float(p[1]), float(p[2])
    if not z > 0:
        raise NonPositiveDepth(f"project requires z > 0, got {z}")
    return intr.fx * x / z + intr.cx, intr.fy * y / z + intr.cy


def robust_depth_at(depth: DepthMap, u: int, v: int, half_window: int = 2) -> float:
    """Median of valid depth in a (2*half_window+1)^2 window around (u, v).

    The window is clipped at image borders; zeros (invalid pixels) are
    excluded from the median. Raises NoValidDepth if every pixel in the
    window is invalid.
    """
    if not (0 <= u < depth.width and 0 <= v < depth.height):
        raise ValueError(f"pixel ({u}, {v}) outside {depth.width}x{depth.height}")
    x0 = max(0, u - half_window)
    x1 = min(depth.width - 1, u + half_window)
    y0 = max(0, v - half_window)
    y1 = min(depth.height - 1, v + half_window)
    window = depth.meters[y0 : y1 + 1, x0 : x1 + 1]
    valid = window[window > 0]
    if valid.size == 0:
        raise NoValidDepth(f"no valid depth within +/-{half_window} px of ({u}, {v})")
    return float(np.median(valid))


def bbox_point_cloud(
    scene: SceneObservation, bbox: tuple[int, int, int, int], stride: int = 4
) -> np.ndarray:
    """Back-project the valid depth pixels of an inclusive bbox on a stride grid.

    Grid pixels are x_min, x_min+stride, ... while <= x_max (same for y), so a
    10x10 box at stride 5 yields a 3x3 grid. Invalid-depth pixels are dropped.

    Returns
    -------
    ndarray, shape (N, 3)
        Camera-frame points in row-major grid order (possibly N = 0).
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    x0, y0, x1, y1 = bbox
    us = np.arange(x0, x1 + 1, stride)
    vs = np.arange(y0, y1 + 1, stride)
    uu, vv = np.meshgrid(us, vs)
    uu = uu.ravel()
    vv = vv.ravel()
    zz = scene.depth.meters[vv, uu].astype(np.float64)
    ok = zz > 0
    uu, vv, zz = uu[ok], vv[ok], zz[ok]
    intr = scene.intrinsics
    pts = np.empty((zz.size, 3), dtype=np.float64)
    pts[:, 0] = (uu - intr.cx) * zz / intr.fx
    pts[:, 1] = (vv - intr.cy) * zz / intr.fy
    pts[:, 2] = zz
    return pts


# --- scene directory I/O -----------------------------------------------------


def read_rgb_png(path: Path) -> np.ndarray:
    """Read an 8-bit color PNG as an RGB array."""
    bgr = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if bgr is None:
        raise SceneFormatError(f"cannot read color image {path}")
    return np.ascontiguousarray(bgr[:, :, ::-1])


def write_rgb_png(path: Path, rgb: np.ndarray, compression: int = 1) -> None:
    ok = cv2.imwrite(
        str(path), rgb[:, :, ::-1], [cv2.IMWRITE_PNG_COMPRESSION, compression]
    )
    if not ok:
        raise SceneFormatError(f"cannot write {path}")


def read_depth_png(path: Path, depth_scale: float) -> DepthMap:
    """Read a 16-bit depth PNG and convert stored units to meters."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise SceneFormatError(f"cannot read depth image {path}")
    if raw.dtype != np.uint16 or raw.ndim != 2:
        raise SceneFormatError(f"{path} is not a single-channel 16-bit image")
    return DepthMap(raw.astype(np.float32) * np.float32(depth_scale))


def write_depth_png(path: Path, depth_m: np.ndarray, depth_scale: float) -> None:
    units = np.round(depth_m / depth_scale)
    if (units < 0).any() or (units > 65535).any():
        raise SceneFormatError("depth out of uint16 range at this depth_scale")
    ok = cv2.imwrite(str(path), units.astype(np.uint16))
    if not ok:
        raise SceneFormatError(f"cannot write {path}")


def load_scene(scene_dir: str | Path) -> SceneObservation:
    """Load one scene directory (rgb.png, depth.png, camera.json, objects.json)."""
    d = Path(scene_dir)
    cam_path = d / "camera.json"
    obj_path = d / "objects.json"
    try:
        cam = json.loads(cam_path.read_text())
        intr = CameraIntrinsics(
            fx=float(cam["fx"]),
            fy=float(cam["fy"]),
            cx=float(cam["cx"]),
            cy=float(cam["cy"]),
            width=int(cam["width"]),
            height=int(cam["height"]),
            depth_scale=float(cam["depth_scale"]),
        )
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as e:
        raise SceneFormatError(f"bad camera.json in {d}: {e}") from e
    try:
        objs = json.loads(obj_path.read_text())
        candidates = [
            ObjectCandidate(
                label=str(o["label"]),
                bbox=tuple(int(c) for c in o["bbox"]),
                score=float(o.get("score", 1.0)),
            )
            for o in objs
        ]
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as e:
        raise SceneFormatError(f"bad objects.json in {d}: {e}") from e
    rgb = read_rgb_png(d / "rgb.png")
    depth = read_depth_png(d / "depth.png", intr.depth_scale)
    try:
        return SceneObservation(
            scene_id=d.name, rgb=rgb, depth=depth, intrinsics=intr, candidates=candidates
        )
    except ValueError as e:
        raise SceneFormatError(f"inconsistent scene {d}: {e}") from e


def load_scenes(root: str | Path) -> list[SceneObservation]:
    """Load every scene directory under root, sorted by scene id."""
    root = Path(root)
    dirs = sorted(p for p in root.iterdir() if (p / "camera.json").is_file())
    if not dirs:
        raise SceneFormatError(f"no scene directories under {root}")
    return [load_scene(p) for p in dirs]
