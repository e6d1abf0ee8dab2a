"""Proxy hand mesh, appearance augmentation, and frame compositing.

The hand is a low-poly rigid proxy (palm box, five capped-cylinder fingers)
built in the canonical frame: index finger along +x, fingertip exactly at the
origin, palm extending to x = wrist offset. Rendering composites the posed
mesh over the scene RGB with the scene depth as occluder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._raster import raster_triangles
from .motion import HandDims, HandPose
from .scene import CameraIntrinsics

_Z_NEAR = 1e-4  # triangles with any vertex closer than this are dropped


@dataclass
class HandMesh:
    """Triangle mesh in the canonical hand frame."""

    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int32, outward winding
    base_albedo: tuple[float, float, float] = (0.78, 0.60, 0.48)

    def __post_init__(self) -> None:
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError("vertices must be (V, 3)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise ValueError("triangles must be (T, 3)")
        if self.triangles.size and self.triangles.max() >= len(self.vertices):
            raise ValueError("triangle index out of range")


@dataclass(frozen=True)
class AppearanceConfig:
    augment: bool = True
    base_albedo: tuple[float, float, float] = (0.78, 0.60, 0.48)
    albedo_jitter: float = 0.15  # multiplicative, per channel
    scale_jitter: float = 0.10  # hand size, multiplicative
    light_dir: tuple[float, float, float] = (0.25, 0.35, 0.9)  # toward the scene
    light_cone: float = 0.5  # light direction jitter half-angle, radians
    ambient: float = 0.35

    def __post_init__(self) -> None:
        if not 0 <= self.ambient < 1:
            raise ValueError("ambient must be in [0, 1)")
        if self.albedo_jitter < 0 or self.scale_jitter < 0 or self.light_cone < 0:
            raise ValueError("jitter amplitudes must be >= 0")


@dataclass(frozen=True)
class AppearanceParams:
    """Concrete per-sample appearance draw."""

    albedo: tuple[float, float, float]
    scale: float  # hand size multiplier about the fingertip
    light_dir: tuple[float, float, float]  # unit, pointing from light into scene
    ambient: float


@dataclass
class RenderedFrame:
    rgb: np.ndarray  # (H, W, 3) uint8, scene with the hand composited
    mask: np.ndarray  # (H, W) bool, hand pixels
    hand_depth: np.ndarray  # (H, W) float32 meters, 0 outside the mask


# --- mesh construction -------------------------------------------------------


def _capped_cylinder(
    p0: np.ndarray,
    p1: np.ndarray,
    radius: float,
    n_seg: int,
    apex0: float,
    apex1: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Cylinder from p0 to p1 with cone caps poking out by apex0/apex1.

    apex1 = 0 puts the far cap vertex exactly at p1 (used for the index
    fingertip so the mesh extremity coincides with the tip keypoint).
    """
    axis = p1 - p0
    length = float(np.linalg.norm(axis))
    axis = axis / length
    helper = np.array([0.0, 1.0, 0.0]) if abs(axis[0]) > 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)

    angles = 2.0 * math.pi * np.arange(n_seg) / n_seg
    ring = radius * (np.cos(angles)[:, None] * e1[None, :] + np.sin(angles)[:, None] * e2[None, :])
    verts = [p0 + ring, p1 + ring]
    apex_lo = p0 - apex0 * axis
    apex_hi = p1 + apex1 * axis
    verts = np.vstack([np.vstack(verts), apex_lo[None, :], apex_hi[None, :]])
    i_lo = 2 * n_seg
    i_hi = 2 * n_seg + 1

    tris: list[tuple[int, int, int]] = []
    for k in range(n_seg):
        a, b = k, (k + 1) % n_seg
        # side quad (a, b on ring0; a+n, b+n on ring1), outward winding
        tris.append((a, b, n_seg + b))
        tris.append((a, n_seg + b, n_seg + a))
        tris.append((b, a, i_lo))  # bottom fan faces -axis
        tris.append((n_seg + a, n_seg + b, i_hi))  # top fan faces +axis
    return verts, np.asarray(tris, dtype=np.int32)


def _box(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned box with outward winding."""
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    verts = np.array(
        [
            [x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
            [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1],
        ],
        dtype=np.float64,
    )
    tris = np.array(
        [
            (0, 2, 1), (0, 3, 2),  # z = z0 face, normal -z
            (4, 5, 6), (4, 6, 7),  # z = z1 face, normal +z
            (0, 1, 5), (0, 5, 4),  # y = y0 face, normal -y
            (3, 7, 6), (3, 6, 2),  # y = y1 face, normal +y
            (0, 4, 7), (0, 7, 3),  # x = x0 face, normal -x
            (1, 2, 6), (1, 6, 5),  # x = x1 face, normal +x
        ],
        dtype=np.int32,
    )
    return verts, tris


def build_proxy_hand(dims: HandDims | None = None, n_seg: int = 8) -> HandMesh:
    """Low-poly right hand pointing along +x, fingertip at the origin.

    The index finger runs from the mcp offset to the origin on the x axis so
    all four canonical keypoints lie on or inside the mesh; the palm box
    reaches back past the wrist offset. Curled fingers and thumb are coarse
    cylinders placed for silhouette, not anatomy.
    """
    dims = dims or HandDims()
    parts: list[tuple[np.ndarray, np.ndarray]] = []

    def v(*xyz: float) -> np.ndarray:
        return np.array(xyz, dtype=np.float64)

    parts.append(_box(v(dims.wrist - 0.004, -0.012, -0.006), v(-0.082, 0.013, 0.058)))
    # index finger: apex exactly at the origin (the fingertip keypoint)
    parts.append(
        _capped_cylinder(v(dims.index_mcp, 0.0, 0.0), v(-0.0085, 0.0, 0.0), 0.0085, n_seg, 0.004, 0.0085)
    )
    parts.append(_capped_cylinder(v(-0.083, 0.004, 0.018), v(-0.047, 0.016, 0.020), 0.0080, n_seg, 0.004, 0.006))
    parts.append(_capped_cylinder(v(-0.085, 0.004, 0.036), v(-0.052, 0.015, 0.037), 0.0075, n_seg, 0.004, 0.006))
    parts.append(_capped_cylinder(v(-0.088, 0.004, 0.053), v(-0.060, 0.013, 0.054), 0.0065, n_seg, 0.004, 0.005))
    parts.append(_capped_cylinder(v(-0.160, 0.004, -0.012), v(-0.118, 0.015, -0.034), 0.0090, n_seg, 0.006, 0.007))

    all_verts: list[np.ndarray] = []
    all_tris: list[np.ndarray] = []
    offset = 0
    for verts, tris in parts:
        all_verts.append(verts)
        all_tris.append(tris + offset)
        offset += len(verts)
    return HandMesh(
        vertices=np.vstack(all_verts), triangles=np.vstack(all_tris).astype(np.int32)
    )


# --- appearance --------------------------------------------------------------


def _unit3(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def augment_appearance(cfg: AppearanceConfig, rng: np.random.Generator) -> AppearanceParams:
    """Draw per-sample appearance; with augmentation off, return the base
    appearance exactly (no RNG consumed)."""
    base_light = _unit3(np.asarray(cfg.light_dir, dtype=np.float64))
    if not cfg.augment:
        return AppearanceParams(
            albedo=cfg.base_albedo,
            scale=1.0,
            light_dir=tuple(float(c) for c in base_light),
            ambient=cfg.ambient,
        )
    albedo = tuple(
        float(np.clip(c * (1.0 + rng.uniform(-cfg.albedo_jitter, cfg.albedo_jitter)), 0.0, 1.0))
        for c in cfg.base_albedo
    )
    scale = float(1.0 + rng.uniform(-cfg.scale_jitter, cfg.scale_jitter))
    # tilt the light inside its cone: rotate base_light toward a random azimuth
    ang = float(rng.uniform(0.0, cfg.light_cone))
    phi = float(rng.uniform(0.0, 2.0 * math.pi))
    helper = np.array([0.0, 1.0, 0.0]) if abs(base_light[0]) > 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = _unit3(np.cross(base_light, helper))
    e2 = np.cross(base_light, e1)
    light = _unit3(
        math.cos(ang) * base_light
        + math.sin(ang) * (math.cos(phi) * e1 + math.sin(phi) * e2)
    )
    return AppearanceParams(
        albedo=albedo,
        scale=scale,
        light_dir=tuple(float(c) for c in light),
        ambient=cfg.ambient,
    )


# --- rendering ---------------------------------------------------------------


def render_frame(
    scene_rgb: np.ndarray,
    scene_depth_m: np.ndarray,
    intr: CameraIntrinsics,
    mesh: HandMesh,
    pose: HandPose,
    app: AppearanceParams,
) -> RenderedFrame:
    """Composite the posed hand over the scene with depth occlusion.

    A hand pixel is written only where its depth beats the scene depth
    (strict <); invalid scene depth counts as infinitely far. Shading is flat
    Lambert per triangle: albedo * (ambient + (1 - ambient) * max(0, n . -l)).
    """
    h, w = scene_depth_m.shape
    rgb = scene_rgb.copy()
    mask = np.zeros((h, w), dtype=bool)
    hand_depth = np.zeros((h, w), dtype=np.float64)
    zbuf = np.where(scene_depth_m > 0, scene_depth_m.astype(np.float64), np.inf)

    if mesh.triangles.size:
        verts = (pose.orientation @ (mesh.vertices * app.scale).T).T + pose.tip[None, :]
        tris = mesh.triangles
        tv = verts[tris]  # (T, 3, 3) camera-frame triangle vertices
        ok = (tv[:, :, 2] > _Z_NEAR).all(axis=1)
        tv = tv[ok]
        if len(tv):
            normals = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])
            norms = np.linalg.norm(normals, axis=1)
            nz = norms > 0
            tv, normals, norms = tv[nz], normals[nz], norms[nz]
        if len(tv):
            normals /= norms[:, None]
            light = np.asarray(app.light_dir, dtype=np.float64)
            lambert = np.maximum(0.0, normals @ (-light))
            shade = app.ambient + (1.0 - app.ambient) * lambert
            albedo = np.asarray(app.albedo, dtype=np.float64)
            color = np.clip(np.rint(255.0 * shade[:, None] * albedo[None, :]), 0, 255)

            tri_xy = np.empty((len(tv), 3, 2), dtype=np.float64)
            tri_xy[:, :, 0] = intr.fx * tv[:, :, 0] / tv[:, :, 2] + intr.cx
            tri_xy[:, :, 1] = intr.fy * tv[:, :, 1] / tv[:, :, 2] + intr.cy
            raster_triangles(
                np.ascontiguousarray(tri_xy),
                np.ascontiguousarray(1.0 / tv[:, :, 2]),
                np.ascontiguousarray(color.astype(np.uint8)),
                zbuf,
                rgb,
                mask,
                hand_depth,
            )
    return RenderedFrame(rgb=rgb, mask=mask, hand_depth=hand_depth.astype(np.float32))
