"""Synthetic tabletop scene construction for demos, tests, and benchmarks.

Scenes are a tilted table plane with raised colored blocks and pale plates.
Textures are deliberately low-frequency (gradients plus coarse noise): frame
PNGs compress fast and small, which is what keeps generation throughput high.
Object centers keep a generous minimum separation so pointing rays toward one
candidate cannot graze another and transfers never stall mid-flight.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .scene import (
    CameraIntrinsics,
    DepthMap,
    ObjectCandidate,
    SceneObservation,
    write_depth_png,
    write_rgb_png,
)
from .seeding import derive_rng

_BLOCK_PALETTE = (
    (196, 64, 54),
    (52, 134, 74),
    (58, 94, 182),
    (208, 170, 48),
    (190, 98, 36),
    (128, 62, 160),
    (46, 150, 158),
    (160, 150, 58),
)


@dataclass(frozen=True)
class FixtureConfig:
    width: int = 640
    height: int = 480
    n_blocks: int = 5
    n_plates: int = 2
    margin: int = 70  # min distance of any bbox edge from the image border, px
    min_separation: int = 110  # min center-to-center distance, px
    block_size: tuple[int, int] = (46, 64)  # inclusive side range, px
    plate_size: tuple[int, int] = (86, 120)  # inclusive diameter range, px

    def __post_init__(self) -> None:
        if self.n_blocks < 1 or self.n_plates < 1:
            raise ValueError("need at least one block and one plate")


def _place_objects(cfg: FixtureConfig, rng: np.random.Generator) -> list[dict]:
    """Rejection-sample non-overlapping, well-separated object layouts."""
    for _ in range(40):  # layout restarts
        placed: list[dict] = []
        ok = True
        specs = [("block", cfg.block_size)] * cfg.n_blocks
        specs += [("plate", cfg.plate_size)] * cfg.n_plates
        for kind, size_range in specs:
            size = int(rng.integers(size_range[0], size_range[1] + 1))
            half = size // 2
            lo_x = cfg.margin + half
            hi_x = cfg.width - 1 - cfg.margin - half
            lo_y = cfg.margin + half
            hi_y = cfg.height - 1 - cfg.margin - half
            for _ in range(500):
                cx = int(rng.integers(lo_x, hi_x + 1))
                cy = int(rng.integers(lo_y, hi_y + 1))
                if all(
                    (cx - p["cx"]) ** 2 + (cy - p["cy"]) ** 2
                    >= cfg.min_separation**2
                    for p in placed
                ):
                    placed.append({"kind": kind, "cx": cx, "cy": cy, "size": size})
                    break
            else:
                ok = False
                break
        if ok:
            return placed
    raise RuntimeError("could not place the requested objects; relax the config")


def build_scene(
    scene_id: str,
    seed: int,
    cfg: FixtureConfig | None = None,
    hole: tuple[int, int, int, int] | None = None,
) -> SceneObservation:
    """Deterministically synthesize one RGB-D scene with candidates.

    `hole`, if given, zeroes depth inside (x0, y0, x1, y1) inclusive —
    useful for exercising invalid-depth handling.
    """
    cfg = cfg or FixtureConfig()
    rng = derive_rng(seed, "fixture", scene_id)
    w, h = cfg.width, cfg.height
    intr = CameraIntrinsics(
        fx=525.0, fy=525.0, cx=w / 2.0, cy=h / 2.0, width=w, height=h
    )

    # tilted table plane, near at the bottom of the image
    uu = np.arange(w, dtype=np.float32)[None, :]
    vv = np.arange(h, dtype=np.float32)[:, None]
    depth = (0.78 + 0.22 * (vv / (h - 1)) + 0.04 * (uu / (w - 1) - 0.5)).astype(
        np.float32
    )

    base = np.array([176.0, 168.0, 152.0], dtype=np.float32)
    rgb = np.empty((h, w, 3), dtype=np.float32)
    rgb[:] = base[None, None, :]
    rgb += (18.0 * (vv / (h - 1) - 0.5))[:, :, None]
    coarse = rng.uniform(-6.0, 6.0, size=(12, 16, 3)).astype(np.float32)
    rgb += cv2.resize(coarse, (w, h), interpolation=cv2.INTER_LINEAR)

    objects = _place_objects(cfg, rng)
    candidates: list[ObjectCandidate] = []
    for obj in objects:
        cx, cy, size = obj["cx"], obj["cy"], obj["size"]
        if obj["kind"] == "block":
            half = size // 2
            x0, y0 = cx - half, cy - half
            x1, y1 = x0 + size - 1, y0 + size - 1
            color = np.array(
                _BLOCK_PALETTE[int(rng.integers(len(_BLOCK_PALETTE)))], dtype=np.float32
            )
            color = np.clip(color + rng.uniform(-18.0, 18.0), 0, 255)
            rgb[y0 : y1 + 1, x0 : x1 + 1] = color[None, None, :]
            rgb[y0 : y0 + 2, x0 : x1 + 1] *= 0.72  # crude top-edge shade
            height_m = float(rng.uniform(0.040, 0.052))
            depth[y0 : y1 + 1, x0 : x1 + 1] -= height_m
            bbox = (x0, y0, x1, y1)
        else:
            r = size // 2
            x0, y0, x1, y1 = cx - r, cy - r, cx + r, cy + r
            yy, xx = np.ogrid[y0 : y1 + 1, x0 : x1 + 1]
            disk = (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
            tone = float(rng.uniform(220.0, 236.0))
            patch = rgb[y0 : y1 + 1, x0 : x1 + 1]
            patch[disk] = np.array([tone, tone, tone - 6.0], dtype=np.float32)
            rim = ((xx - cx) ** 2 + (yy - cy) ** 2 >= (r - 3) ** 2) & disk
            patch[rim] *= 0.82
            depth_patch = depth[y0 : y1 + 1, x0 : x1 + 1]
            depth_patch[disk] -= 0.015
            bbox = (x0, y0, x1, y1)
        candidates.append(
            ObjectCandidate(
                label=obj["kind"], bbox=bbox, score=float(rng.uniform(0.80, 0.99))
            )
        )

    if hole is not None:
        hx0, hy0, hx1, hy1 = hole
        depth[hy0 : hy1 + 1, hx0 : hx1 + 1] = 0.0

    order = [int(i) for i in rng.permutation(len(candidates))]
    candidates = [candidates[i] for i in order]
    rgb8 = np.clip(np.rint(rgb), 0, 255).astype(np.uint8)
    return SceneObservation(
        scene_id=scene_id,
        rgb=rgb8,
        depth=DepthMap(depth),
        intrinsics=intr,
        candidates=candidates,
    )


def write_scene_dir(scene: SceneObservation, scene_dir: str | Path) -> Path:
    """Write the four scene files the loader expects."""
    d = Path(scene_dir)
    d.mkdir(parents=True, exist_ok=True)
    write_rgb_png(d / "rgb.png", scene.rgb, compression=3)
    write_depth_png(d / "depth.png", scene.depth.meters, scene.intrinsics.depth_scale)
    intr = scene.intrinsics
    (d / "camera.json").write_text(
        json.dumps(
            {
                "fx": intr.fx,
                "fy": intr.fy,
                "cx": intr.cx,
                "cy": intr.cy,
                "width": intr.width,
                "height": intr.height,
                "depth_scale": intr.depth_scale,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    (d / "objects.json").write_text(
        json.dumps(
            [
                {"label": c.label, "bbox": list(c.bbox), "score": c.score}
                for c in scene.candidates
            ],
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    return d


def make_demo_scenes(
    out_root: str | Path,
    count: int,
    seed: int = 0,
    cfg: FixtureConfig | None = None,
) -> list[Path]:
    """Write `count` deterministic scene directories under out_root."""
    out_root = Path(out_root)
    dirs = []
    for i in range(count):
        scene = build_scene(f"scene_{i:03d}", seed=seed, cfg=cfg)
        dirs.append(write_scene_dir(scene, out_root / scene.scene_id))
    return dirs
