"""Shared fixtures: a canonical camera, procedural scenes, one small dataset.

Heavy artifacts (scene directories on disk, a generated dataset) are
session-scoped and shared read-only.  Tests that mutate a dataset must take
`dataset_copy`, which hands each test its own private tree.
"""

from __future__ import annotations

import shutil
from pathlib import Path

import pytest

from pointsynth.fixtures import build_scene, make_demo_scenes
from pointsynth.pipeline import config_from_dict, run_generation
from pointsynth.scene import CameraIntrinsics


def make_intrinsics(width: int = 640, height: int = 480) -> CameraIntrinsics:
    """The camera used by most hand-computed expectations: fx = fy = 500,
    principal point at the image center."""
    return CameraIntrinsics(
        fx=500.0, fy=500.0, cx=width / 2.0, cy=height / 2.0, width=width, height=height
    )


@pytest.fixture(scope="session")
def intrinsics() -> CameraIntrinsics:
    return make_intrinsics()


@pytest.fixture(scope="session")
def demo_scene():
    """One in-memory procedural scene (5 blocks, 2 plates, 640x480)."""
    return build_scene("scene_000", seed=1)


@pytest.fixture(scope="session")
def scenes_dir(tmp_path_factory) -> Path:
    """Three procedural scenes written to disk in the loader's format."""
    root = tmp_path_factory.mktemp("scenes")
    make_demo_scenes(root, count=3, seed=7)
    return root


@pytest.fixture(scope="session")
def small_dataset(scenes_dir, tmp_path_factory):
    """A 6-sample generated dataset shared by read-only tests.

    Returns (dataset_dir, RunConfig).  global_seed 11 over the 3-scene root
    generates all 6 samples without skips; tests assert on that.
    """
    out = tmp_path_factory.mktemp("dataset") / "out"
    cfg = config_from_dict(
        {
            "scenes_dir": str(scenes_dir),
            "out_dir": str(out),
            "num_samples": 6,
            "global_seed": 11,
        }
    )
    summary = run_generation(cfg)
    assert summary.generated == summary.requested, summary.skipped
    return out, cfg


@pytest.fixture()
def dataset_copy(small_dataset, tmp_path) -> Path:
    """A private mutable copy of the shared dataset."""
    src, _ = small_dataset
    dst = tmp_path / "ds"
    shutil.copytree(src, dst)
    return dst


# --- acceptance reporting -----------------------------------------------------

ACCEPTANCE_LINES: list[str] = []
"""One PASS/FAIL line per acceptance criterion, recorded by test_acceptance.py
and echoed below the test results so a full run ends with the scoreboard."""


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
