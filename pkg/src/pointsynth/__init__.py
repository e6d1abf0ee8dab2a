"""Deterministic pointing-gesture dataset synthesis over RGB-D scenes."""

from .attention import AttentionMask, SegmentLayout, build_attention_mask, inference_cost
from .dataset import (
    Manifest,
    Sample,
    read_manifest,
    template_instruction,
    validate_dataset,
    write_manifest,
)
from .features import (
    KeypointFrame,
    discretize_coord,
    encode_feature,
    project_keypoints,
    select_keyframes,
    undiscretize_coord,
)
from .grounding import GroundedTarget, TaskPlan, ground_target, sample_task_plan
from .motion import (
    GestureTrajectory,
    HandDims,
    HandPose,
    MotionConfig,
    compose_trajectory,
    hand_keypoints,
    make_pointing_pose,
)
from .oracle import (
    EvalReport,
    PointingRay,
    ResolveResult,
    evaluate,
    point_ray_distance,
    pointing_ray,
    resolve_sequence,
    resolve_target,
)
from .pipeline import RunConfig, decode_dataset, run_generation
from .render import build_proxy_hand, render_frame
from .scene import (
    CameraIntrinsics,
    ObjectCandidate,
    SceneObservation,
    backproject,
    bbox_point_cloud,
    load_scene,
    project,
    robust_depth_at,
)

__version__ = "0.1.0"
