"""Evaluation reports: JSON, per-sample CSV, summary figures, overlays."""

from __future__ import annotations

import csv
from pathlib import Path

import cv2
import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .dataset import canonical_dumps
from .features import KEYPOINT_NAMES
from .oracle import EvalReport
from .scene import SceneObservation, backproject, project

_KP_EDGES = ((0, 1), (1, 2), (2, 3))  # wrist->mcp->pip->tip skeleton


def eval_report_record(report: EvalReport) -> dict:
    return {
        "n_samples": report.n_samples,
        "accuracy": report.accuracy,
        "progress_score": report.progress_score,
        "per_sample": report.per_sample,
    }


def write_eval_report(report: EvalReport, out_dir: str | Path) -> dict[str, Path]:
    """Write eval_report.json, eval_per_sample.csv, and summary figures.

    Returns the paths keyed by artifact name.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    json_path = out_dir / "eval_report.json"
    json_path.write_text(canonical_dumps(eval_report_record(report)) + "\n")
    paths["report"] = json_path

    csv_path = out_dir / "eval_per_sample.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "n_targets", "n_correct", "fraction", "all_correct"])
        for row in report.per_sample:
            n = len(row["per_target"])
            correct = sum(
                1 for t in row["per_target"] if t["predicted"] == t["expected"]
            )
            writer.writerow(
                [row["sample_id"], n, correct, f"{correct / n:.6f}", int(correct == n)]
            )
    paths["csv"] = csv_path

    fig_dir = out_dir / "figures"
    fig_dir.mkdir(exist_ok=True)
    paths.update(_write_figures(report, fig_dir))
    return paths


def _write_figures(report: EvalReport, fig_dir: Path) -> dict[str, Path]:
    paths: dict[str, Path] = {}

    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    bars = ax.bar(
        ["accuracy", "progress"],
        [report.accuracy, report.progress_score],
        color=["#4878a8", "#6aa66a"],
        width=0.55,
    )
    for bar, value in zip(bars, (report.accuracy, report.progress_score)):
        ax.text(
            bar.get_x() + bar.get_width() / 2,
            value + 1.0,
            f"{value:.1f}",
            ha="center",
            fontsize=9,
        )
    ax.set_ylim(0, 108)
    ax.set_ylabel("percent")
    ax.set_title(f"decode quality over {report.n_samples} samples")
    fig.tight_layout()
    p = fig_dir / "eval_summary.png"
    fig.savefig(p, dpi=110)
    plt.close(fig)
    paths["fig_summary"] = p

    fractions = [
        sum(1 for t in s["per_target"] if t["predicted"] == t["expected"])
        / len(s["per_target"])
        for s in report.per_sample
    ]
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    ax.hist(fractions, bins=np.linspace(0, 1, 11), color="#4878a8", edgecolor="white")
    ax.set_xlabel("per-sample correct fraction")
    ax.set_ylabel("samples")
    ax.set_title("target-resolution progress")
    fig.tight_layout()
    p = fig_dir / "eval_progress_hist.png"
    fig.savefig(p, dpi=110)
    plt.close(fig)
    paths["fig_progress"] = p

    hit = [
        t["distance"]
        for s in report.per_sample
        for t in s["per_target"]
        if t["distance"] is not None and t["predicted"] == t["expected"]
    ]
    miss = [
        t["distance"]
        for s in report.per_sample
        for t in s["per_target"]
        if t["distance"] is not None and t["predicted"] != t["expected"]
    ]
    fig, ax = plt.subplots(figsize=(4.6, 3.2))
    bins = np.linspace(0.0, max(hit + miss, default=0.01) * 1.05 + 1e-9, 24)
    if hit:
        ax.hist(hit, bins=bins, alpha=0.75, label="correct", color="#6aa66a")
    if miss:
        ax.hist(miss, bins=bins, alpha=0.75, label="incorrect", color="#b05050")
    ax.set_xlabel("ray-to-candidate distance (m)")
    ax.set_ylabel("targets")
    ax.set_title("resolver distance by outcome")
    if hit or miss:
        ax.legend(fontsize=8)
    fig.tight_layout()
    p = fig_dir / "eval_distance_hist.png"
    fig.savefig(p, dpi=110)
    plt.close(fig)
    paths["fig_distance"] = p
    return paths


# --- inspect support ---------------------------------------------------------


def describe_sample(rec: dict) -> str:
    """Human-readable dump of one manifest record."""
    lines = [
        f"sample_id:   {rec['sample_id']}",
        f"scene_id:    {rec['scene_id']}",
        f"task_type:   {rec['task_type']}",
        f"instruction: {rec['instruction']!r}",
        f"frames:      {rec['num_frames']} at {tuple(rec['image_size'])}",
        "targets:",
    ]
    for t in sorted(rec["supervision"], key=lambda t: t["order"]):
        lines.append(
            f"  [{t['order']}] {t['role']:<5} candidate {t['candidate_index']}"
            f" ({t['label']}) at px {tuple(t['point_px'])}"
            f" loc_tokens {tuple(t['loc_tokens'])}"
        )
    lines.append("keyframes:")
    for k in rec["keyframes"]:
        kp = np.asarray(k["keypoints"])
        feat = ", ".join(f"{x:.4f}" for x in k["feature"])
        lines.append(f"  frame {k['frame']}:")
        for name, row in zip(KEYPOINT_NAMES, kp):
            lines.append(
                f"    {name:<9} px ({row[0]:7.2f}, {row[1]:7.2f})  d {row[2]:.3f} m"
            )
        lines.append(f"    feature [{feat}]")
    return "\n".join(lines)


def write_overlay_frames(
    rec: dict, scene: SceneObservation, dataset_dir: str | Path
) -> Path:
    """Draw keypoints, supervision points, and keyframe rays on every frame.

    Writes overlay/%04d.png inside the sample directory and returns that path;
    one overlay per source frame.
    """
    dataset_dir = Path(dataset_dir)
    frames_dir = dataset_dir / rec["frames_dir"]
    sample_dir = frames_dir.parent
    overlay_dir = sample_dir / "overlay"
    overlay_dir.mkdir(exist_ok=True)

    keyframes = {k["frame"]: k for k in rec["keyframes"]}
    targets = sorted(rec["supervision"], key=lambda t: t["order"])
    intr = scene.intrinsics

    for i in range(int(rec["num_frames"])):
        img = cv2.imread(str(frames_dir / f"{i:04d}.png"), cv2.IMREAD_COLOR)
        if img is None:
            raise FileNotFoundError(frames_dir / f"{i:04d}.png")
        for t in targets:
            u, v = t["point_px"]
            cv2.drawMarker(img, (int(u), int(v)), (40, 40, 230), cv2.MARKER_CROSS, 14, 2)
            cv2.putText(
                img,
                str(t["order"]),
                (int(u) + 6, int(v) - 6),
                cv2.FONT_HERSHEY_SIMPLEX,
                0.45,
                (40, 40, 230),
                1,
                cv2.LINE_AA,
            )
        k = keyframes.get(i)
        if k is not None:
            kp = np.asarray(k["keypoints"], dtype=np.float64)
            pts = [(int(round(x)), int(round(y))) for x, y, _ in kp]
            for a, b in _KP_EDGES:
                cv2.line(img, pts[a], pts[b], (60, 200, 240), 2, cv2.LINE_AA)
            for p in pts:
                cv2.circle(img, p, 3, (60, 200, 240), -1, cv2.LINE_AA)
            # extend the mcp->tip ray a meter past the fingertip
            mcp = backproject(intr, kp[1, 0], kp[1, 1], kp[1, 2])
            tip = backproject(intr, kp[3, 0], kp[3, 1], kp[3, 2])
            d = tip - mcp
            d /= np.linalg.norm(d)
            far = tip + 1.0 * d
            if far[2] > 0:
                u0, v0 = project(intr, tip)
                u1, v1 = project(intr, far)
                cv2.arrowedLine(
                    img,
                    (int(round(u0)), int(round(v0))),
                    (int(round(u1)), int(round(v1))),
                    (80, 230, 120),
                    2,
                    cv2.LINE_AA,
                    tipLength=0.04,
                )
        cv2.imwrite(str(overlay_dir / f"{i:04d}.png"), img)
    return overlay_dir
