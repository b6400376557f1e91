"""Crater leading-edge detection.

Column-wise range/disparity discontinuity search, morphological closing,
connected-component contour extraction with the width filter, back-projection
of rim pixels into world frame, and the rim-percent / Q-Score metrics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from craterloc.camera import RangeImage, pixel_to_rover_frame
from craterloc.geometry import Pose, rover_to_world
from craterloc.mapgen import CraterMap, RimArc, front_arc_points

EPSILON_DEFAULT = 1e-3  # divide-by-zero guard in the match score


@dataclass(frozen=True)
class DetectionParams:
    disparity_jump_thresh: float = 0.5  # pixels
    range_jump_thresh: float = 0.8  # meters
    dilate_erode_radius: int = 2  # pixels
    min_contour_pixels: int = 15
    min_width_m: float = 0.5
    max_width_m: float = 30.0

    def __post_init__(self):
        if min(self.disparity_jump_thresh, self.range_jump_thresh) <= 0:
            raise ValueError("jump thresholds must be positive")
        if self.min_width_m >= self.max_width_m:
            raise ValueError("min_width_m must be below max_width_m")


@dataclass(frozen=True)
class RimDetection:
    contour_pixels: np.ndarray  # (N, 2) as (col, row)
    world_points: np.ndarray  # (N, 2)
    rover_points: np.ndarray  # (N, 2) ground points in rover frame
    mean_range: float
    est_width: float


def detect_discontinuities(img: RangeImage, params: DetectionParams) -> np.ndarray:
    """Boolean mask of leading-edge pixels.

    Each column is scanned bottom to top over the non-hole pixels; the nearer
    pixel of the first jump exceeding both the range and disparity thresholds
    is marked. Only the first jump per column counts: the leading edge is the
    near rim, and trailing-edge jumps further up the column are not rim
    evidence.
    """
    ranges = img.ranges
    fb = img.camera.focal_length * img.camera.stereo_baseline
    mask = np.zeros(ranges.shape, dtype=bool)
    finite = np.isfinite(ranges)
    for col in range(img.width):
        rows = np.flatnonzero(finite[:, col])
        if rows.size < 2:
            continue
        # bottom->top order: descending row index
        rows = rows[::-1]
        r = ranges[rows, col].astype(float)
        r_near, r_far = r[:-1], r[1:]
        range_jump = r_far - r_near
        disp_drop = fb / r_near - fb / r_far
        hit = np.flatnonzero(
            (range_jump > params.range_jump_thresh)
            & (disp_drop > params.disparity_jump_thresh)
        )
        if hit.size:
            mask[rows[hit[0]], col] = True
    return mask


def extract_contours(
    mask: np.ndarray, params: DetectionParams, img: RangeImage
) -> list[RimDetection]:
    """Close the mask, trace 8-connected components, filter, back-project.

    Components smaller than min_contour_pixels or whose estimated width
    (horizontal pixel extent * mean range / focal) falls outside the width
    band are dropped.
    """
    if mask.shape != img.ranges.shape:
        raise ValueError("mask dims must match image dims")
    k = 2 * params.dilate_erode_radius + 1
    struct = np.ones((k, k), dtype=bool)
    closed = ndimage.binary_erosion(
        ndimage.binary_dilation(mask, structure=struct), structure=struct
    )
    labels, n = ndimage.label(closed, structure=np.ones((3, 3), dtype=int))
    cam = img.camera
    detections: list[RimDetection] = []
    for lab in range(1, n + 1):
        component = labels == lab
        if component.sum() < params.min_contour_pixels:
            continue
        # closing only groups pixels; back-project the marked pixels themselves,
        # not the fill-in pixels, whose ranges belong to the occluded far side
        rows, cols = np.nonzero(component & mask)
        r = img.ranges[rows, cols].astype(float)
        ok = np.isfinite(r)
        if not np.any(ok):
            continue
        rows, cols, r = rows[ok], cols[ok], r[ok]
        mean_range = float(r.mean())
        extent_px = float(cols.max() - cols.min())
        est_width = extent_px * mean_range / cam.focal_length
        if not params.min_width_m <= est_width <= params.max_width_m:
            continue
        rover_pts = np.array(
            [pixel_to_rover_frame((c, rr), rg, cam)[:2] for c, rr, rg in zip(cols, rows, r)]
        )
        world_pts = rover_to_world(rover_pts, img.pose)
        detections.append(
            RimDetection(
                contour_pixels=np.stack([cols, rows], axis=1),
                world_points=world_pts,
                rover_points=rover_pts,
                mean_range=mean_range,
                est_width=est_width,
            )
        )
    return detections


def detect(img: RangeImage, params: DetectionParams = DetectionParams()) -> list[RimDetection]:
    """Full detector: discontinuity search then contour extraction."""
    return extract_contours(detect_discontinuities(img, params), params, img)


# ---------------------------------------------------------------------------
# Metrics


def _all_world_points(detections: list[RimDetection]) -> np.ndarray:
    if not detections:
        return np.empty((0, 2))
    return np.concatenate([d.world_points for d in detections], axis=0)


def rim_percent_detected(detections: list[RimDetection], gt_arc: RimArc) -> float:
    """Percent of ground-truth arc points that are the nearest neighbor of at
    least one detected world point."""
    if len(gt_arc) == 0:
        raise ValueError("ground-truth arc must be non-empty")
    pts = _all_world_points(detections)
    if len(pts) == 0:
        return 0.0
    tree = cKDTree(gt_arc.points)
    _, idx = tree.query(pts)
    return 100.0 * len(np.unique(idx)) / len(gt_arc)


def q_score_points(points_world: np.ndarray, arc_points: np.ndarray, epsilon: float = EPSILON_DEFAULT) -> float:
    """Match quality in (0, 1]: clamped reciprocal of the mean nearest-arc
    distance, so mean distances at or below 1 m all score 1."""
    points_world = np.atleast_2d(points_world)
    m = len(points_world)
    if m == 0:
        raise ValueError("q_score requires at least one detected point")
    tree = cKDTree(arc_points)
    d, _ = tree.query(points_world)
    q_inc = epsilon + float(d.sum())
    return min(1.0, m / q_inc)


def score_detections(
    detections: list[RimDetection],
    cmap: CraterMap,
    camera_pose: Pose,
    epsilon: float = EPSILON_DEFAULT,
) -> float:
    """Q-Score of the detections against the landmark front arcs.

    Zero detections is "no measurement" and the caller must skip the filter
    update; here it raises.
    """
    pts = _all_world_points(detections)
    if len(pts) == 0:
        raise ValueError("score_detections requires at least one detection")
    arc = front_arc_points(cmap, camera_pose)
    return q_score_points(pts, arc, epsilon)


# ---------------------------------------------------------------------------
# Export


def save_detections_jsonl(
    detections: list[RimDetection], path: str | Path, q_score: float | None = None
) -> None:
    lines = []
    for d in detections:
        obj = {
            "pixels": d.contour_pixels.tolist(),
            "world_points_m": np.round(d.world_points, 6).tolist(),
            "mean_range_m": round(d.mean_range, 6),
            "est_width_m": round(d.est_width, 6),
            "q_score": q_score,
        }
        lines.append(json.dumps(obj, sort_keys=True))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))
