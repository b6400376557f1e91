"""Experiment orchestration.

Trajectory synthesis (straight / half survey / full survey), the replay loop
wiring camera -> detector -> filter, Monte Carlo batches, and a desk-scale
timing harness.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from craterloc import detect as det
from craterloc import particle_filter as pf
from craterloc.camera import CameraModel, SensingNoiseModel, render_range_image, refine_stereo
from craterloc.detect import DetectionParams
from craterloc.geometry import Pose, world_to_rover
from craterloc.mapgen import CraterMap, DemRaster, nearest_rim_distance

DIVERGENCE_THRESHOLD_M = 10.0  # mission requirement on absolute error

TRAJ_TYPES = ("straight", "half_survey", "full_survey")


class PlanningError(RuntimeError):
    """Raised when a trajectory cannot be constructed around the landmarks."""


@dataclass(frozen=True)
class TrajectoryPlan:
    waypoints: tuple[Pose, ...]
    observation_stops: tuple[bool, ...]
    traj_type: str
    landmark_ids: tuple[int, ...]

    def __post_init__(self):
        if len(self.waypoints) != len(self.observation_stops):
            raise ValueError("one observation flag per waypoint")

    @property
    def length(self) -> float:
        pts = np.array([[w.x, w.y] for w in self.waypoints])
        return float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))


@dataclass(frozen=True)
class RunResult:
    true_xy: np.ndarray  # (K, 2)
    est_xy: np.ndarray  # (K, 2)
    errors: np.ndarray  # (K,)
    updated: np.ndarray  # (K,) 0/1
    seed: int

    @property
    def final_error(self) -> float:
        return float(self.errors[-1])

    @property
    def diverged(self) -> bool:
        return self.final_error > DIVERGENCE_THRESHOLD_M


@dataclass(frozen=True)
class McSummary:
    avg_error: float
    stdev_error: float
    max_error: float
    frac_gt_5m: float
    runs: int
    final_errors: tuple[float, ...]
    diverged_runs: int

    def to_dict(self) -> dict:
        return {
            "avg_error_m": round(self.avg_error, 6),
            "stdev_error_m": round(self.stdev_error, 6),
            "max_error_m": round(self.max_error, 6),
            "frac_gt_5m": round(self.frac_gt_5m, 6),
            "runs": self.runs,
            "diverged_runs": self.diverged_runs,
            "final_errors_m": [round(e, 6) for e in self.final_errors],
        }


# ---------------------------------------------------------------------------
# Trajectory planning


def _resample_polyline(vertices: np.ndarray, spacing: float) -> np.ndarray:
    """Points every `spacing` meters along a polyline, endpoints included."""
    seg = np.diff(vertices, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    total = seg_len.sum()
    n = max(1, int(np.ceil(total / spacing)))
    targets = np.linspace(0.0, total, n + 1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    out = []
    for t in targets:
        i = min(np.searchsorted(cum, t, side="right") - 1, len(seg_len) - 1)
        frac = 0.0 if seg_len[i] == 0 else (t - cum[i]) / seg_len[i]
        out.append(vertices[i] + frac * seg[i])
    return np.array(out)


def _heading_along(points: np.ndarray) -> np.ndarray:
    d = np.diff(points, axis=0)
    h = np.arctan2(d[:, 1], d[:, 0])
    return np.append(h, h[-1])


def plan_trajectory(
    cmap: CraterMap,
    start,
    goal,
    traj_type: str,
    stop_spacing: float = 10.0,
    standoff: float = 10.0,
) -> TrajectoryPlan:
    """Observation-stop plan past (or around) each landmark between start
    and goal.

    straight: line past each landmark with closest approach ~standoff from
    the rim, headings along travel. half_survey / full_survey: arcs of stops
    at standoff from the rim (7-13 m band) spanning 180 / 360 degrees, with
    headings facing the crater center.
    """
    if traj_type not in TRAJ_TYPES:
        raise ValueError(f"traj_type must be one of {TRAJ_TYPES}")
    if not 7.0 <= standoff <= 13.0:
        raise PlanningError(f"survey standoff {standoff} m outside the 7-13 m band")
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    u = goal - start
    route_len = np.linalg.norm(u)
    if route_len == 0:
        raise PlanningError("start and goal coincide")
    u /= route_len
    nvec = np.array([-u[1], u[0]])  # left of travel

    landmarks = sorted(cmap.landmarks, key=lambda c: (np.asarray(c.center) - start) @ u)
    landmarks = [
        c for c in landmarks if 0.0 < (np.asarray(c.center) - start) @ u < route_len
    ]
    if not landmarks:
        raise PlanningError("no landmark craters between start and goal")
    for a in landmarks:
        for b in cmap.craters:
            if b.id == a.id:
                continue
            sep = np.linalg.norm(np.asarray(a.center) - np.asarray(b.center))
            if sep < a.radius + standoff + b.radius:
                raise PlanningError(
                    f"crater {b.id} blocks the survey arc around landmark {a.id}"
                )

    if traj_type == "straight":
        verts = [start]
        for c in landmarks:
            ctr = np.asarray(c.center)
            lateral = (ctr - start) @ nvec
            side = -1.0 if lateral >= 0 else 1.0
            verts.append(ctr + side * nvec * (c.radius + standoff))
        verts.append(goal)
        pts = _resample_polyline(np.array(verts), stop_spacing)
        headings = _heading_along(pts)
        waypoints = tuple(Pose(p[0], p[1], h) for p, h in zip(pts, headings))
        return TrajectoryPlan(
            waypoints,
            tuple([True] * len(waypoints)),
            traj_type,
            tuple(c.id for c in landmarks),
        )

    sweep = np.pi if traj_type == "half_survey" else 2 * np.pi
    poses: list[Pose] = []
    observe: list[bool] = []

    def add_leg(a, b):
        # Transit stops: driven but not flagged for sensing, so every flagged
        # survey stop sits in the 7-13 m standoff band around its landmark.
        pts = _resample_polyline(np.array([a, b]), stop_spacing)
        headings = _heading_along(pts)
        for p, h in zip(pts[:-1], headings[:-1]):
            poses.append(Pose(p[0], p[1], h))
            observe.append(False)

    cursor = start
    for c in landmarks:
        ctr = np.asarray(c.center)
        rho = c.radius + standoff
        entry_ang = np.arctan2(*(cursor - ctr)[::-1])
        arc_len = rho * sweep
        n_arc = max(2, int(np.ceil(arc_len / stop_spacing)) + 1)
        angs = entry_ang + np.linspace(0.0, sweep, n_arc)
        entry_pt = ctr + rho * np.array([np.cos(entry_ang), np.sin(entry_ang)])
        add_leg(cursor, entry_pt)
        for a in angs:
            p = ctr + rho * np.array([np.cos(a), np.sin(a)])
            heading = np.arctan2(ctr[1] - p[1], ctr[0] - p[0])  # face the crater
            poses.append(Pose(p[0], p[1], heading))
            observe.append(True)
        cursor = ctr + rho * np.array([np.cos(angs[-1]), np.sin(angs[-1])])
    add_leg(cursor, goal)
    poses.append(Pose(goal[0], goal[1], poses[-1].heading if poses else 0.0))
    observe.append(False)
    return TrajectoryPlan(
        tuple(poses),
        tuple(observe),
        traj_type,
        tuple(c.id for c in landmarks),
    )


# ---------------------------------------------------------------------------
# Replay and Monte Carlo


def replay(
    plan: TrajectoryPlan,
    cmap: CraterMap,
    dem: DemRaster,
    cam: CameraModel,
    noise: SensingNoiseModel,
    drift_p: float,
    config: pf.FilterConfig,
    seed: int,
    detection_params: DetectionParams = DetectionParams(),
    always_render: bool = False,
) -> RunResult:
    """Walk the plan accumulating drifted odometry; sense and filter at
    observation stops within the gate. Deterministic per seed."""
    ss = np.random.SeedSequence(seed)
    drift_rng, filt_rng, render_ss = [np.random.default_rng(s) for s in ss.spawn(2)] + [
        ss.spawn(1)[0]
    ]
    render_seeds = render_ss.generate_state(len(plan.waypoints))

    drift = pf.DriftModel.sample(drift_p, drift_rng)
    start = plan.waypoints[0]
    ps = pf.ParticleSet.initialize(start.xy, config.init_sigma, config.n_particles, filt_rng)
    est = start.xy.copy()

    k_steps = len(plan.waypoints) - 1
    true_xy = np.empty((k_steps, 2))
    est_xy = np.empty((k_steps, 2))
    errors = np.empty(k_steps)
    updated_flags = np.zeros(k_steps, dtype=int)

    for k in range(1, len(plan.waypoints)):
        wp_prev, wp = plan.waypoints[k - 1], plan.waypoints[k]
        s_true = wp.xy - wp_prev.xy
        s_meas = pf.simulate_odometry(s_true, drift)

        detections_rover = None
        if plan.observation_stops[k]:
            gate_ref = wp.xy if config.gate_on_truth else est + s_meas
            near = nearest_rim_distance(cmap, gate_ref, Pose(*gate_ref, wp.heading))
            if always_render or near <= config.gate_radius:
                img = render_range_image(dem, wp, cam, noise, seed=int(render_seeds[k]))
                img = refine_stereo(img)
                detections = det.detect(img, detection_params)
                if detections:
                    detections_rover = np.concatenate(
                        [d.rover_points for d in detections], axis=0
                    )

        ps, belief, updated = pf.filter_step(
            ps, s_meas, detections_rover, cmap, wp.heading, config, true_pose=wp
        )
        est = belief.xy
        true_xy[k - 1] = wp.xy
        est_xy[k - 1] = est
        errors[k - 1] = np.linalg.norm(est - wp.xy)
        updated_flags[k - 1] = int(updated)

    return RunResult(true_xy, est_xy, errors, updated_flags, seed)


def monte_carlo(
    plan: TrajectoryPlan,
    cmap: CraterMap,
    dem: DemRaster,
    cam: CameraModel,
    noise: SensingNoiseModel,
    drift_p: float,
    config: pf.FilterConfig,
    n_runs: int,
    base_seed: int,
    detection_params: DetectionParams = DetectionParams(),
) -> McSummary:
    """Independent replays with distinct seeds and fresh bias directions."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    run_seeds = np.random.SeedSequence(base_seed).generate_state(n_runs)
    finals = []
    diverged = 0
    for s in run_seeds:
        r = replay(plan, cmap, dem, cam, noise, drift_p, config, int(s), detection_params)
        finals.append(r.final_error)
        diverged += int(r.diverged)
    finals_arr = np.array(sorted(finals))  # order-independent aggregation
    return McSummary(
        avg_error=float(finals_arr.mean()),
        stdev_error=float(finals_arr.std(ddof=0)),
        max_error=float(finals_arr.max()),
        frac_gt_5m=float(np.mean(finals_arr > 5.0)),
        runs=n_runs,
        final_errors=tuple(float(e) for e in finals),
        diverged_runs=diverged,
    )


# ---------------------------------------------------------------------------
# Timing harness


def timing_harness(
    cmap: CraterMap,
    dem: DemRaster,
    cam: CameraModel,
    pose: Pose,
    particle_counts: tuple[int, ...] = (50, 100, 200),
    n_detection_points: int = 500,
    repeats: int = 3,
    seed: int = 0,
) -> dict:
    """Wall-time of one detection pass and one filter step per particle count."""
    img = render_range_image(dem, pose, cam, seed=seed)
    det_times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        det.detect(refine_stereo(img))
        det_times.append(time.perf_counter() - t0)

    rng = np.random.default_rng(seed)
    fake_det = rng.uniform(5.0, 20.0, size=(n_detection_points, 2))
    rows = []
    for n in particle_counts:
        cfg = pf.FilterConfig(n_particles=n, n_eff_thresh=n / 2)
        times = []
        for _ in range(repeats):
            ps = pf.ParticleSet.initialize(pose.xy, 3.0, n, np.random.default_rng(seed))
            t0 = time.perf_counter()
            pf.filter_step(ps, np.array([1.0, 0.0]), fake_det, cmap, pose.heading, cfg)
            times.append(time.perf_counter() - t0)
        rows.append(
            {
                "n_particles": n,
                "mean_s": float(np.mean(times)),
                "max_s": float(np.max(times)),
            }
        )
    return {
        "detect": {"mean_s": float(np.mean(det_times)), "max_s": float(np.max(det_times))},
        "filter_step": rows,
        "n_detection_points": n_detection_points,
        "image_size": [cam.image_width, cam.image_height],
    }


# ---------------------------------------------------------------------------
# File output


def save_run_result(result: RunResult, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "true_x", "true_y", "est_x", "est_y", "error_m", "updated"])
        for k in range(len(result.errors)):
            w.writerow(
                [
                    k,
                    f"{result.true_xy[k, 0]:.6f}",
                    f"{result.true_xy[k, 1]:.6f}",
                    f"{result.est_xy[k, 0]:.6f}",
                    f"{result.est_xy[k, 1]:.6f}",
                    f"{result.errors[k]:.6f}",
                    result.updated[k],
                ]
            )


def save_mc_summary(summary: McSummary, path: str | Path) -> None:
    Path(path).write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")


def save_trajectory(plan: TrajectoryPlan, path: str | Path) -> None:
    doc = {
        "traj_type": plan.traj_type,
        "landmark_ids": list(plan.landmark_ids),
        "waypoints": [
            {
                "x": round(w.x, 6),
                "y": round(w.y, 6),
                "heading": round(w.heading, 9),
                "observe": bool(o),
            }
            for w, o in zip(plan.waypoints, plan.observation_stops)
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_trajectory(path: str | Path) -> TrajectoryPlan:
    doc = json.loads(Path(path).read_text())
    waypoints = tuple(Pose(w["x"], w["y"], w["heading"]) for w in doc["waypoints"])
    stops = tuple(bool(w["observe"]) for w in doc["waypoints"])
    return TrajectoryPlan(waypoints, stops, doc["traj_type"], tuple(doc["landmark_ids"]))
