import time

import numpy as np
import pytest

from craterloc import particle_filter as pf
from craterloc.camera import NOISELESS
from craterloc.geometry import Pose
from craterloc.sim import (
    McSummary,
    PlanningError,
    TrajectoryPlan,
    load_trajectory,
    monte_carlo,
    plan_trajectory,
    replay,
    save_run_result,
    save_trajectory,
    timing_harness,
)


@pytest.fixture(scope="module")
def plans(mc_world):
    w = mc_world
    return {
        t: plan_trajectory(w["cmap"], w["start"], w["goal"], t)
        for t in ("straight", "half_survey", "full_survey")
    }


# ---------------------------------------------------------------------------
# Trajectory planning


def test_invalid_traj_type_raises(mc_world):
    with pytest.raises(ValueError):
        plan_trajectory(mc_world["cmap"], (0, 0), (100, 0), "spiral")


def test_standoff_band_enforced(mc_world):
    w = mc_world
    with pytest.raises(PlanningError):
        plan_trajectory(w["cmap"], w["start"], w["goal"], "half_survey", standoff=5.0)


def test_no_landmark_on_route_raises(mc_world):
    with pytest.raises(PlanningError):
        plan_trajectory(mc_world["cmap"], (0.0, 10.0), (10.0, 10.0), "half_survey")


def test_coincident_endpoints_raise(mc_world):
    with pytest.raises(PlanningError):
        plan_trajectory(mc_world["cmap"], (5.0, 5.0), (5.0, 5.0), "straight")


def test_lengths_ordering(plans):
    assert (
        plans["straight"].length
        < plans["half_survey"].length
        < plans["full_survey"].length
    )


def test_survey_stops_in_standoff_band(mc_world, plans):
    craters = mc_world["cmap"].landmarks
    for t in ("half_survey", "full_survey"):
        plan = plans[t]
        flagged = [w for w, o in zip(plan.waypoints, plan.observation_stops) if o]
        assert flagged
        for w in flagged:
            rim_dist = min(
                abs(np.hypot(w.x - c.center[0], w.y - c.center[1]) - c.radius)
                for c in craters
            )
            assert 7.0 <= rim_dist <= 13.0


def test_half_survey_bearings_span_half_circle(mc_world, plans):
    plan = plans["half_survey"]
    c = mc_world["cmap"].landmarks[0]
    flagged = np.array(
        [
            [w.x, w.y]
            for w, o in zip(plan.waypoints, plan.observation_stops)
            if o and np.hypot(w.x - c.center[0], w.y - c.center[1]) < 20.0
        ]
    )
    bearings = np.unwrap(
        np.arctan2(flagged[:, 1] - c.center[1], flagged[:, 0] - c.center[0])
    )
    rho = c.radius + 10.0
    assert np.ptp(bearings) >= np.pi - 10.0 / rho  # within one stop spacing


def test_stop_spacing_bounded(plans):
    for plan in plans.values():
        pts = np.array([[w.x, w.y] for w in plan.waypoints])
        gaps = np.hypot(*np.diff(pts, axis=0).T)
        assert gaps.max() <= 10.0 + 1e-6


def test_survey_headings_face_the_crater(mc_world, plans):
    c = mc_world["cmap"].landmarks[0]
    plan = plans["half_survey"]
    for w, o in zip(plan.waypoints, plan.observation_stops):
        if o and np.hypot(w.x - c.center[0], w.y - c.center[1]) < 20.0:
            to_center = np.array([c.center[0] - w.x, c.center[1] - w.y])
            to_center /= np.linalg.norm(to_center)
            assert to_center @ w.forward == pytest.approx(1.0, abs=1e-9)


def test_plan_validation():
    with pytest.raises(ValueError):
        TrajectoryPlan((Pose(0, 0, 0),), (True, False), "straight", ())


# ---------------------------------------------------------------------------
# Replay


def test_replay_no_error_sources(mc_world, plans):
    w = mc_world
    cfg = pf.FilterConfig(process_noise_p=0.0)
    r = replay(
        plans["half_survey"], w["cmap"], w["dem"], w["camera"], NOISELESS, 0.0, cfg, 0
    )
    assert r.final_error < 0.5
    assert not r.diverged


def test_replay_typical_half_survey(mc_world, plans):
    w = mc_world
    r = replay(
        plans["half_survey"],
        w["cmap"],
        w["dem"],
        w["camera"],
        w["noise"],
        0.02,
        pf.FilterConfig(),
        seed=0,
    )
    assert r.final_error < 5.0
    assert r.updated.sum() > 0


def test_replay_deterministic(mc_world, plans):
    w = mc_world
    args = (plans["half_survey"], w["cmap"], w["dem"], w["camera"], w["noise"], 0.02)
    a = replay(*args, pf.FilterConfig(), seed=7)
    b = replay(*args, pf.FilterConfig(), seed=7)
    assert np.array_equal(a.est_xy, b.est_xy)
    assert np.array_equal(a.errors, b.errors)


def test_replay_without_sensing_accumulates_drift(mc_world):
    # dead reckoning only: ~2% of 200 m plus Monte Carlo spread
    wps = tuple(Pose(20.0 + 10.0 * k, 100.0, 0.0) for k in range(21))
    plan = TrajectoryPlan(wps, tuple([False] * 21), "straight", ())
    w = mc_world
    finals = [
        replay(
            plan, w["cmap"], w["dem"], w["camera"], w["noise"], 0.02,
            pf.FilterConfig(), seed=s,
        ).final_error
        for s in range(8)
    ]
    assert 1.0 < np.mean(finals) < 10.0  # expectation is 0.02 * 200 = 4 m


# ---------------------------------------------------------------------------
# Monte Carlo aggregation


def _no_sense_plan(n=6):
    wps = tuple(Pose(10.0 * k, 50.0, 0.0) for k in range(n))
    return TrajectoryPlan(wps, tuple([False] * n), "straight", ())


def test_mc_single_run_summary(mc_world):
    w = mc_world
    s = monte_carlo(
        _no_sense_plan(), w["cmap"], w["dem"], w["camera"], w["noise"], 0.02,
        pf.FilterConfig(), n_runs=1, base_seed=5,
    )
    assert s.runs == 1
    assert s.stdev_error == 0.0
    assert s.avg_error == s.max_error == s.final_errors[0]
    assert 0.0 <= s.frac_gt_5m <= 1.0


def test_mc_deterministic(mc_world):
    w = mc_world
    args = (
        _no_sense_plan(), w["cmap"], w["dem"], w["camera"], w["noise"], 0.02,
        pf.FilterConfig(),
    )
    assert monte_carlo(*args, n_runs=4, base_seed=9) == monte_carlo(
        *args, n_runs=4, base_seed=9
    )


def test_mc_rejects_zero_runs(mc_world):
    w = mc_world
    with pytest.raises(ValueError):
        monte_carlo(
            _no_sense_plan(), w["cmap"], w["dem"], w["camera"], w["noise"], 0.02,
            pf.FilterConfig(), n_runs=0, base_seed=1,
        )


# ---------------------------------------------------------------------------
# Timing harness


def test_timing_harness_report(mc_world):
    w = mc_world
    c = w["cmap"].landmarks[0]
    pose = Pose(c.center[0] - c.radius - 10.0, c.center[1], 0.0)
    report = timing_harness(
        w["cmap"], w["dem"], w["camera"], pose, particle_counts=(50, 100, 200)
    )
    assert [row["n_particles"] for row in report["filter_step"]] == [50, 100, 200]
    assert report["detect"]["mean_s"] > 0
    times = [row["mean_s"] for row in report["filter_step"]]
    assert times[2] > times[0]  # more particles cost more


def test_update_cost_scales_with_detection_count(mc_world):
    # per-update cost should grow roughly linearly in the detection count
    cmap = mc_world["cmap"]
    rng = np.random.default_rng(0)

    def cost(m, repeats=5):
        det = rng.uniform(5.0, 20.0, size=(m, 2))
        best = np.inf
        for _ in range(repeats):
            ps = pf.ParticleSet.initialize((200.0, 300.0), 3.0, 200, rng)
            t0 = time.perf_counter()
            pf.update_weights(ps, det, cmap, 0.0)
            best = min(best, time.perf_counter() - t0)
        return best

    cost(100)  # warm caches
    t100, t800 = cost(100), cost(800)
    assert t800 < 24 * t100 + 1e-3  # 8x the work, wide scheduling allowance


# ---------------------------------------------------------------------------
# File output


def test_trajectory_round_trip(tmp_path, plans):
    path = tmp_path / "plan.json"
    save_trajectory(plans["half_survey"], path)
    back = load_trajectory(path)
    assert back.traj_type == "half_survey"
    assert back.landmark_ids == plans["half_survey"].landmark_ids
    assert len(back.waypoints) == len(plans["half_survey"].waypoints)
    assert back.observation_stops == plans["half_survey"].observation_stops


def test_run_result_csv(tmp_path, mc_world):
    w = mc_world
    r = replay(
        _no_sense_plan(), w["cmap"], w["dem"], w["camera"], w["noise"], 0.02,
        pf.FilterConfig(), seed=3,
    )
    path = tmp_path / "run.csv"
    save_run_result(r, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "step,true_x,true_y,est_x,est_y,error_m,updated"
    assert len(lines) == 1 + len(r.errors)


def test_mc_summary_serialization(tmp_path):
    s = McSummary(1.0, 0.5, 2.0, 0.1, 10, tuple(float(i) for i in range(10)), 0)
    d = s.to_dict()
    assert d["runs"] == 10
    assert len(d["final_errors_m"]) == 10
