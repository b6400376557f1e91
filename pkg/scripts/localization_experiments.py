#!/usr/bin/env python3
"""Monte Carlo localization study over trajectory types and drift rates.

Reproduces the headline experiment: a 600 m corridor past two 15 m landmark
craters, driven with straight / half-survey / full-survey trajectories under
1-3% odometry drift, 30 runs each. Prints a summary table and optionally
writes per-batch summaries, final-error CSVs, and SVG histograms.

Usage:
    python3 scripts/localization_experiments.py [--runs 30] [--out-dir results/]
"""

import argparse
from pathlib import Path

import numpy as np

from craterloc import particle_filter as pf
from craterloc.camera import CameraModel, SensingNoiseModel
from craterloc.cli import histogram_svg
from craterloc.mapgen import DensityParams, LandmarkSpec, generate_crater_field
from craterloc.sim import monte_carlo, plan_trajectory, save_mc_summary


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=30)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out-dir", default=None)
    args = ap.parse_args()

    cmap, dem = generate_crater_field(
        seed=11,
        extent=640.0,
        density_params=DensityParams(resolution=0.5, background_spacing=200.0),
        landmark_spec=LandmarkSpec(
            placements=((220.0, 320.0, 15.0), (560.0, 320.0, 15.0))
        ),
    )
    camera = CameraModel.from_hfov(np.radians(60.0), image_width=256, image_height=192)
    noise = SensingNoiseModel()
    start, goal = (20.0, 320.0), (620.0, 320.0)

    out = Path(args.out_dir) if args.out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)

    print(
        f"{'trajectory':>12} {'drift':>6} {'avg':>6} {'stdev':>6} {'max':>7}"
        f" {'>5m':>5} {'div':>4}"
    )
    for traj_type in ("straight", "half_survey", "full_survey"):
        plan = plan_trajectory(cmap, start, goal, traj_type)
        for drift in (0.01, 0.02, 0.03):
            s = monte_carlo(
                plan, cmap, dem, camera, noise, drift, pf.FilterConfig(),
                n_runs=args.runs, base_seed=args.seed,
            )
            print(
                f"{traj_type:>12} {drift:>5.0%} {s.avg_error:>6.2f}"
                f" {s.stdev_error:>6.2f} {s.max_error:>7.2f}"
                f" {s.frac_gt_5m:>5.2f} {s.diverged_runs:>4}"
            )
            if out:
                stem = f"{traj_type}_drift{int(drift * 100)}pct"
                save_mc_summary(s, out / f"{stem}.json")
                (out / f"{stem}.svg").write_text(histogram_svg(s.final_errors))
    if out:
        print(f"wrote {out}/")


if __name__ == "__main__":
    main()
