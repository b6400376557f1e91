#!/usr/bin/env python3
"""Detector quality versus observation range.

Builds a flat-base field with a single 15 m landmark crater, then runs the
rim detector every metre from 5 m to 25 m standoff, with and without sensing
noise, and prints match score (q) and rim coverage at each range.

Usage:
    python3 scripts/perception_sweep.py [--out sweep.jsonl] [--seed N]
"""

import argparse
import json

import numpy as np

from craterloc.camera import (
    NOISELESS,
    SensingNoiseModel,
    default_camera,
    refine_stereo,
    render_range_image,
)
from craterloc.detect import detect, rim_percent_detected, score_detections
from craterloc.geometry import Pose
from craterloc.mapgen import (
    DensityParams,
    LandmarkSpec,
    front_arc,
    generate_crater_field,
    sample_rim,
)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=None, help="optional JSONL output path")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    cmap, dem = generate_crater_field(
        seed=args.seed,
        extent=120.0,
        density_params=DensityParams(
            resolution=0.4, base_amplitude=0.0, background_spacing=1000.0
        ),
        landmark_spec=LandmarkSpec(placements=((60.0, 60.0, 15.0),)),
    )
    crater = cmap.landmarks[0]
    cam = default_camera()
    noise = SensingNoiseModel()

    rows = []
    print(f"{'range':>6} {'q_clean':>8} {'rim%_clean':>10} {'q_noisy':>8} {'rim%_noisy':>10}")
    for dist in range(5, 26):
        pose = Pose(60.0, 60.0 - (crater.radius + dist), np.pi / 2)
        arc = front_arc(sample_rim(crater, cmap.rim_sample_spacing), pose)
        row = {"range_m": dist}
        for tag, nm in (("clean", NOISELESS), ("noisy", noise)):
            img = refine_stereo(
                render_range_image(dem, pose, cam, nm, seed=1000 + dist)
            )
            dets = detect(img)
            row[f"q_{tag}"] = score_detections(dets, cmap, pose) if dets else 0.0
            row[f"rim_pct_{tag}"] = rim_percent_detected(dets, arc)
        rows.append(row)
        print(
            f"{dist:>5}m {row['q_clean']:>8.3f} {row['rim_pct_clean']:>10.1f}"
            f" {row['q_noisy']:>8.3f} {row['rim_pct_noisy']:>10.1f}"
        )

    if args.out:
        with open(args.out, "w") as fh:
            for row in rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
