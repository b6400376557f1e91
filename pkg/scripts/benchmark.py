#!/usr/bin/env python3
"""Timing smoke test: detector and filter-step wall time at several particle
counts, on a freshly generated single-landmark field.

Usage:
    python3 scripts/benchmark.py [--particles 50,100,200,400]
"""

import argparse
import json

import numpy as np

from craterloc.camera import default_camera
from craterloc.geometry import Pose
from craterloc.mapgen import DensityParams, LandmarkSpec, generate_crater_field
from craterloc.sim import timing_harness


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--particles", default="50,100,200")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    cmap, dem = generate_crater_field(
        seed=args.seed,
        extent=120.0,
        density_params=DensityParams(resolution=0.4, background_spacing=1000.0),
        landmark_spec=LandmarkSpec(placements=((60.0, 60.0, 15.0),)),
    )
    crater = cmap.landmarks[0]
    pose = Pose(60.0, 60.0 - (crater.radius + 10.0), np.pi / 2)
    counts = tuple(int(n) for n in args.particles.split(","))
    report = timing_harness(cmap, dem, default_camera(), pose, counts, seed=args.seed)
    print(json.dumps(report, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
