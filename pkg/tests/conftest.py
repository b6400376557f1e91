"""Shared fixtures: small worlds sized so the suite stays fast."""

from math import radians

import numpy as np
import pytest

from craterloc.camera import CameraModel, SensingNoiseModel, default_camera
from craterloc.geometry import Pose
from craterloc.mapgen import (
    DemRaster,
    DensityParams,
    LandmarkSpec,
    generate_crater_field,
)


@pytest.fixture(scope="session")
def flat_dem():
    """Level ground, 60 x 60 m at 0.25 m."""
    n = 241
    return DemRaster(0.25, (0.0, 0.0), np.zeros((n, n)))


@pytest.fixture(scope="session")
def small_camera():
    return CameraModel.from_hfov(radians(60.0), image_width=256, image_height=192)


@pytest.fixture(scope="session")
def oracle_world():
    """Flat-base field with a single 15 m landmark, for detector oracles.

    The base sinusoid is disabled so the terrain around the crater equals the
    parametric crater profile exactly and occlusion geometry can be computed
    in closed form.
    """
    cmap, dem = generate_crater_field(
        seed=7,
        extent=120.0,
        density_params=DensityParams(
            resolution=0.4, base_amplitude=0.0, background_spacing=1000.0
        ),
        landmark_spec=LandmarkSpec(placements=((60.0, 60.0, 15.0),)),
    )
    crater = cmap.landmarks[0]
    pose_10m = Pose(60.0, 60.0 - (crater.radius + 10.0), np.pi / 2)
    return {
        "cmap": cmap,
        "dem": dem,
        "crater": crater,
        "camera": default_camera(),
        "pose_10m": pose_10m,
    }


@pytest.fixture(scope="session")
def mc_world(small_camera):
    """640 m field with two 15 m landmarks on an east-west corridor.

    Sized for Monte Carlo batches: 0.5 m DEM and a 256 x 192 camera keep a
    full 30-run batch around twenty seconds.
    """
    cmap, dem = generate_crater_field(
        seed=11,
        extent=640.0,
        density_params=DensityParams(resolution=0.5, background_spacing=200.0),
        landmark_spec=LandmarkSpec(
            placements=((220.0, 320.0, 15.0), (560.0, 320.0, 15.0))
        ),
    )
    return {
        "cmap": cmap,
        "dem": dem,
        "camera": small_camera,
        "noise": SensingNoiseModel(),
        "start": (20.0, 320.0),
        "goal": (620.0, 320.0),
    }
