"""Crater-landmark global localization for dark terrain.

Synthetic DEM terrain with parametric crater bowls, a pinhole range camera,
crater leading-edge detection, and a particle filter that corrects drifted
2D position against an orbital crater map.
"""

from craterloc.geometry import Pose
from craterloc.mapgen import Crater, CraterMap, DemRaster, RimArc
from craterloc.camera import CameraModel, RangeImage, SensingNoiseModel
from craterloc.detect import DetectionParams, RimDetection
from craterloc.particle_filter import Belief, DriftModel, FilterConfig, ParticleSet

__all__ = [
    "Pose",
    "Crater",
    "CraterMap",
    "DemRaster",
    "RimArc",
    "CameraModel",
    "RangeImage",
    "SensingNoiseModel",
    "DetectionParams",
    "RimDetection",
    "Belief",
    "DriftModel",
    "FilterConfig",
    "ParticleSet",
]
