"""2D pose and frame transforms shared across the pipeline.

World frame: x east, y north, meters. Heading is the angle of the rover's
forward axis, radians CCW from world +x. Rover frame: x forward, y left.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Pose:
    """2D position plus heading (radians CCW from +x)."""

    x: float
    y: float
    heading: float = 0.0

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def forward(self) -> np.ndarray:
        return np.array([np.cos(self.heading), np.sin(self.heading)])


def rotation2d(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def rover_to_world(points_rover: np.ndarray, pose: Pose) -> np.ndarray:
    """Map (N,2) rover-frame ground points into the world frame."""
    pts = np.atleast_2d(np.asarray(points_rover, dtype=float))
    return pts @ rotation2d(pose.heading).T + pose.xy


def world_to_rover(points_world: np.ndarray, pose: Pose) -> np.ndarray:
    """Inverse of :func:`rover_to_world`."""
    pts = np.atleast_2d(np.asarray(points_world, dtype=float))
    return (pts - pose.xy) @ rotation2d(pose.heading)
