"""Localization back end.

Drifting odometry simulation, log-domain particle filter weighted by the
crater-match score, effective-sample-size degeneracy test, and systematic
resampling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from craterloc.detect import EPSILON_DEFAULT
from craterloc.geometry import Pose, rotation2d
from craterloc.mapgen import CraterMap, front_arc_points, nearest_rim_distance


class DegenerateFilterError(RuntimeError):
    """All particle weights vanished; the filter cannot resample."""


@dataclass(frozen=True)
class Belief:
    x: float
    y: float

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass
class FilterConfig:
    n_particles: int = 100
    n_eff_thresh: float = 50.0
    epsilon: float = EPSILON_DEFAULT
    init_sigma: float = 3.0
    gate_radius: float = 20.0
    process_noise_p: float = 0.05
    gate_on_truth: bool = False  # reproduce ground-truth gating for comparison
    heading_sigma: float = 0.0

    def __post_init__(self):
        if not 1 <= self.n_eff_thresh <= self.n_particles:
            raise ValueError("need 1 <= n_eff_thresh <= n_particles")
        if self.gate_radius <= 0:
            raise ValueError("gate_radius must be positive")


@dataclass
class ParticleSet:
    positions: np.ndarray  # (N, 2)
    log_weights: np.ndarray  # (N,)
    rng: np.random.Generator

    def __post_init__(self):
        if len(self.positions) != len(self.log_weights) or len(self.positions) < 1:
            raise ValueError("need N >= 1 particles with matching weights")
        if not np.all(np.isfinite(self.log_weights)):
            raise ValueError("log weights must be finite")

    def __len__(self) -> int:
        return len(self.positions)

    @classmethod
    def initialize(cls, mean, sigma: float, n: int, rng: np.random.Generator) -> "ParticleSet":
        mean = np.asarray(mean, dtype=float)
        positions = mean + rng.standard_normal((n, 2)) * sigma
        return cls(positions, np.zeros(n), rng)

    def normalized_weights(self) -> np.ndarray:
        lw = self.log_weights - self.log_weights.max()
        w = np.exp(lw)
        return w / w.sum()

    def estimate(self) -> Belief:
        w = self.normalized_weights()
        m = w @ self.positions
        return Belief(float(m[0]), float(m[1]))


@dataclass
class DriftModel:
    """Relative-localization drift: per-run bias direction and error rate."""

    error_rate: float
    direction: np.ndarray  # unit 2-vector, sampled once per run
    rng: np.random.Generator

    def __post_init__(self):
        if self.error_rate < 0:
            raise ValueError("error rate must be non-negative")
        n = np.linalg.norm(self.direction)
        if not np.isclose(n, 1.0):
            raise ValueError("bias direction must be a unit vector")

    @classmethod
    def sample(cls, error_rate: float, rng: np.random.Generator) -> "DriftModel":
        ang = rng.uniform(0.0, 2 * np.pi)
        return cls(error_rate, np.array([np.cos(ang), np.sin(ang)]), rng)


def simulate_odometry(step_true, drift: DriftModel) -> np.ndarray:
    """Corrupt a true translation step with the biased drift term.

    The bias r is Gaussian with mean d_hat * p * |step| componentwise and
    covariance diag(|mu_x|, |mu_y|).
    """
    step_true = np.asarray(step_true, dtype=float)
    mu = drift.direction * drift.error_rate * np.linalg.norm(step_true)
    sigma = np.sqrt(np.abs(mu))
    r = drift.rng.normal(mu, sigma)
    return step_true + r


def propagate(ps: ParticleSet, step, process_noise_p: float) -> ParticleSet:
    """Translate every particle by step plus per-axis Gaussian process noise
    with sigma = process_noise_p * |step|. Weights unchanged."""
    step = np.asarray(step, dtype=float)
    sigma = process_noise_p * np.linalg.norm(step)
    noise = ps.rng.standard_normal(ps.positions.shape) * sigma
    return ParticleSet(ps.positions + step + noise, ps.log_weights.copy(), ps.rng)


def update_weights(
    ps: ParticleSet,
    detections_rover: np.ndarray,
    cmap: CraterMap,
    camera_heading: float,
    epsilon: float = EPSILON_DEFAULT,
) -> ParticleSet:
    """Log-domain weight update from the crater-match score.

    Detections (rover-frame 2D points) are re-projected into world as if the
    rover stood at each particle with the known heading, scored against the
    landmark front arcs, and the log-scores (shifted by their minimum so the
    increments are non-negative) are added to the log-weights. The running
    max is subtracted afterwards to keep weights bounded over long runs.
    """
    detections_rover = np.atleast_2d(np.asarray(detections_rover, dtype=float))
    m = len(detections_rover)
    if m == 0:
        raise ValueError("update_weights requires at least one detection")
    arc = front_arc_points(cmap, Pose(0.0, 0.0, camera_heading))
    tree = cKDTree(arc)
    offsets = detections_rover @ rotation2d(camera_heading).T  # (m, 2)
    pts = ps.positions[:, None, :] + offsets[None, :, :]  # (N, m, 2)
    d, _ = tree.query(pts.reshape(-1, 2))
    q_inc = epsilon + d.reshape(len(ps), m).sum(axis=1)
    log_q = np.log(np.minimum(1.0, m / q_inc))
    lw = ps.log_weights + (log_q - log_q.min())
    lw -= lw.max()
    return ParticleSet(ps.positions.copy(), lw, ps.rng)


def effective_sample_size(ps: ParticleSet) -> float:
    w = ps.normalized_weights()
    return float(1.0 / np.sum(w * w))


def systematic_resample(ps: ParticleSet, u0: float | None = None) -> ParticleSet:
    """Stratified resampling: one uniform offset, evenly spaced quantiles.

    Weights are normalized from the log domain via log-sum-exp. Output has
    the same particle count and uniform weights. u0 may be pinned for tests.
    """
    n = len(ps)
    w = ps.normalized_weights()
    if not np.any(w > 0) or not np.all(np.isfinite(w)):
        raise DegenerateFilterError("all particle weights vanished")
    cum = np.cumsum(w)
    cum[-1] = 1.0  # guard against float round-off
    if u0 is None:
        u0 = ps.rng.uniform(0.0, 1.0 / n)
    u = u0 + np.arange(n) / n
    idx = np.searchsorted(cum, u, side="right")
    return ParticleSet(ps.positions[idx].copy(), np.zeros(n), ps.rng)


def filter_step(
    ps: ParticleSet,
    step,
    detections_rover: np.ndarray | None,
    cmap: CraterMap,
    camera_heading: float,
    config: FilterConfig,
    true_pose: Pose | None = None,
) -> tuple[ParticleSet, Belief, bool]:
    """One filter iteration: propagate, gated weight update, resample.

    Returns (particles, estimate, updated). The measurement update runs only
    when detections exist and the gate reference (the current estimate, or
    the true pose if gate_on_truth) is within gate_radius of a landmark
    front arc.
    """
    ps = propagate(ps, step, config.process_noise_p)
    est = ps.estimate()
    updated = False
    if detections_rover is not None and len(detections_rover) > 0:
        gate_ref = true_pose.xy if (config.gate_on_truth and true_pose is not None) else est.xy
        heading = camera_heading
        if config.heading_sigma > 0:
            heading = heading + ps.rng.normal(0.0, config.heading_sigma)
        gate_pose = Pose(float(gate_ref[0]), float(gate_ref[1]), heading)
        if nearest_rim_distance(cmap, gate_ref, gate_pose) <= config.gate_radius:
            ps = update_weights(ps, detections_rover, cmap, heading, config.epsilon)
            if effective_sample_size(ps) <= config.n_eff_thresh:
                ps = systematic_resample(ps)
            est = ps.estimate()
            updated = True
    return ps, est, updated


def save_snapshot(ps: ParticleSet, step_index: int, path: str | Path) -> None:
    est = ps.estimate()
    doc = {
        "step_index": step_index,
        "particles": np.round(ps.positions, 6).tolist(),
        "log_weights": np.round(ps.log_weights, 9).tolist(),
        "estimate": [round(est.x, 6), round(est.y, 6)],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")
