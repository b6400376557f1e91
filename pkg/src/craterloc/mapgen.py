"""Orbital crater map and DEM terrain: generation, rim sampling, front-arc
selection, and file I/O (crater map JSON, DEM as ESRI ASCII grid).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from craterloc.geometry import Pose


class PlacementError(RuntimeError):
    """Raised when the requested landmark craters cannot be placed."""


class ConfigError(ValueError):
    """Raised for inconsistent map configuration (e.g. no landmarks)."""


@dataclass(frozen=True)
class Crater:
    id: int
    center: tuple[float, float]
    diameter: float
    depth: float
    is_landmark: bool = False

    def __post_init__(self):
        if self.diameter <= 0 or self.depth <= 0:
            raise ValueError("crater diameter and depth must be positive")

    @property
    def radius(self) -> float:
        return self.diameter / 2.0


@dataclass(frozen=True)
class CraterMap:
    craters: tuple[Crater, ...]
    rim_sample_spacing: float = 0.25

    def __post_init__(self):
        if self.rim_sample_spacing <= 0:
            raise ValueError("rim_sample_spacing must be positive")
        ids = [c.id for c in self.craters]
        if len(ids) != len(set(ids)):
            raise ValueError("crater ids must be unique")

    @property
    def landmarks(self) -> tuple[Crater, ...]:
        return tuple(c for c in self.craters if c.is_landmark)


@dataclass(frozen=True)
class DemRaster:
    resolution: float
    origin: tuple[float, float]
    cells: np.ndarray  # (height, width) float64, row 0 at origin y

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if not np.all(np.isfinite(self.cells)):
            raise ValueError("all elevations must be finite")
        self.cells.setflags(write=False)

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) covered by cell centers."""
        x0, y0 = self.origin
        return (
            x0,
            y0,
            x0 + (self.width - 1) * self.resolution,
            y0 + (self.height - 1) * self.resolution,
        )

    def contains(self, x: float, y: float) -> bool:
        xmin, ymin, xmax, ymax = self.extent
        return xmin <= x <= xmax and ymin <= y <= ymax

    def sample(self, x, y):
        """Bilinear elevation at world (x, y); arrays broadcast."""
        fx = (np.asarray(x, dtype=float) - self.origin[0]) / self.resolution
        fy = (np.asarray(y, dtype=float) - self.origin[1]) / self.resolution
        ix = np.clip(np.floor(fx).astype(int), 0, self.width - 2)
        iy = np.clip(np.floor(fy).astype(int), 0, self.height - 2)
        tx = np.clip(fx - ix, 0.0, 1.0)
        ty = np.clip(fy - iy, 0.0, 1.0)
        z00 = self.cells[iy, ix]
        z10 = self.cells[iy, ix + 1]
        z01 = self.cells[iy + 1, ix]
        z11 = self.cells[iy + 1, ix + 1]
        return (
            z00 * (1 - tx) * (1 - ty)
            + z10 * tx * (1 - ty)
            + z01 * (1 - tx) * ty
            + z11 * tx * ty
        )


@dataclass(frozen=True)
class RimArc:
    crater_id: int
    points: np.ndarray  # (N, 2) world positions on the rim

    def __post_init__(self):
        self.points.setflags(write=False)

    def __len__(self) -> int:
        return len(self.points)


# ---------------------------------------------------------------------------
# Crater profile and field generation


LIP_HEIGHT_FRAC = 0.15  # raised rim lip, fraction of depth
LIP_WIDTH_FRAC = 0.15  # lip half-width, fraction of radius


def crater_profile(r, diameter: float, depth: float):
    """Elevation delta at radial distance r from the crater center.

    Cosine bowl in normalized r^2 (-depth at center, 0 at the rim): a flat
    floor with steep inner walls near the rim, plus a raised cosine lip
    peaking at the rim crest, so a sharp occlusion edge exists for the
    leading-edge detector.
    """
    r = np.asarray(r, dtype=float)
    radius = diameter / 2.0
    u = np.minimum(r, radius) / radius
    bowl = np.where(r < radius, -depth * np.cos(0.5 * np.pi * u * u), 0.0)
    w = LIP_WIDTH_FRAC * radius
    lip_h = LIP_HEIGHT_FRAC * depth
    near_rim = np.abs(r - radius) < w
    lip = np.where(near_rim, lip_h * 0.5 * (1.0 + np.cos(np.pi * (r - radius) / w)), 0.0)
    return bowl + lip


@dataclass(frozen=True)
class DensityParams:
    """Background crater frequency and terrain texture."""

    resolution: float = 0.25
    base_amplitude: float = 0.15
    base_wavelength: float = 120.0
    background_spacing: float = 100.0  # roughly one background crater per spacing^2
    background_diameter: tuple[float, float] = (10.0, 14.0)
    depth_ratio: float = 0.1


@dataclass(frozen=True)
class LandmarkSpec:
    """Which craters are flagged as localization landmarks.

    Explicit placements (x, y, diameter) win over random placement.
    """

    count: int = 2
    diameter_range: tuple[float, float] = (14.0, 16.0)
    placements: tuple[tuple[float, float, float], ...] | None = None
    clearance: float = 25.0
    max_tries: int = 200


def generate_crater_field(
    seed: int,
    extent: float,
    density_params: DensityParams = DensityParams(),
    landmark_spec: LandmarkSpec = LandmarkSpec(),
) -> tuple[CraterMap, DemRaster]:
    """Deterministically synthesize a crater map and matching DEM.

    The DEM covers [0, extent]^2 with the origin at (0, 0).
    """
    if extent <= 0:
        raise ValueError("extent must be positive")
    rng = np.random.default_rng(seed)
    dp, ls = density_params, landmark_spec

    craters: list[Crater] = []
    next_id = 0

    def overlaps(x, y, diam):
        for c in craters:
            sep = math.hypot(x - c.center[0], y - c.center[1])
            if sep < (diam + c.diameter) / 2.0 + ls.clearance * 0.2:
                return True
        return False

    # Landmarks first so rejection sampling keeps them clean of background.
    if ls.placements is not None:
        for (x, y, diam) in ls.placements:
            if not (0 <= x <= extent and 0 <= y <= extent):
                raise PlacementError(f"landmark at ({x}, {y}) outside extent {extent}")
            craters.append(
                Crater(next_id, (x, y), diam, dp.depth_ratio * diam, is_landmark=True)
            )
            next_id += 1
    else:
        margin = ls.diameter_range[1] / 2.0 + ls.clearance
        if extent <= 2 * margin:
            raise PlacementError(
                f"extent {extent} m too small for {ls.count} landmarks with "
                f"clearance {ls.clearance} m"
            )
        for _ in range(ls.count):
            diam = rng.uniform(*ls.diameter_range)
            for _ in range(ls.max_tries):
                x = rng.uniform(margin, extent - margin)
                y = rng.uniform(margin, extent - margin)
                if not overlaps(x, y, diam + 2 * ls.clearance):
                    break
            else:
                raise PlacementError(
                    f"could not place landmark {next_id} after {ls.max_tries} tries"
                )
            craters.append(
                Crater(next_id, (x, y), diam, dp.depth_ratio * diam, is_landmark=True)
            )
            next_id += 1

    n_background = int(round((extent / dp.background_spacing) ** 2))
    for _ in range(n_background):
        diam = rng.uniform(*dp.background_diameter)
        x = rng.uniform(0, extent)
        y = rng.uniform(0, extent)
        if overlaps(x, y, diam):
            continue  # keep landmark bowls clean; background density is approximate
        craters.append(Crater(next_id, (x, y), diam, dp.depth_ratio * diam))
        next_id += 1

    # Rolling base surface plus crater bowls.
    n = int(round(extent / dp.resolution)) + 1
    xs = np.arange(n) * dp.resolution
    gx, gy = np.meshgrid(xs, xs)
    k = 2 * np.pi / dp.base_wavelength
    ph = rng.uniform(0, 2 * np.pi, size=4)
    z = dp.base_amplitude * (
        np.sin(k * gx + ph[0])
        + np.sin(k * gy + ph[1])
        + 0.5 * np.sin(2 * k * (gx + gy) / np.sqrt(2) + ph[2])
    )
    for c in craters:
        reach = c.radius * (1 + LIP_WIDTH_FRAC) + dp.resolution
        i0 = max(0, int((c.center[0] - reach) / dp.resolution))
        i1 = min(n, int((c.center[0] + reach) / dp.resolution) + 2)
        j0 = max(0, int((c.center[1] - reach) / dp.resolution))
        j1 = min(n, int((c.center[1] + reach) / dp.resolution) + 2)
        r = np.hypot(gx[j0:j1, i0:i1] - c.center[0], gy[j0:j1, i0:i1] - c.center[1])
        z[j0:j1, i0:i1] += crater_profile(r, c.diameter, c.depth)

    dem = DemRaster(dp.resolution, (0.0, 0.0), z)
    cmap = CraterMap(tuple(craters), rim_sample_spacing=dp.resolution)
    return cmap, dem


# ---------------------------------------------------------------------------
# Rim sampling and front-arc selection


def sample_rim(crater: Crater, spacing: float) -> RimArc:
    """Uniform arc-length samples of the full rim circle (closed loop order)."""
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    n = max(1, int(round(np.pi * crater.diameter / spacing)))
    ang = 2 * np.pi * np.arange(n) / n
    pts = np.stack(
        [
            crater.center[0] + crater.radius * np.cos(ang),
            crater.center[1] + crater.radius * np.sin(ang),
        ],
        axis=1,
    )
    return RimArc(crater.id, pts)


def _front_mask(points: np.ndarray, center: np.ndarray, view_dir: np.ndarray) -> np.ndarray:
    # Half-open rim split: the half facing the camera, with the two boundary
    # points assigned by the cross-product tie-break so that opposite headings
    # partition the rim exactly. Ties need a tolerance: exact right angles pick
    # up ~1e-16 dot products through cos/sin of the heading.
    outward = points - center
    dot = outward @ view_dir
    tie = np.abs(dot) <= 1e-9 * np.linalg.norm(outward, axis=1)
    cross = view_dir[0] * outward[:, 1] - view_dir[1] * outward[:, 0]
    return (~tie & (dot < 0)) | (tie & (cross > 0))


def front_arc(rim: RimArc, camera_pose: Pose, crater_center: np.ndarray | None = None) -> RimArc:
    """The half of the rim facing the camera, chosen from the heading alone."""
    if len(rim) == 0:
        raise ValueError("rim must be non-empty")
    if crater_center is None:
        crater_center = rim.points.mean(axis=0)
    mask = _front_mask(rim.points, np.asarray(crater_center, float), camera_pose.forward)
    return RimArc(rim.crater_id, rim.points[mask].copy())


def front_arc_points(cmap: CraterMap, camera_pose: Pose) -> np.ndarray:
    """All front-arc ground-truth points over the landmark craters, (M, 2)."""
    if not cmap.landmarks:
        raise ConfigError("crater map has no landmark craters")
    chunks = []
    for c in cmap.landmarks:
        rim = sample_rim(c, cmap.rim_sample_spacing)
        arc = front_arc(rim, camera_pose, crater_center=np.asarray(c.center))
        if len(arc):
            chunks.append(arc.points)
    if not chunks:
        return np.empty((0, 2))
    return np.concatenate(chunks, axis=0)


def nearest_rim_distance(cmap: CraterMap, p, camera_pose: Pose) -> float:
    """Distance from p to the closest front-arc point over all landmarks."""
    pts = front_arc_points(cmap, camera_pose)
    p = np.asarray(p, dtype=float)
    return float(np.min(np.hypot(pts[:, 0] - p[0], pts[:, 1] - p[1])))


# ---------------------------------------------------------------------------
# Serialization


def save_crater_map(cmap: CraterMap, path: str | Path) -> None:
    doc = {
        "resolution_m": cmap.rim_sample_spacing,
        "craters": [
            {
                "id": c.id,
                "x_m": c.center[0],
                "y_m": c.center[1],
                "diameter_m": c.diameter,
                "depth_m": c.depth,
                "landmark": c.is_landmark,
            }
            for c in cmap.craters
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_crater_map(path: str | Path) -> CraterMap:
    doc = json.loads(Path(path).read_text())
    craters = tuple(
        Crater(
            int(c["id"]),
            (float(c["x_m"]), float(c["y_m"])),
            float(c["diameter_m"]),
            float(c["depth_m"]),
            bool(c["landmark"]),
        )
        for c in doc["craters"]
    )
    return CraterMap(craters, rim_sample_spacing=float(doc["resolution_m"]))


def save_dem(dem: DemRaster, path: str | Path) -> None:
    """ESRI ASCII grid; first data row is the northernmost."""
    lines = [
        f"ncols {dem.width}",
        f"nrows {dem.height}",
        f"xllcorner {dem.origin[0]:.6f}",
        f"yllcorner {dem.origin[1]:.6f}",
        f"cellsize {dem.resolution:.6f}",
    ]
    for row in dem.cells[::-1]:
        lines.append(" ".join(f"{v:.6f}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_dem(path: str | Path) -> DemRaster:
    with open(path) as fh:
        header = {}
        for _ in range(5):
            key, val = fh.readline().split()
            header[key.lower()] = float(val)
        cells = np.loadtxt(fh)
    if cells.ndim == 1:
        cells = cells[None, :]
    return DemRaster(
        header["cellsize"],
        (header["xllcorner"], header["yllcorner"]),
        np.ascontiguousarray(cells[::-1]),
    )
