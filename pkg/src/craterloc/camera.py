"""Pinhole range camera over the DEM.

Renders synthetic range images as the illuminated-stereo stack would produce
them (limited lit range, range noise, holes) and applies the far-range
row-mean refinement pass. Range, not disparity, is the stored channel;
disparity is derived as focal * baseline / range where needed.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numba
import numpy as np

from craterloc.geometry import Pose
from craterloc.mapgen import DemRaster


class OutOfBoundsError(ValueError):
    """Camera pose outside the DEM extent."""


@dataclass(frozen=True)
class CameraModel:
    focal_length: float  # pixels
    image_width: int = 1280
    image_height: int = 960
    height_above_ground: float = 2.5
    pitch: float = np.deg2rad(15.0)  # downward positive
    stereo_baseline: float = 0.26

    def __post_init__(self):
        if self.focal_length <= 0 or self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("focal length and image dims must be positive")
        if not 1.5 <= self.height_above_ground <= 3.0:
            warnings.warn(
                f"camera height {self.height_above_ground} m outside the expected "
                "1.5-3.0 m operating band",
                stacklevel=2,
            )

    @property
    def horizontal_fov(self) -> float:
        return 2.0 * np.arctan(self.image_width / (2.0 * self.focal_length))

    @property
    def cx(self) -> float:
        return (self.image_width - 1) / 2.0

    @property
    def cy(self) -> float:
        return (self.image_height - 1) / 2.0

    @classmethod
    def from_hfov(cls, hfov: float, **kwargs) -> "CameraModel":
        width = kwargs.get("image_width", 1280)
        focal = (width / 2.0) / np.tan(hfov / 2.0)
        return cls(focal_length=focal, **kwargs)


def default_camera(**overrides) -> CameraModel:
    """Field-rig defaults: 2.5 m mast, 0.26 m baseline, 60 deg HFOV."""
    kwargs = dict(image_width=1280, image_height=960)
    kwargs.update(overrides)
    return CameraModel.from_hfov(np.deg2rad(60.0), **kwargs)


@dataclass(frozen=True)
class SensingNoiseModel:
    """Range-dependent noise and hole statistics of the lit stereo stack.

    Range noise is a spatially smooth Gaussian field scaled by sigma(range):
    stereo matching errors are low-frequency, not per-pixel white noise.
    correlation_px sets the smoothing scale; 0 gives white noise.
    """

    range_sigma_coeffs: tuple[float, float, float] = (0.0, 0.0, 0.0035)
    hole_base_prob: float = 0.03
    hole_range_growth: float = 0.05  # per meter beyond hole_growth_start
    hole_growth_start: float = 18.0
    max_lit_range: float = 40.0
    correlation_px: float = 8.0

    def __post_init__(self):
        if not 0.0 <= self.hole_base_prob <= 1.0:
            raise ValueError("hole_base_prob must be a probability")
        if self.max_lit_range <= 0:
            raise ValueError("max_lit_range must be positive")

    def sigma(self, r):
        c0, c1, c2 = self.range_sigma_coeffs
        return c0 + c1 * r + c2 * r * r

    def hole_prob(self, r):
        p = self.hole_base_prob + self.hole_range_growth * np.maximum(
            0.0, r - self.hole_growth_start
        )
        return np.clip(p, 0.0, 1.0)


NOISELESS = SensingNoiseModel(
    range_sigma_coeffs=(0.0, 0.0, 0.0), hole_base_prob=0.0, hole_range_growth=0.0
)


@dataclass(frozen=True)
class RangeImage:
    ranges: np.ndarray  # (H, W) float32, NaN = hole
    pose: Pose
    camera: CameraModel

    def __post_init__(self):
        finite = self.ranges[np.isfinite(self.ranges)]
        if finite.size and not np.all(finite > 0):
            raise ValueError("non-hole ranges must be positive")
        self.ranges.setflags(write=False)

    @property
    def width(self) -> int:
        return self.ranges.shape[1]

    @property
    def height(self) -> int:
        return self.ranges.shape[0]

    def disparity(self) -> np.ndarray:
        return self.camera.focal_length * self.camera.stereo_baseline / self.ranges


# ---------------------------------------------------------------------------
# Projection


def _cam_axes_in_rover(pitch: float) -> np.ndarray:
    """Rows are camera x (image right), y (image down), z (optical) in rover frame."""
    c, s = np.cos(pitch), np.sin(pitch)
    return np.array(
        [
            [0.0, -1.0, 0.0],  # image right -> rover -y (y is left)
            [-s, 0.0, -c],  # image down
            [c, 0.0, -s],  # optical axis, pitched below horizontal
        ]
    )


def pixel_rays_rover(cam: CameraModel) -> np.ndarray:
    """Unit ray directions in the rover frame for every pixel, (H, W, 3)."""
    u = np.arange(cam.image_width) - cam.cx
    v = np.arange(cam.image_height) - cam.cy
    uu, vv = np.meshgrid(u, v)
    d = np.stack([uu / cam.focal_length, vv / cam.focal_length, np.ones_like(uu, float)], axis=-1)
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    return d @ _cam_axes_in_rover(cam.pitch)


def pixel_to_rover_frame(px, range_m: float, cam: CameraModel) -> np.ndarray:
    """Inverse pinhole projection: pixel + ray range -> 3D rover-frame point."""
    if not np.isfinite(range_m) or range_m <= 0:
        raise ValueError(f"range must be finite and positive, got {range_m}")
    u, v = px
    d = np.array([(u - cam.cx) / cam.focal_length, (v - cam.cy) / cam.focal_length, 1.0])
    d /= np.linalg.norm(d)
    d_rover = d @ _cam_axes_in_rover(cam.pitch)
    return np.array([0.0, 0.0, cam.height_above_ground]) + range_m * d_rover


def rover_point_to_pixel(point: np.ndarray, cam: CameraModel) -> tuple[float, float]:
    """Forward projection, the inverse of :func:`pixel_to_rover_frame`."""
    rel = np.asarray(point, float) - np.array([0.0, 0.0, cam.height_above_ground])
    axes = _cam_axes_in_rover(cam.pitch)
    pc = axes @ rel  # camera-frame coordinates
    if pc[2] <= 0:
        raise ValueError("point behind the camera")
    return (
        cam.focal_length * pc[0] / pc[2] + cam.cx,
        cam.focal_length * pc[1] / pc[2] + cam.cy,
    )


# ---------------------------------------------------------------------------
# Rendering


@numba.njit(cache=True, parallel=True)
def _march_kernel(cells, res, ox, oy, cam_pos, dirs, t0, step, t_max):  # pragma: no cover
    h, w = dirs.shape[0], dirs.shape[1]
    ny, nx = cells.shape
    out = np.full((h, w), np.nan, dtype=np.float32)
    for i in numba.prange(h):
        for j in range(w):
            dx, dy, dz = dirs[i, j, 0], dirs[i, j, 1], dirs[i, j, 2]
            t = t0
            prev_t = t0
            prev_dh = 1.0
            first = True
            while t <= t_max:
                px = cam_pos[0] + t * dx
                py = cam_pos[1] + t * dy
                pz = cam_pos[2] + t * dz
                fx = (px - ox) / res
                fy = (py - oy) / res
                if fx < 0 or fy < 0 or fx >= nx - 1 or fy >= ny - 1:
                    break
                ix = int(fx)
                iy = int(fy)
                tx = fx - ix
                ty = fy - iy
                zt = (
                    cells[iy, ix] * (1 - tx) * (1 - ty)
                    + cells[iy, ix + 1] * tx * (1 - ty)
                    + cells[iy + 1, ix] * (1 - tx) * ty
                    + cells[iy + 1, ix + 1] * tx * ty
                )
                dh = pz - zt
                if dh < 0.0 and not first:
                    # bisect the crossing between prev_t and t
                    lo = prev_t
                    hi = t
                    for _ in range(12):
                        mid = 0.5 * (lo + hi)
                        px = cam_pos[0] + mid * dx
                        py = cam_pos[1] + mid * dy
                        pz = cam_pos[2] + mid * dz
                        fx = (px - ox) / res
                        fy = (py - oy) / res
                        ix = int(fx)
                        iy = int(fy)
                        tx = fx - ix
                        ty = fy - iy
                        zt = (
                            cells[iy, ix] * (1 - tx) * (1 - ty)
                            + cells[iy, ix + 1] * tx * (1 - ty)
                            + cells[iy + 1, ix] * (1 - tx) * ty
                            + cells[iy + 1, ix + 1] * tx * ty
                        )
                        if pz - zt < 0.0:
                            hi = mid
                        else:
                            lo = mid
                    out[i, j] = 0.5 * (lo + hi)
                    break
                prev_t = t
                prev_dh = dh
                first = False
                t += step
    return out


def render_range_image(
    dem: DemRaster,
    pose: Pose,
    cam: CameraModel,
    noise: SensingNoiseModel = NOISELESS,
    seed: int = 0,
) -> RangeImage:
    """Ray-march every pixel against the bilinear DEM surface.

    First-hit ranges beyond max_lit_range become holes (illumination falloff),
    Gaussian noise with sigma(range) is added, and random holes injected.
    Deterministic for a fixed seed.
    """
    if not dem.contains(pose.x, pose.y):
        raise OutOfBoundsError(f"pose ({pose.x}, {pose.y}) outside DEM extent {dem.extent}")

    dirs_rover = pixel_rays_rover(cam)
    c, s = np.cos(pose.heading), np.sin(pose.heading)
    dirs_world = np.empty_like(dirs_rover)
    dirs_world[..., 0] = c * dirs_rover[..., 0] - s * dirs_rover[..., 1]
    dirs_world[..., 1] = s * dirs_rover[..., 0] + c * dirs_rover[..., 1]
    dirs_world[..., 2] = dirs_rover[..., 2]

    ground_z = float(dem.sample(pose.x, pose.y))
    cam_pos = np.array([pose.x, pose.y, ground_z + cam.height_above_ground])
    step = dem.resolution / 2.0
    ranges = _march_kernel(
        dem.cells,
        dem.resolution,
        dem.origin[0],
        dem.origin[1],
        cam_pos,
        np.ascontiguousarray(dirs_world),
        0.25,
        step,
        noise.max_lit_range,
    )

    ranges = np.where(ranges > noise.max_lit_range, np.nan, ranges)
    hit = np.isfinite(ranges)
    if np.any(hit):
        rng = np.random.default_rng(seed)
        field = rng.standard_normal(ranges.shape)
        if noise.correlation_px > 0:
            from scipy import ndimage

            field = ndimage.gaussian_filter(field, noise.correlation_px)
            std = field.std()
            if std > 0:
                field /= std
        r = ranges[hit].astype(float)
        noisy = r + field[hit] * noise.sigma(r)
        holes = rng.random(r.shape) < noise.hole_prob(r)
        noisy[holes] = np.nan
        noisy[(noisy <= 0) | (noisy > noise.max_lit_range)] = np.nan
        ranges = ranges.copy()
        ranges[hit] = noisy.astype(np.float32)
    return RangeImage(ranges, pose, cam)


# ---------------------------------------------------------------------------
# Far-range refinement


def refine_stereo(img: RangeImage, start_range: float = 20.0, consecutive_rows: int = 5) -> RangeImage:
    """Drop noisy far-range rows past the row-mean peak.

    Row means are scanned from the image bottom upward starting at the first
    row whose mean exceeds start_range; once the mean decreases for
    consecutive_rows rows in a row, the peak row and everything above it
    become holes.
    """
    if start_range <= 0 or consecutive_rows < 1:
        raise ValueError("start_range must be positive and consecutive_rows >= 1")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        row_means = np.nanmean(img.ranges, axis=1)

    rows = [i for i in range(img.height - 1, -1, -1) if np.isfinite(row_means[i])]
    started = False
    peak_idx = None
    peak_mean = -np.inf
    prev_mean = None
    falls = 0
    cut_at = None
    for i in rows:
        m = row_means[i]
        if not started:
            if m > start_range:
                started = True
                peak_idx, peak_mean = i, m
                prev_mean = m
            continue
        if m > peak_mean:
            peak_idx, peak_mean = i, m
        falls = falls + 1 if m < prev_mean else 0
        prev_mean = m
        if falls >= consecutive_rows:
            cut_at = peak_idx
            break
    if cut_at is None:
        return img
    ranges = img.ranges.copy()
    ranges[: cut_at + 1, :] = np.nan
    return replace(img, ranges=ranges)


# ---------------------------------------------------------------------------
# File format: "RNGI" binary + JSON sidecar


def save_range_image(img: RangeImage, path: str | Path) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(b"RNGI")
        fh.write(struct.pack("<II", img.width, img.height))
        fh.write(img.ranges.astype("<f4").tobytes())
    sidecar = {
        "pose": {"x": img.pose.x, "y": img.pose.y, "heading": img.pose.heading},
        "camera": {
            "focal_length": img.camera.focal_length,
            "image_width": img.camera.image_width,
            "image_height": img.camera.image_height,
            "height_above_ground": img.camera.height_above_ground,
            "pitch": img.camera.pitch,
            "stereo_baseline": img.camera.stereo_baseline,
        },
    }
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n"
    )


def load_range_image(path: str | Path) -> RangeImage:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != b"RNGI":
        raise ValueError(f"{path}: not a range-image file")
    w, h = struct.unpack("<II", raw[4:12])
    ranges = np.frombuffer(raw[12:], dtype="<f4").reshape(h, w).copy()
    sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    pose = Pose(**sidecar["pose"])
    cam = CameraModel(**sidecar["camera"])
    return RangeImage(ranges, pose, cam)
