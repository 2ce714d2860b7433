"""Synthetic onboard sensor suite: RGB-D camera, IMU, ultrasonic altimeter.

All sensors are pure functions of (state, model, rng): identical inputs give
identical outputs. The depth camera marches rays through the voxelized truth
grid; the RGB camera raycasts the analytic scene boxes so decal colors are
exact. The accelerometer measures specific force, so a level hover reads
+9.81 m/s^2 along body z.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import Pose
from .world import GroundTruthGrid, GroundTruthScene, face_color, _FACE_AXES

NO_RETURN = np.inf
GRAVITY = 9.81  # m/s^2

_FACE_BY_AXIS_DIR = {
    (0, +1): "-x", (0, -1): "+x",
    (1, +1): "-y", (1, -1): "+y",
    (2, +1): "-z", (2, -1): "+z",
}


@dataclass(frozen=True)
class CameraModel:
    hfov_deg: float = 57.0
    vfov_deg: float = 43.0
    width: int = 160
    height: int = 120
    max_range: float = 6.0
    rate: float = 30.0

    def __post_init__(self):
        if not (0.0 < self.hfov_deg < 180.0 and 0.0 < self.vfov_deg < 180.0):
            raise ValueError("fov must lie in (0, 180) degrees")
        if self.width < 8 or self.height < 8:
            raise ValueError("image dimensions must be >= 8")
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")

    def ray_directions(self) -> np.ndarray:
        """Unit ray directions in camera frame (right, down, forward), (H, W, 3)."""
        fx = (self.width / 2.0) / np.tan(np.radians(self.hfov_deg) / 2.0)
        fy = (self.height / 2.0) / np.tan(np.radians(self.vfov_deg) / 2.0)
        cols = (np.arange(self.width) + 0.5 - self.width / 2.0) / fx
        rows = (np.arange(self.height) + 0.5 - self.height / 2.0) / fy
        xx, yy = np.meshgrid(cols, rows)
        dirs = np.stack([xx, yy, np.ones_like(xx)], axis=-1)
        return dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)

    def scaled(self, stride: int) -> "CameraModel":
        """Reduced-resolution camera with the same field of view."""
        return CameraModel(self.hfov_deg, self.vfov_deg,
                           max(8, self.width // stride),
                           max(8, self.height // stride),
                           self.max_range, self.rate)


@dataclass(frozen=True)
class DepthImage:
    ranges: np.ndarray  # (H, W) meters; NO_RETURN (inf) where nothing was hit
    timestamp: float
    max_range: float

    @property
    def finite_fraction(self) -> float:
        return float(np.isfinite(self.ranges).mean())


@dataclass(frozen=True)
class RgbImage:
    pixels: np.ndarray  # (H, W, 3) uint8
    timestamp: float


@dataclass(frozen=True)
class ImuModel:
    gyro_noise_std: float = 2e-4        # rad/s/sqrt(Hz)
    gyro_bias: tuple = (0.0, 0.0, 1e-4)  # rad/s, constant per run
    accel_noise_std: float = 1e-2       # m/s^2/sqrt(Hz)
    accel_bias: tuple = (0.0, 0.0, 0.01)  # m/s^2, constant per run
    rate: float = 100.0

    def __post_init__(self):
        if self.gyro_noise_std < 0 or self.accel_noise_std < 0:
            raise ValueError("noise stds must be >= 0")
        if self.rate < 50.0:
            raise ValueError("IMU rate must be at least the 50 Hz fusion rate")


@dataclass(frozen=True)
class ImuSample:
    angular_velocity: np.ndarray  # rad/s, body frame
    specific_force: np.ndarray    # m/s^2, body frame
    timestamp: float


@dataclass(frozen=True)
class AltimeterSample:
    range_to_ground: float
    noise_std: float
    timestamp: float


@dataclass(frozen=True)
class MotionState:
    """Kinematic truth the inertial sensors observe.

    The reduced vehicle flies level, so orientation is yaw only and the
    angular rate is (0, 0, yaw_rate).
    """

    yaw: float
    yaw_rate: float
    accel_world: np.ndarray
    height: float
    timestamp: float

    def __post_init__(self):
        object.__setattr__(self, "accel_world",
                           np.asarray(self.accel_world, dtype=float))


def render_depth(pose: Pose, world: GroundTruthGrid, cam: CameraModel,
                 timestamp: float = 0.0) -> DepthImage:
    """Per-pixel range to the first occupied voxel along each ray.

    Rays march at sub-voxel spacing and the boundary crossing is refined by
    bisection; voxels clipped by a chord shorter than the march spacing can
    be skipped.
    """
    dirs = (pose.camera_rotation() @ cam.ray_directions().reshape(-1, 3).T).T
    origin = pose.position
    n = dirs.shape[0]
    step = world.voxel_size / 3.0

    dense = world.dense
    dims = np.array(dense.shape)
    inv_vs = 1.0 / world.voxel_size

    def occupied_at(points: np.ndarray) -> np.ndarray:
        idx = np.floor((points - world.origin) * inv_vs).astype(np.int64)
        ok = np.all((idx >= 0) & (idx < dims), axis=-1)
        out = np.zeros(len(points), dtype=bool)
        if np.any(ok):
            ii = idx[ok]
            out[ok] = dense[ii[:, 0], ii[:, 1], ii[:, 2]]
        return out

    t_lo = np.zeros(n)
    t_hi = np.full(n, np.nan)
    active = np.ones(n, dtype=bool)
    t = step
    while t <= cam.max_range + 0.5 * step and np.any(active):
        pts = origin[None, :] + t * dirs[active]
        hit = occupied_at(pts)
        if np.any(hit):
            sel = np.flatnonzero(active)[hit]
            t_hi[sel] = t
            t_lo[sel] = t - step
            active[sel] = False
        t += step

    hit_mask = np.isfinite(t_hi)
    if np.any(hit_mask):
        lo = t_lo[hit_mask].copy()
        hi = t_hi[hit_mask].copy()
        hdirs = dirs[hit_mask]
        for _ in range(12):
            mid = 0.5 * (lo + hi)
            inside = occupied_at(origin[None, :] + mid[:, None] * hdirs)
            hi = np.where(inside, mid, hi)
            lo = np.where(inside, lo, mid)
    ranges = np.full(n, NO_RETURN)
    if np.any(hit_mask):
        ranges[hit_mask] = np.minimum(hi, cam.max_range)
    ranges = np.where(ranges > cam.max_range, NO_RETURN, ranges)
    return DepthImage(ranges.reshape(cam.height, cam.width), timestamp,
                      cam.max_range)


def render_rgb(pose: Pose, scene: GroundTruthScene, cam: CameraModel,
               timestamp: float = 0.0, background: int = 150):
    """Render the analytic scene; returns (RgbImage, crack_pixel_mask).

    The mask marks pixels whose surface point carries crack truth. It is
    test metadata and must never reach a classifier.
    """
    dirs = (pose.camera_rotation() @ cam.ray_directions().reshape(-1, 3).T).T
    origin = pose.position
    n = dirs.shape[0]

    best_t = np.full(n, np.inf)
    best_box = np.full(n, -1, dtype=np.int64)
    best_axis = np.zeros(n, dtype=np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        for bi, box in enumerate(scene.boxes):
            t1 = (box.lo[None, :] - origin[None, :]) * inv
            t2 = (box.hi[None, :] - origin[None, :]) * inv
            t_enter_axis = np.minimum(t1, t2)
            t_exit_axis = np.maximum(t1, t2)
            t_near = np.nanmax(t_enter_axis, axis=1)
            t_far = np.nanmin(t_exit_axis, axis=1)
            hit = (t_near <= t_far) & (t_near > 1e-9) & (t_near < best_t)
            if np.any(hit):
                best_t[hit] = t_near[hit]
                best_box[hit] = bi
                best_axis[hit] = np.argmax(t_enter_axis[hit], axis=1)

    beyond = best_t > cam.max_range
    best_box[beyond] = -1

    img = np.full((n, 3), background, dtype=np.uint8)
    mask = np.zeros(n, dtype=bool)
    for bi in np.unique(best_box):
        if bi < 0:
            continue
        sel = best_box == bi
        box = scene.boxes[bi]
        pts = origin[None, :] + best_t[sel, None] * dirs[sel]
        axes = best_axis[sel]
        rows_all = np.flatnonzero(sel)
        dir_sign = np.where(dirs[rows_all, axes] > 0, 1, -1)
        for axis in np.unique(axes):
            for sgn in (-1, 1):
                sub = (axes == axis) & (dir_sign == sgn)
                if not np.any(sub):
                    continue
                rows = rows_all[sub]
                face = _FACE_BY_AXIS_DIR[(int(axis), int(sgn))]
                _, _, ua, va = _FACE_AXES[face]
                u = pts[sub, ua] - box.center[ua]
                v = pts[sub, va] - box.center[va]
                rgb, crack = face_color(scene, int(bi), face, u, v)
                img[rows] = rgb
                mask[rows] = crack
    return (RgbImage(img.reshape(cam.height, cam.width, 3), timestamp),
            mask.reshape(cam.height, cam.width))


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_imu(state: MotionState, model: ImuModel, rng,
               gravity: float = GRAVITY) -> ImuSample:
    """Specific force and angular rate in the body frame, with bias + noise."""
    rng = _as_rng(rng)
    c, s = np.cos(state.yaw), np.sin(state.yaw)
    # R_world_body^T for a level body (yaw-only rotation)
    rwt = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
    g_world = np.array([0.0, 0.0, -gravity])
    f_body = rwt @ (state.accel_world - g_world)
    w_body = np.array([0.0, 0.0, state.yaw_rate])

    gyro_std = model.gyro_noise_std * np.sqrt(model.rate)
    accel_std = model.accel_noise_std * np.sqrt(model.rate)
    w = w_body + np.asarray(model.gyro_bias) + rng.normal(0.0, gyro_std, 3)
    f = f_body + np.asarray(model.accel_bias) + rng.normal(0.0, accel_std, 3)
    return ImuSample(angular_velocity=w, specific_force=f,
                     timestamp=state.timestamp)


def sample_altimeter(state: MotionState, noise_std: float, rng) -> AltimeterSample:
    """Ultrasonic range to the floor plane (z = 0)."""
    rng = _as_rng(rng)
    r = state.height + (rng.normal(0.0, noise_std) if noise_std > 0 else 0.0)
    return AltimeterSample(range_to_ground=max(0.0, float(r)),
                           noise_std=noise_std, timestamp=state.timestamp)


def save_rgb_png(image: RgbImage, path) -> None:
    Image.fromarray(image.pixels, mode="RGB").save(Path(path), format="PNG")


def load_rgb_png(path) -> np.ndarray:
    return np.asarray(Image.open(Path(path)).convert("RGB"))


def save_depth_png(depth: DepthImage, path) -> None:
    """16-bit millimeter PNG; no-return pixels are stored as 0."""
    mm = np.where(np.isfinite(depth.ranges), depth.ranges * 1000.0, 0.0)
    mm = np.clip(np.round(mm), 0, 65535).astype(np.uint16)
    Image.fromarray(mm).save(Path(path), format="PNG")


def load_depth_png(path, timestamp: float = 0.0,
                   max_range: float = 6.0) -> DepthImage:
    mm = np.asarray(Image.open(Path(path)), dtype=np.float64)
    ranges = np.where(mm > 0, mm / 1000.0, NO_RETURN)
    return DepthImage(ranges, timestamp, max_range)


def frame_filename(frame_id: int, kind: str) -> str:
    """Canonical on-disk name, e.g. frame_000012_rgb.png."""
    if kind not in ("rgb", "depth"):
        raise ValueError("kind must be 'rgb' or 'depth'")
    return f"frame_{frame_id:06d}_{kind}.png"
