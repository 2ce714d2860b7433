"""Occupancy voxel mapping from posed depth scans.

Log-odds Bayesian updates over a sparse voxel dictionary. Each scan
insertion carves free space along every ray and reinforces the endpoint
voxel; within one scan each voxel is updated at most once and a hit wins
over a miss. Rays are traversed by dense sub-voxel sampling, so voxels a
ray merely clips at a corner may be skipped.

Unknown voxels are not occupied but are reported by their own query and
are treated as obstacles by the planner (conservative: plans stay in
sensed space).

Map file format (little-endian, documented byte-exactly in the README):
magic "OGRD1", voxel_size f64, origin 3 x f64, count u64, then count
records of (ix i32, iy i32, iz i32, log_odds f32), sorted by index.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import Aabb
from .sensors import CameraModel, DepthImage
from .world import GroundTruthGrid

_MAGIC = b"OGRD1"
_LIN_SHIFT = 1 << 20  # linearization offset; voxel indices must stay below this
_LIN_BASE = 1 << 21


class MapFormatError(ValueError):
    """Raised when a map file does not parse."""


@dataclass
class OccupancyGrid:
    voxel_size: float = 0.1
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    l_hit: float = 0.85
    l_miss: float = -0.4
    l_min: float = -3.5
    l_max: float = 3.5
    occupancy_threshold: float = 0.5
    log_odds: dict = field(default_factory=dict)

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        if self.voxel_size <= 0:
            raise ValueError("voxel_size must be positive")
        if not self.l_hit > 0 > self.l_miss:
            raise ValueError("need l_hit > 0 > l_miss")

    def voxel_index(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return np.floor((p - self.origin) / self.voxel_size).astype(np.int64)

    def voxel_center(self, index) -> np.ndarray:
        return self.origin + (np.asarray(index, dtype=float) + 0.5) * self.voxel_size

    def probability(self, key) -> float:
        lo = self.log_odds.get(tuple(key))
        if lo is None:
            return 0.5
        return 1.0 / (1.0 + np.exp(-lo))

    def occupied_voxels(self) -> set:
        thr = self.occupancy_threshold
        return {k for k, lo in self.log_odds.items()
                if 1.0 / (1.0 + np.exp(-lo)) > thr}

    def touched_voxels(self) -> set:
        return set(self.log_odds.keys())


def occupied(grid: OccupancyGrid, point_or_voxel) -> bool:
    """True iff the stored probability exceeds the threshold.

    Untouched voxels are not occupied; use `unknown` to distinguish them
    from voxels observed free.
    """
    key = _as_key(grid, point_or_voxel)
    return grid.probability(key) > grid.occupancy_threshold


def unknown(grid: OccupancyGrid, point_or_voxel) -> bool:
    """True iff no ray has ever touched the voxel."""
    return _as_key(grid, point_or_voxel) not in grid.log_odds


def _as_key(grid: OccupancyGrid, point_or_voxel):
    arr = np.asarray(point_or_voxel)
    if arr.dtype.kind in "iu":
        return tuple(int(v) for v in arr)
    return tuple(grid.voxel_index(arr).tolist())


def _linearize(idx: np.ndarray) -> np.ndarray:
    shifted = idx + _LIN_SHIFT
    return (shifted[:, 0] * _LIN_BASE + shifted[:, 1]) * _LIN_BASE + shifted[:, 2]


def _delinearize(lin: np.ndarray) -> np.ndarray:
    iz = lin % _LIN_BASE
    rest = lin // _LIN_BASE
    iy = rest % _LIN_BASE
    ix = rest // _LIN_BASE
    return np.stack([ix, iy, iz], axis=1) - _LIN_SHIFT


def insert_rays(grid: OccupancyGrid, origin, dirs: np.ndarray,
                ranges: np.ndarray, max_range: float, *,
                endpoint_nudge: float = 0.6,
                carve_margin: float = 0.5) -> dict:
    """Integrate a batch of rays sharing one origin; mutates grid.

    Finite-range rays carve free voxels up to one carve_margin short of the
    surface and reinforce the endpoint voxel, sampled endpoint_nudge voxels
    past the boundary crossing so small pose errors keep landing inside the
    surface rather than just in front of it. Non-finite ranges carve free
    space out to max_range only. Voxels are deduplicated across the batch
    and a hit wins over a miss. Both tuning knobs are in voxel units.
    """
    origin = np.asarray(origin, dtype=float)
    dirs = np.asarray(dirs, dtype=float).reshape(-1, 3)
    ranges = np.asarray(ranges, dtype=float).reshape(-1)

    finite = np.isfinite(ranges)
    carve_range = np.where(finite, ranges - carve_margin * grid.voxel_size,
                           max_range)
    spacing = grid.voxel_size / 3.0

    if np.any(finite):
        p_end = origin[None, :] + \
            (ranges[finite, None] + endpoint_nudge * grid.voxel_size) * dirs[finite]
        hit_lin = np.unique(_linearize(grid.voxel_index(p_end)))
    else:
        hit_lin = np.empty(0, dtype=np.int64)

    # free-space samples strictly before each endpoint standoff
    n_steps = max(1, int(np.ceil(max(carve_range.max(), 0.0) / spacing)) + 1)
    ts = (np.arange(n_steps) + 0.5) * spacing
    miss_lin = []
    chunk = 4096
    for lo_i in range(0, len(ranges), chunk):
        hi_i = min(lo_i + chunk, len(ranges))
        r = carve_range[lo_i:hi_i]
        d = dirs[lo_i:hi_i]
        tgrid = ts[None, :]
        valid = tgrid < r[:, None]
        if not np.any(valid):
            continue
        pts = origin[None, None, :] + tgrid[:, :, None] * d[:, None, :]
        idx = np.floor((pts[valid] - grid.origin) / grid.voxel_size).astype(np.int64)
        miss_lin.append(_linearize(idx))
    if miss_lin:
        miss_lin = np.unique(np.concatenate(miss_lin))
        miss_lin = np.setdiff1d(miss_lin, hit_lin, assume_unique=True)
    else:
        miss_lin = np.empty(0, dtype=np.int64)

    store = grid.log_odds
    for key_arr, inc in ((_delinearize(hit_lin), grid.l_hit),
                         (_delinearize(miss_lin), grid.l_miss)):
        for row in key_arr:
            k = (int(row[0]), int(row[1]), int(row[2]))
            store[k] = float(np.clip(store.get(k, 0.0) + inc, grid.l_min, grid.l_max))

    return {"rays": int(len(ranges)), "endpoints": int(finite.sum())}


def insert_scan(grid: OccupancyGrid, camera_pose, depth: DepthImage,
                cam: CameraModel, **ray_params) -> dict:
    """Integrate one posed depth image; mutates grid, returns stats.

    camera_pose is a Pose (position + yaw, level body).
    """
    ranges = depth.ranges.reshape(-1)
    if ranges.shape[0] != cam.height * cam.width:
        raise ValueError("depth image does not match camera model")
    dirs = (camera_pose.camera_rotation() @ cam.ray_directions().reshape(-1, 3).T).T
    return insert_rays(grid, camera_pose.position, dirs, ranges, cam.max_range,
                       **ray_params)


def mark_free_box(grid: OccupancyGrid, lo, hi, strength: float = 2.0) -> int:
    """Apply freeness evidence to every voxel inside an AABB.

    Used for the volume the vehicle itself has flown through - physical
    presence is direct evidence the space is free. strength scales l_miss.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    i_lo = grid.voxel_index(lo)
    i_hi = grid.voxel_index(hi)
    inc = strength * grid.l_miss
    store = grid.log_odds
    count = 0
    for ix in range(i_lo[0], i_hi[0] + 1):
        for iy in range(i_lo[1], i_hi[1] + 1):
            for iz in range(i_lo[2], i_hi[2] + 1):
                k = (ix, iy, iz)
                store[k] = float(np.clip(store.get(k, 0.0) + inc,
                                         grid.l_min, grid.l_max))
                count += 1
    return count


def compare(grid: OccupancyGrid, truth: GroundTruthGrid,
            sensed_region=None) -> float:
    """IoU of occupied voxel sets, restricted to the sensed region."""
    if abs(grid.voxel_size - truth.voxel_size) > 1e-12 or \
            np.any(np.abs(grid.origin - truth.origin) > 1e-12):
        raise ValueError("grids must share voxel_size and origin")
    region = set(sensed_region) if sensed_region is not None else grid.touched_voxels()
    ours = grid.occupied_voxels() & region
    theirs = set(truth.occupied) & region
    union = ours | theirs
    if not union:
        return 0.0
    return len(ours & theirs) / len(union)


def export_map(grid: OccupancyGrid, path) -> None:
    keys = sorted(grid.log_odds.keys())
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<d", grid.voxel_size))
        fh.write(struct.pack("<3d", *grid.origin))
        fh.write(struct.pack("<Q", len(keys)))
        for k in keys:
            fh.write(struct.pack("<3if", k[0], k[1], k[2], grid.log_odds[k]))


def import_map(path, **params) -> OccupancyGrid:
    data = Path(path).read_bytes()
    if data[:5] != _MAGIC:
        raise MapFormatError("bad magic; not an OGRD1 map file")
    off = 5
    voxel_size, = struct.unpack_from("<d", data, off); off += 8
    origin = struct.unpack_from("<3d", data, off); off += 24
    count, = struct.unpack_from("<Q", data, off); off += 8
    expected = off + count * 16
    if len(data) < expected:
        raise MapFormatError("truncated map file")
    grid = OccupancyGrid(voxel_size=voxel_size, origin=np.array(origin), **params)
    for _ in range(count):
        ix, iy, iz, lo = struct.unpack_from("<3if", data, off); off += 16
        grid.log_odds[(ix, iy, iz)] = float(lo)
    return grid


@dataclass(frozen=True)
class MapSnapshot:
    """Immutable dense view for planners: blocked = occupied or unknown."""

    voxel_size: float
    origin: np.ndarray
    blocked: np.ndarray   # dense bool volume over bounds
    bounds: Aabb
    _sat: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        # summed-area table: box occupancy counts in O(1) per query
        padded = np.zeros(tuple(s + 1 for s in self.blocked.shape), dtype=np.int64)
        padded[1:, 1:, 1:] = self.blocked.astype(np.int64)
        np.cumsum(padded, axis=0, out=padded)
        np.cumsum(padded, axis=1, out=padded)
        np.cumsum(padded, axis=2, out=padded)
        object.__setattr__(self, "_sat", padded)

    def voxel_index(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return np.floor((p - self.origin) / self.voxel_size).astype(np.int64)

    def box_blocked(self, lo: np.ndarray, hi: np.ndarray) -> bool:
        """Any blocked voxel overlapping the AABB? Outside bounds counts."""
        return bool(self.box_blocked_many(lo[None, :], hi[None, :])[0])

    def box_blocked_many(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Vectorized box_blocked for (N, 3) corner arrays."""
        dims = np.array(self.blocked.shape)
        i_lo = np.floor((lo - self.origin) / self.voxel_size).astype(np.int64)
        i_hi = np.floor((hi - self.origin) / self.voxel_size).astype(np.int64)
        outside = np.any(i_lo < 0, axis=1) | np.any(i_hi >= dims, axis=1)
        i_lo = np.clip(i_lo, 0, dims - 1)
        i_hi = np.clip(i_hi, 0, dims - 1)
        a, b, c = i_lo[:, 0], i_lo[:, 1], i_lo[:, 2]
        d, e, f = i_hi[:, 0] + 1, i_hi[:, 1] + 1, i_hi[:, 2] + 1
        s = self._sat
        count = (s[d, e, f] - s[a, e, f] - s[d, b, f] - s[d, e, c]
                 + s[a, b, f] + s[a, e, c] + s[d, b, c] - s[a, b, c])
        return outside | (count > 0)


def snapshot(grid: OccupancyGrid, bounds: Aabb) -> MapSnapshot:
    """Dense planning view of the grid over the given bounds."""
    dims = tuple(int(np.ceil(s / grid.voxel_size - 1e-9)) for s in bounds.size)
    blocked = np.ones(dims, dtype=bool)  # unknown until proven free
    dims_arr = np.asarray(dims)
    shift = np.floor((bounds.lo - grid.origin) / grid.voxel_size + 0.5).astype(np.int64)
    thr = grid.occupancy_threshold
    for key, lo in grid.log_odds.items():
        p = 1.0 / (1.0 + np.exp(-lo))
        if p <= thr:
            k = np.asarray(key) - shift
            if np.all(k >= 0) and np.all(k < dims_arr):
                blocked[k[0], k[1], k[2]] = False
    origin = grid.origin + shift * grid.voxel_size
    return MapSnapshot(grid.voxel_size, origin, blocked, bounds)


def snapshot_from_truth(truth: GroundTruthGrid) -> MapSnapshot:
    """Fully-sensed snapshot of the truth world (planner isolation tests)."""
    return MapSnapshot(truth.voxel_size, truth.origin.copy(),
                       truth.dense.copy(), truth.bounds)
