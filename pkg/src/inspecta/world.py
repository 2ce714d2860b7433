"""Simulated indoor environment: box geometry, crack decals, voxelized truth.

Scenes are collections of axis-aligned boxes with procedural materials and
crack decals painted on box faces. The voxelized ground truth uses a
voxel-center membership rule, so features thinner than one voxel may vanish
from the grid (they still exist for the RGB renderer, which raycasts the
analytic boxes).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import Aabb, polyline_distance

MATERIALS = ("brick", "plaster", "monotone")
FACES = ("+x", "-x", "+y", "-y", "+z", "-z")

# Face -> (fixed axis, sign, u axis, v axis). u/v are face-plane coordinates
# measured from the face center.
_FACE_AXES = {
    "+x": (0, +1, 1, 2),
    "-x": (0, -1, 1, 2),
    "+y": (1, +1, 0, 2),
    "-y": (1, -1, 0, 2),
    "+z": (2, +1, 0, 1),
    "-z": (2, -1, 0, 1),
}

CRACK_INTENSITY = 22  # flat dark value, no anti-aliasing


@dataclass(frozen=True)
class CrackDecal:
    """A polyline crack painted on one face of one box."""

    box_index: int
    face: str
    polyline: np.ndarray  # (N, 2) face-plane coordinates, meters
    width: float          # meters

    def __post_init__(self):
        object.__setattr__(self, "polyline", np.asarray(self.polyline, dtype=float))
        if self.face not in FACES:
            raise ValueError(f"unknown face {self.face!r}")
        if len(self.polyline) < 2:
            raise ValueError("decal polyline needs at least 2 points")
        if self.width <= 0:
            raise ValueError("decal width must be positive")


@dataclass(frozen=True)
class SceneBox:
    center: np.ndarray
    half_extents: np.ndarray
    material: str

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "half_extents", np.asarray(self.half_extents, dtype=float))
        if np.any(self.half_extents <= 0):
            raise ValueError("box half_extents must be strictly positive")
        if self.material not in MATERIALS:
            raise ValueError(f"unknown material {self.material!r}")

    @property
    def lo(self) -> np.ndarray:
        return self.center - self.half_extents

    @property
    def hi(self) -> np.ndarray:
        return self.center + self.half_extents

    def face_half_extents(self, face: str):
        """(hu, hv) of the face rectangle."""
        _, _, ua, va = _FACE_AXES[face]
        return float(self.half_extents[ua]), float(self.half_extents[va])


@dataclass(frozen=True)
class GroundTruthScene:
    boxes: list
    decals: list
    bounds: Aabb
    seed: int = 0
    _face_decals: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for i, box in enumerate(self.boxes):
            if not (np.all(box.lo >= self.bounds.lo - 1e-12)
                    and np.all(box.hi <= self.bounds.hi + 1e-12)):
                raise ValueError(f"box {i} lies outside scene bounds")
        for d in self.decals:
            if not 0 <= d.box_index < len(self.boxes):
                raise ValueError(f"decal references missing box {d.box_index}")
            hu, hv = self.boxes[d.box_index].face_half_extents(d.face)
            if np.any(np.abs(d.polyline[:, 0]) > hu + 1e-12) or \
               np.any(np.abs(d.polyline[:, 1]) > hv + 1e-12):
                raise ValueError("decal polyline leaves its face rectangle")
        by_face = {}
        for d in self.decals:
            by_face.setdefault((d.box_index, d.face), []).append(d)
        object.__setattr__(self, "_face_decals", by_face)

    def decals_on(self, box_index: int, face: str):
        return self._face_decals.get((box_index, face), [])


@dataclass(frozen=True)
class GroundTruthGrid:
    """Voxelized truth world; occupied carries integer (ix, iy, iz) indices."""

    voxel_size: float
    origin: np.ndarray
    occupied: frozenset
    bounds: Aabb
    _dense: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        dims = self.dims
        dense = np.zeros(dims, dtype=bool)
        if self.occupied:
            idx = np.array(sorted(self.occupied), dtype=np.int64)
            if np.any(idx < 0) or np.any(idx >= np.asarray(dims)):
                raise ValueError("occupied voxel index outside scene bounds")
            dense[idx[:, 0], idx[:, 1], idx[:, 2]] = True
        object.__setattr__(self, "_dense", dense)

    @property
    def dims(self):
        return tuple(int(np.ceil(s / self.voxel_size - 1e-9))
                     for s in self.bounds.size)

    @property
    def dense(self) -> np.ndarray:
        """Dense occupancy volume; index [ix, iy, iz]. Read-only cache."""
        return self._dense

    def voxel_index(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return np.floor((p - self.origin) / self.voxel_size).astype(np.int64)

    def voxel_center(self, index) -> np.ndarray:
        return self.origin + (np.asarray(index, dtype=float) + 0.5) * self.voxel_size


def build_grid(scene: GroundTruthScene, voxel_size: float) -> GroundTruthGrid:
    """Voxelize the scene: a voxel is occupied iff its center lies in a box."""
    if voxel_size <= 0:
        raise ValueError("voxel_size must be positive")
    lo = scene.bounds.lo
    dims = tuple(int(np.ceil(s / voxel_size - 1e-9)) for s in scene.bounds.size)
    centers = [lo[a] + (np.arange(dims[a]) + 0.5) * voxel_size for a in range(3)]
    mask = np.zeros(dims, dtype=bool)
    for box in scene.boxes:
        per_axis = [
            (centers[a] >= box.lo[a]) & (centers[a] <= box.hi[a])
            for a in range(3)
        ]
        mask |= (per_axis[0][:, None, None]
                 & per_axis[1][None, :, None]
                 & per_axis[2][None, None, :])
    occ = frozenset(map(tuple, np.argwhere(mask).tolist()))
    return GroundTruthGrid(voxel_size=voxel_size, origin=lo.copy(),
                           occupied=occ, bounds=scene.bounds)


def is_occupied(grid: GroundTruthGrid, point) -> bool:
    """True iff the point's voxel is occupied; points outside bounds are free."""
    p = np.asarray(point, dtype=float)
    if not bool(grid.bounds.contains(p)):
        return False
    idx = grid.voxel_index(p)
    dims = grid.dims
    if np.any(idx < 0) or np.any(idx >= np.asarray(dims)):
        return False
    return bool(grid.dense[idx[0], idx[1], idx[2]])


def _hash01(ix: np.ndarray, iy: np.ndarray, seed: int) -> np.ndarray:
    """Deterministic lattice hash -> [0, 1). Vectorized, integer-only."""
    mask = np.uint64(0xFFFFFFFF)
    h = (ix.astype(np.uint64) * np.uint64(374761393)
         + iy.astype(np.uint64) * np.uint64(668265263)
         + np.uint64(seed % (1 << 32)) * np.uint64(2246822519)) & mask
    h ^= h >> np.uint64(13)
    h = (h * np.uint64(1274126177)) & mask
    h ^= h >> np.uint64(16)
    return h.astype(np.float64) / 4294967296.0


def _material_intensity(material: str, u: np.ndarray, v: np.ndarray, seed: int):
    """Grayscale intensity plus (r, g, b) tint offsets for a material patch."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if material == "brick":
        row = np.floor(v / 0.25)
        offset = np.where(row.astype(np.int64) % 2 == 0, 0.0, 0.25)
        col = np.floor((u + offset) / 0.5)
        jitter = _hash01(col.astype(np.int64), row.astype(np.int64), seed) * 16.0 - 8.0
        base = 158.0 + jitter
        du = np.abs((u + offset) - (col + 0.5) * 0.5)
        dv = np.abs(v - (row + 0.5) * 0.25)
        mortar = (du > 0.25 - 0.012) | (dv > 0.125 - 0.012)
        intensity = np.where(mortar, 142.0, base)
        tint = (12.0, -4.0, -10.0)
    elif material == "plaster":
        gi = np.floor(u / 0.04).astype(np.int64)
        gj = np.floor(v / 0.04).astype(np.int64)
        noise = _hash01(gi, gj, seed + 101) * 14.0 - 7.0
        intensity = 168.0 + noise
        tint = (0.0, 0.0, 0.0)
    elif material == "monotone":
        gi = np.floor(u / 0.08).astype(np.int64)
        gj = np.floor(v / 0.08).astype(np.int64)
        noise = _hash01(gi, gj, seed + 202) * 4.0 - 2.0
        intensity = 150.0 + noise
        tint = (0.0, 0.0, 0.0)
    else:
        raise ValueError(f"unknown material {material!r}")
    return intensity, tint


def face_color(scene: GroundTruthScene, box_index: int, face: str,
               u: np.ndarray, v: np.ndarray):
    """Vectorized color + crack truth for face-plane points of one box face.

    Returns (rgb uint8 array of shape u.shape + (3,), crack bool array).
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    box = scene.boxes[box_index]
    face_seed = scene.seed * 1031 + box_index * 17 + FACES.index(face)
    intensity, tint = _material_intensity(box.material, u, v, face_seed)

    crack = np.zeros(u.shape, dtype=bool)
    for decal in scene.decals_on(box_index, face):
        pts = np.stack([u.ravel(), v.ravel()], axis=-1)
        d = polyline_distance(pts, decal.polyline)
        crack |= (d <= decal.width / 2.0).reshape(u.shape)

    rgb = np.empty(u.shape + (3,), dtype=np.float64)
    for c in range(3):
        rgb[..., c] = np.clip(intensity + tint[c], 0, 255)
    rgb[crack] = (CRACK_INTENSITY, CRACK_INTENSITY - 2, CRACK_INTENSITY - 2)
    return rgb.astype(np.uint8), crack


def locate_on_face(scene: GroundTruthScene, point, tol: float = 1e-6):
    """Find (box_index, face, u, v) for a point lying on a box face."""
    p = np.asarray(point, dtype=float)
    for bi, box in enumerate(scene.boxes):
        for face, (axis, sign, ua, va) in _FACE_AXES.items():
            plane = box.center[axis] + sign * box.half_extents[axis]
            if abs(p[axis] - plane) > tol:
                continue
            u = p[ua] - box.center[ua]
            v = p[va] - box.center[va]
            if abs(u) <= box.half_extents[ua] + tol and \
               abs(v) <= box.half_extents[va] + tol:
                return bi, face, float(u), float(v)
    return None


def surface_color(scene: GroundTruthScene, point):
    """Color and crack truth at a point on a box face.

    Raises ValueError when the point does not lie on any face (within 1e-6 m).
    """
    hit = locate_on_face(scene, point)
    if hit is None:
        raise ValueError("point does not lie on any box face")
    bi, face, u, v = hit
    rgb, crack = face_color(scene, bi, face, np.array([u]), np.array([v]))
    return rgb[0], bool(crack[0])


def save_scene(scene: GroundTruthScene, path) -> None:
    doc = {
        "bounds": {"min": scene.bounds.lo.tolist(), "max": scene.bounds.hi.tolist()},
        "boxes": [
            {"center": b.center.tolist(), "half_extents": b.half_extents.tolist(),
             "material": b.material}
            for b in scene.boxes
        ],
        "decals": [
            {"box": d.box_index, "face": d.face, "polyline": d.polyline.tolist(),
             "width": d.width}
            for d in scene.decals
        ],
        "seed": scene.seed,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_scene(path) -> GroundTruthScene:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    bounds = Aabb(np.asarray(doc["bounds"]["min"]), np.asarray(doc["bounds"]["max"]))
    boxes = [SceneBox(np.asarray(b["center"]), np.asarray(b["half_extents"]),
                      b["material"]) for b in doc["boxes"]]
    decals = [CrackDecal(d["box"], d["face"], np.asarray(d["polyline"]), d["width"])
              for d in doc.get("decals", [])]
    return GroundTruthScene(boxes=boxes, decals=decals, bounds=bounds,
                            seed=int(doc.get("seed", 0)))


def reference_scene_path() -> Path:
    """Path of the bundled two-room scene."""
    return Path(__file__).parent / "scenes" / "tworoom.json"


def load_reference_scene() -> GroundTruthScene:
    return load_scene(reference_scene_path())
