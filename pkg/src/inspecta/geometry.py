"""Shared frame conventions and small geometric helpers.

World frame is ENU (z up). Body frame is forward-left-up; the camera
optical axis coincides with body forward. Yaw is the rotation of body
forward about world z, wrapped to (-pi, pi].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def wrap_angle(a):
    """Wrap angle(s) to (-pi, pi]."""
    wrapped = np.mod(-np.asarray(a) + np.pi, 2.0 * np.pi)
    return -(wrapped - np.pi)


def rot_x(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(psi: float) -> np.ndarray:
    c, s = np.cos(psi), np.sin(psi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Body-to-world rotation, R = Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


# Columns of this matrix are the camera axes (right, down, forward)
# expressed in the body frame: right = -y_body, down = -z_body,
# forward = +x_body.
R_BODY_CAM = np.array([
    [0.0, 0.0, 1.0],
    [-1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0],
])


@dataclass(frozen=True)
class Pose:
    """Position plus yaw; the reduced pose used throughout the toolkit."""

    position: np.ndarray  # (3,) meters, world frame
    yaw: float            # radians, wrapped to (-pi, pi]

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "yaw", float(wrap_angle(self.yaw)))

    def rotation(self) -> np.ndarray:
        """Body-to-world rotation (level flight: roll = pitch = 0)."""
        return rot_z(self.yaw)

    def camera_rotation(self) -> np.ndarray:
        """Camera-to-world rotation for the forward-looking camera."""
        return self.rotation() @ R_BODY_CAM

    def distance_to(self, other: "Pose") -> float:
        return float(np.linalg.norm(self.position - other.position))

    def as_tuple(self):
        return (float(self.position[0]), float(self.position[1]),
                float(self.position[2]), self.yaw)


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box given by min/max corners."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))
        if np.any(self.hi < self.lo):
            raise ValueError("Aabb hi must be >= lo componentwise")

    @property
    def size(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Inclusive containment test for one point or an (N, 3) array."""
        p = np.asarray(points, dtype=float)
        inside = np.logical_and(p >= self.lo, p <= self.hi)
        return inside.all(axis=-1)


def segment_interpolate(p1: np.ndarray, yaw1: float, p2: np.ndarray, yaw2: float,
                        n: int):
    """n >= 2 evenly spaced poses from (p1, yaw1) to (p2, yaw2).

    Yaw travels the shortest way, so the midpoint of yaw pi-0.1 -> -pi+0.1
    passes through pi, not 0.
    """
    ts = np.linspace(0.0, 1.0, n)
    positions = p1[None, :] + ts[:, None] * (p2 - p1)[None, :]
    dyaw = wrap_angle(yaw2 - yaw1)
    yaws = wrap_angle(yaw1 + ts * dyaw)
    return positions, yaws


def point_segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from 2D point(s) to segment ab."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        d = np.linalg.norm(p - a, axis=-1)
    else:
        t = np.clip(((p - a) @ ab) / denom, 0.0, 1.0)
        proj = a + t[:, None] * ab
        d = np.linalg.norm(p - proj, axis=-1)
    return d if np.asarray(points).ndim > 1 else float(d[0])


def polyline_distance(points: np.ndarray, polyline: np.ndarray) -> np.ndarray:
    """Distance from 2D point(s) to the nearest segment of a polyline."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    poly = np.asarray(polyline, dtype=float)
    if len(poly) == 1:
        best = np.linalg.norm(pts - poly[0], axis=-1)
    else:
        best = np.full(len(pts), np.inf)
        for a, b in zip(poly[:-1], poly[1:]):
            best = np.minimum(best, point_segment_distance(pts, a, b))
    return best if np.asarray(points).ndim > 1 else float(best[0])
