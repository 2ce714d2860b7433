"""Kinematic quadrotor with first-order velocity-command tracking.

Roll and pitch are abstracted away (the flight controller's velocity mode
owns attitude); the state is position, world-frame velocity, yaw and yaw
rate. The step integrator uses the exact solution of the first-order lag,
so it is accurate for any dt and reduces to instantaneous tracking at
tau = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import wrap_angle
from .world import GroundTruthGrid


@dataclass(frozen=True)
class VehicleState:
    position: np.ndarray   # m, world
    velocity: np.ndarray   # m/s, world
    yaw: float             # rad, (-pi, pi]
    yaw_rate: float        # rad/s
    timestamp: float       # s

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))
        object.__setattr__(self, "yaw", float(wrap_angle(self.yaw)))
        if not (np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.velocity))
                and math.isfinite(self.yaw) and math.isfinite(self.yaw_rate)):
            raise ValueError("vehicle state must be finite")


@dataclass(frozen=True)
class VelocityCommand:
    v: np.ndarray        # m/s, world frame
    yaw_rate: float      # rad/s
    duration: float      # s

    def __post_init__(self):
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        if self.duration <= 0:
            raise ValueError("command duration must be positive")


@dataclass(frozen=True)
class BodyBox:
    half_extents: np.ndarray = (0.45, 0.45, 0.15)

    def __post_init__(self):
        object.__setattr__(self, "half_extents",
                           np.asarray(self.half_extents, dtype=float))
        if np.any(self.half_extents <= 0):
            raise ValueError("body half_extents must be positive")

    def world_aabb(self, position: np.ndarray, yaw: float):
        """Conservative axis-aligned bound of the yaw-rotated body box."""
        hx, hy, hz = self.half_extents
        c, s = abs(math.cos(yaw)), abs(math.sin(yaw))
        half = np.array([hx * c + hy * s, hx * s + hy * c, hz])
        return position - half, position + half


class AbortedTrajectory(RuntimeError):
    """Raised when command execution drives the body into the truth world."""

    def __init__(self, pose, trajectory):
        super().__init__(f"collision at {np.round(pose[0], 3).tolist()}")
        self.position, self.yaw = pose
        self.trajectory = trajectory


def step(state: VehicleState, cmd: VelocityCommand, dt: float,
         tau: float) -> VehicleState:
    """Advance one control tick with exact first-order velocity relaxation."""
    if not 0.0 < dt <= 0.02:
        raise ValueError("dt must lie in (0, 0.02] (50 Hz base rate)")
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if tau > 0:
        alpha = math.exp(-dt / tau)
        settle = tau * (1.0 - alpha)
    else:
        alpha = 0.0
        settle = 0.0
    dv = state.velocity - cmd.v
    velocity = cmd.v + dv * alpha
    position = state.position + cmd.v * dt + dv * settle
    dw = state.yaw_rate - cmd.yaw_rate
    yaw_rate = cmd.yaw_rate + dw * alpha
    yaw = wrap_angle(state.yaw + cmd.yaw_rate * dt + dw * settle)
    return VehicleState(position, velocity, float(yaw), float(yaw_rate),
                        state.timestamp + dt)


def collides_truth(position: np.ndarray, yaw: float, body: BodyBox,
                   world: GroundTruthGrid) -> bool:
    """Body box against the voxelized truth world (simulation safety check)."""
    lo, hi = body.world_aabb(np.asarray(position, dtype=float), yaw)
    dense = world.dense
    dims = np.array(dense.shape)
    i_lo = np.floor((lo - world.origin) / world.voxel_size).astype(np.int64)
    i_hi = np.floor((hi - world.origin) / world.voxel_size).astype(np.int64)
    i_lo = np.maximum(i_lo, 0)
    i_hi = np.minimum(i_hi, dims - 1)
    if np.any(i_lo > i_hi):
        return False
    return bool(dense[i_lo[0]:i_hi[0] + 1,
                      i_lo[1]:i_hi[1] + 1,
                      i_lo[2]:i_hi[2] + 1].any())


def follow(state: VehicleState, commands, world: GroundTruthGrid, *,
           body: BodyBox | None = None, dt: float = 0.02, tau: float = 0.3,
           dwell_time_constants: float = 4.0):
    """Execute commands sequentially; returns (trajectory, final_error).

    After each segment a zero-velocity dwell of dwell_time_constants * tau
    lets the first-order lag settle so multi-segment paths land on their
    waypoints. Raises AbortedTrajectory on contact with the truth world.
    """
    body = body or BodyBox()
    expected = state.position.copy()
    trajectory = [state]

    def run(cmd: VelocityCommand):
        nonlocal state
        remaining = cmd.duration
        while remaining > 1e-12:
            h = min(dt, remaining)
            state = step(state, cmd, h, tau)
            remaining -= h
            trajectory.append(state)
            if collides_truth(state.position, state.yaw, body, world):
                raise AbortedTrajectory((state.position, state.yaw), trajectory)

    for cmd in commands:
        expected = expected + cmd.v * cmd.duration
        run(cmd)
        if tau > 0 and dwell_time_constants > 0:
            run(VelocityCommand(np.zeros(3), 0.0, dwell_time_constants * tau))

    final_error = float(np.linalg.norm(state.position - expected))
    return trajectory, final_error
