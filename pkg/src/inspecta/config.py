"""Mission configuration: defaults, file loading, seed derivation.

The config document is plain JSON with one section per subsystem. Every
tunable default lives here so a config file (or the INSPECTA_SEED
environment variable, which overrides the seed) fully determines a mission.
Sub-generators are derived from the top seed per stream, so adding a
consumer never reshuffles another stream's draws.
"""

from __future__ import annotations

import copy
import json
import os
from pathlib import Path

import numpy as np

from .estimation import DriftModel, FusionConfig
from .planning import PlannerConfig
from .revisit import SyncConfig
from .sensors import CameraModel, ImuModel
from .vehicle import BodyBox

DEFAULT_SEED = 42

# per-stream offsets for seed derivation; order is frozen
RNG_STREAMS = {"imu": 1, "alt": 2, "vo": 3, "planner": 4, "texture": 5}


def default_config() -> dict:
    return {
        "seed": DEFAULT_SEED,
        "scene": {
            "path": None,          # None -> bundled two-room scene
            "voxel_size": 0.1,
        },
        "sensors": {
            "camera": {"hfov_deg": 57.0, "vfov_deg": 43.0, "width": 160,
                       "height": 120, "max_range": 6.0, "rate": 30.0},
            "imu": {"gyro_noise_std": 2e-4, "gyro_bias": [0.0, 0.0, 1e-4],
                    "accel_noise_std": 1e-2, "accel_bias": [0.0, 0.0, 0.01],
                    "rate": 100.0},
            "altimeter": {"noise_std": 0.02, "rate": 20.0},
        },
        "drift": {"pos_walk_std": 0.003, "yaw_walk_std": 0.03,
                  "pos_noise_std": 0.01, "yaw_noise_std": 0.02, "rate": 20.0},
        "ekf": {"rate": 50.0, "r_vo_pos": 0.012, "r_vo_yaw": 0.5,
                "r_gyro": 0.002, "r_accel": 0.1, "r_rollpitch": 0.05,
                "r_alt": 0.02, "rollpitch_gate": 0.5},
        "mapping": {"voxel_size": 0.1, "l_hit": 0.85, "l_miss": -0.4,
                    "l_min": -3.5, "l_max": 3.5, "occupancy_threshold": 0.5,
                    "insert_rate": 2.0, "depth_stride": 4,
                    "use_truth_poses": False},
        "planner": {"algorithm": "RRT_STAR", "step_size": 0.3, "goal_bias": 0.05,
                    "time_budget": 2.0, "yaw_weight": 0.3,
                    "edge_resolution": 0.05, "goal_tolerance": 0.1,
                    "limits": {"max_segment": 0.5, "max_yaw_step": 0.5}},
        "vehicle": {"tau": 0.3, "v_max": 0.5, "yaw_rate_max": 0.8,
                    "body_half_extents": [0.45, 0.45, 0.15],
                    "dwell_time_constants": 4.0},
        "sync": {"period": 0.5, "slop": 0.05},
        "service": {"host": "127.0.0.1", "port": 8750, "realtime": False,
                    "telemetry_rate": 10.0},
    }


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, then file, then explicit overrides, then INSPECTA_SEED."""
    cfg = default_config()
    if path is not None:
        cfg = _merge(cfg, json.loads(Path(path).read_text(encoding="utf-8")))
    if overrides:
        cfg = _merge(cfg, overrides)
    env_seed = os.environ.get("INSPECTA_SEED")
    if env_seed is not None:
        cfg["seed"] = int(env_seed)
    return cfg


def save_config(cfg: dict, path) -> None:
    Path(path).write_text(json.dumps(cfg, indent=2) + "\n", encoding="utf-8")


def stream_rng(seed: int, stream: str) -> np.random.Generator:
    return np.random.default_rng([seed, RNG_STREAMS[stream]])


def camera_model(cfg: dict) -> CameraModel:
    return CameraModel(**cfg["sensors"]["camera"])


def imu_model(cfg: dict) -> ImuModel:
    c = cfg["sensors"]["imu"]
    return ImuModel(gyro_noise_std=c["gyro_noise_std"],
                    gyro_bias=tuple(c["gyro_bias"]),
                    accel_noise_std=c["accel_noise_std"],
                    accel_bias=tuple(c["accel_bias"]), rate=c["rate"])


def drift_model(cfg: dict) -> DriftModel:
    return DriftModel(**cfg["drift"])


def fusion_config(cfg: dict) -> FusionConfig:
    return FusionConfig(**cfg["ekf"])


def sync_config(cfg: dict) -> SyncConfig:
    return SyncConfig(**cfg["sync"])


def body_box(cfg: dict) -> BodyBox:
    return BodyBox(tuple(cfg["vehicle"]["body_half_extents"]))


def planner_config(cfg: dict, *, algorithm: str | None = None,
                   seed: int | None = None) -> PlannerConfig:
    p = cfg["planner"]
    return PlannerConfig(
        algorithm=algorithm or p["algorithm"], step_size=p["step_size"],
        goal_bias=p["goal_bias"], time_budget=p["time_budget"],
        yaw_weight=p["yaw_weight"], edge_resolution=p["edge_resolution"],
        seed=seed if seed is not None else int(
            stream_rng(cfg["seed"], "planner").integers(0, 2**31 - 1)))
