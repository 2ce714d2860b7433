"""Mission orchestration: scripted mapping flights, revisit planning and
execution, the JSONL mission log, and the Table-1-style evaluation run.

A mapping mission steps the simulation headless at 100 Hz: the kinematic
vehicle follows the flight script while synthetic sensors feed the 50 Hz
fusion filter. Captured frames pair rendered camera images with the fused
pose stream through the approximate-time synchronizer, and posed depth
scans build the occupancy map (fused poses by default, truth poses for
isolation runs). Everything is deterministic under (scene, script, config,
seed): two equal missions produce byte-identical frame indexes, maps and
logs.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path as FsPath

import numpy as np

from . import config as cfgmod
from .estimation import (OdomEstimate, VoEmulator, evaluate, initial_state,
                         run_fusion)
from .geometry import Pose, wrap_angle
from .mapping import (OccupancyGrid, compare, export_map, insert_scan,
                      mark_free_box, snapshot)
from .revisit import FrameStore, RevisitOutcome, plan_revisit, synchronize
from .sensors import MotionState, render_depth, render_rgb, sample_altimeter, sample_imu
from .vehicle import (AbortedTrajectory, VehicleState, VelocityCommand,
                      collides_truth, follow, step)
from .world import build_grid, load_reference_scene, load_scene

PHASES = ("idle", "mapping", "awaiting_selection", "planning", "executing",
          "done", "error")
LEGAL_TRANSITIONS = {
    "idle": {"mapping", "error"},
    "mapping": {"awaiting_selection", "error"},
    "awaiting_selection": {"planning", "done", "error"},
    "planning": {"awaiting_selection", "executing", "error"},
    "executing": {"awaiting_selection", "done", "error"},
    "done": {"error"},
    "error": set(),
}

START_POSE = Pose(np.array([2.0, 2.0, 1.2]), 0.0)


class MissionError(RuntimeError):
    pass


def reference_script():
    """The shipped two-room exploration flight (~64 s).

    Hover segments give the synchronizer stable views of each crack decal;
    the doorway crossing covers overlapping positions in both rooms.
    Tuples are (vx, vy, vz, yaw_rate, duration).
    """
    rows = [
        (0.0, 0.0, 0.0, 0.0, 3.0),      # face divider decal (room 1)
        (0.0, 0.0, 0.0, -0.35, 4.5),    # sweep to the south wall decal
        (0.0, 0.0, 0.0, 0.0, 3.0),
        (0.0, 0.0, 0.0, 0.35, 9.0),     # sweep past west wall to face +y
        (0.2, 0.4, 0.0, 0.0, 5.0),      # toward the doorway band
        (0.0, 0.0, 0.0, -0.35, 4.5),    # face +x for the crossing
        (0.0, 0.0, 0.0, 0.0, 1.5),
        (0.45, 0.0, 0.0, 0.0, 5.5),     # cross the wall junction
        (0.3, -0.25, 0.0, 0.0, 4.0),    # into room 2
        (0.0, 0.0, 0.0, 0.0, 3.0),      # east wall decal view
        (0.0, 0.0, 0.08, 0.0, 2.5),
        (0.0, 0.0, 0.0, 0.35, 4.5),     # turn to the north wall decal
        (0.0, 0.3, -0.08, 0.0, 2.5),
        (0.0, 0.0, 0.0, 0.0, 3.0),
        (0.0, 0.0, 0.0, 0.35, 4.5),     # face back toward the doorway
        (-0.45, 0.05, 0.0, 0.0, 5.0),   # return to the junction
        (0.0, 0.0, 0.0, 0.0, 3.0),
    ]
    return [VelocityCommand(np.array(r[:3]), r[3], r[4]) for r in rows]


@dataclass
class SimResult:
    truth_states: list
    truth_trace: np.ndarray        # rows (t, x, y, z, yaw)
    imu_stream: list
    alt_stream: list
    vo_stream: list
    fused: list
    fusion_warnings: list


def simulate_streams(truth_grid, script, cfg: dict, seed: int | None = None,
                     collision_check: bool = True, start: Pose = START_POSE) -> SimResult:
    """Step the vehicle through the script and synthesize all sensor streams."""
    seed = cfg["seed"] if seed is None else seed
    dt = 0.01  # 100 Hz master clock (IMU rate)
    tau = cfg["vehicle"]["tau"]
    imu_model = cfgmod.imu_model(cfg)
    alt_std = cfg["sensors"]["altimeter"]["noise_std"]
    rng_imu = cfgmod.stream_rng(seed, "imu")
    rng_alt = cfgmod.stream_rng(seed, "alt")
    vo = VoEmulator(cfgmod.drift_model(cfg), cfgmod.stream_rng(seed, "vo"))
    body = cfgmod.body_box(cfg)

    state = VehicleState(start.position.copy(), np.zeros(3), start.yaw, 0.0, 0.0)
    states = [state]
    imu_stream, alt_stream, vo_stream = [], [], []
    k = 0
    for cmd in script:
        n = int(round(cmd.duration / dt))
        for _ in range(n):
            prev = state
            state = step(state, cmd, dt, tau)
            k += 1
            states.append(state)
            if collision_check and k % 2 == 0 and \
                    collides_truth(state.position, state.yaw, body, truth_grid):
                raise MissionError(
                    f"script collision at t={state.timestamp:.2f} "
                    f"{np.round(state.position, 3).tolist()}")
            accel = (state.velocity - prev.velocity) / dt
            motion = MotionState(state.yaw, state.yaw_rate, accel,
                                 state.position[2], state.timestamp)
            imu_stream.append(sample_imu(motion, imu_model, rng_imu))
            if k % 5 == 0:  # 20 Hz
                alt_stream.append(sample_altimeter(motion, alt_std, rng_alt))
                vo_stream.append(vo.emit(state.position, state.yaw,
                                         state.timestamp))

    init = initial_state(start.position, start.yaw, 0.0)
    fusion = run_fusion(vo_stream, imu_stream, alt_stream, init,
                        cfgmod.fusion_config(cfg))
    truth_trace = np.array([[s.timestamp, *s.position, s.yaw] for s in states])
    return SimResult(states, truth_trace, imu_stream, alt_stream, vo_stream,
                     fusion.estimates, fusion.warnings)


def interpolate_truth(states, t: float) -> Pose:
    ts = states[0].timestamp
    dt = states[1].timestamp - ts
    i = int((t - ts) / dt)
    i = max(0, min(i, len(states) - 2))
    a, b = states[i], states[i + 1]
    if b.timestamp == a.timestamp:
        return Pose(a.position.copy(), a.yaw)
    u = (t - a.timestamp) / (b.timestamp - a.timestamp)
    u = min(max(u, 0.0), 1.0)
    pos = a.position + u * (b.position - a.position)
    yaw = wrap_angle(a.yaw + u * wrap_angle(b.yaw - a.yaw))
    return Pose(pos, float(yaw))


class Mission:
    """Single-owner mission state machine.

    All mutation happens through the owner's methods; the HTTP service
    serializes commands through one queue and only ever reads snapshots.
    """

    def __init__(self, cfg: dict, out_dir, scene=None):
        self.cfg = cfg
        self.out_dir = FsPath(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        if scene is not None:
            self.scene = scene
        elif cfg["scene"]["path"]:
            self.scene = load_scene(cfg["scene"]["path"])
        else:
            self.scene = load_reference_scene()
        self.truth_grid = build_grid(self.scene, cfg["scene"]["voxel_size"])
        self.phase = "idle"
        self.log_path = self.out_dir / "mission.log.jsonl"
        self._log_fh = open(self.log_path, "a", encoding="utf-8")
        self.store = FrameStore(self.out_dir / "frames")
        m = cfg["mapping"]
        self.grid = OccupancyGrid(
            voxel_size=m["voxel_size"], origin=self.scene.bounds.lo.copy(),
            l_hit=m["l_hit"], l_miss=m["l_miss"], l_min=m["l_min"],
            l_max=m["l_max"], occupancy_threshold=m["occupancy_threshold"])
        self.vehicle_state = VehicleState(START_POSE.position.copy(), np.zeros(3),
                                          START_POSE.yaw, 0.0, 0.0)
        self.sim: SimResult | None = None
        self.active_outcome: RevisitOutcome | None = None
        self.counters = {"frames": 0, "scans": 0, "plans": 0, "executions": 0}
        self._snapshot_cache = None

    # -- logging ---------------------------------------------------------

    def log(self, t: float, kind: str, payload: dict) -> None:
        rec = {"t": round(float(t), 6), "kind": kind, "payload": payload}
        self._log_fh.write(json.dumps(rec) + "\n")
        self._log_fh.flush()

    def transition(self, new_phase: str, t: float) -> None:
        if new_phase not in LEGAL_TRANSITIONS[self.phase]:
            raise MissionError(f"illegal transition {self.phase} -> {new_phase}")
        self.phase = new_phase
        self.log(t, "state", {"phase": new_phase})

    # -- mapping ---------------------------------------------------------

    def run_mapping(self, script=None) -> dict:
        """Mapping phase: fly the script, fuse, capture frames, build the map."""
        cfg = self.cfg
        script = script if script is not None else reference_script()
        self.transition("mapping", 0.0)
        for i, cmd in enumerate(script):
            self.log(0.0, "command", {"index": i, "v": cmd.v.tolist(),
                                      "yaw_rate": cmd.yaw_rate,
                                      "duration": cmd.duration})
        try:
            sim = simulate_streams(self.truth_grid, script, cfg)
        except MissionError as exc:
            self.log(0.0, "event", {"error": str(exc)})
            self.transition("error", 0.0)
            raise
        self.sim = sim
        for w in sim.fusion_warnings:
            self.log(0.0, "event", {"warning": w})

        cam = cfgmod.camera_model(cfg)
        t_end = sim.truth_trace[-1, 0]
        camera_events = [(k / cam.rate, None)
                         for k in range(int(math.floor(t_end * cam.rate)) + 1)]
        pose_events = [(e.timestamp, e) for e in sim.fused]
        frames, sync_stats = synchronize(camera_events, pose_events,
                                         cfgmod.sync_config(cfg))
        self.log(t_end, "event", {"sync": sync_stats})

        depth_cam = cam.scaled(cfg["mapping"]["depth_stride"])
        insert_every = max(1, int(round(
            1.0 / (cfg["sync"]["period"] * cfg["mapping"]["insert_rate"]))))
        use_truth = cfg["mapping"]["use_truth_poses"]

        for j, f in enumerate(frames):
            truth_pose = interpolate_truth(sim.truth_states, f.timestamp)
            fused_pose = Pose(f.pose.position.copy(), f.pose.yaw)
            img, mask = render_rgb(truth_pose, self.scene, cam,
                                   timestamp=f.timestamp)
            frame = self.store.add(img.pixels, fused_pose, f.timestamp,
                                   f.pose_timestamp,
                                   crack_truth_fraction=float(mask.mean()))
            self.counters["frames"] += 1
            self.log(f.timestamp, "frame",
                     {"id": frame.frame_id,
                      "pose": [round(v, 6) for v in fused_pose.as_tuple()],
                      "crack_truth_fraction": round(float(mask.mean()), 6)})
            if j % insert_every == 0:
                map_pose = truth_pose if use_truth else fused_pose
                depth = render_depth(truth_pose, self.truth_grid, depth_cam,
                                     timestamp=f.timestamp)
                stats = insert_scan(self.grid, map_pose, depth, depth_cam)
                # the flown-through volume is observed free; the in-plane
                # radius covers the body's circumscribing square so any
                # capture pose stays plannable at its own yaw under the
                # conservative rotated-box bound
                he = cfgmod.body_box(cfg).half_extents
                half = np.array([he[0] * np.sqrt(2.0), he[1] * np.sqrt(2.0),
                                 he[2]]) + 0.1
                mark_free_box(self.grid, map_pose.position - half,
                              map_pose.position + half)
                self.counters["scans"] += 1
                self.log(f.timestamp, "sensor", {"scan": stats})

        self.vehicle_state = sim.truth_states[-1]
        self._snapshot_cache = None
        self.transition("awaiting_selection", t_end)
        return {
            "frames": len(frames),
            "sync": sync_stats,
            "map_iou": compare(self.grid, self.truth_grid),
            "fused_report": evaluate(sim.fused, sim.truth_trace),
            "vo_report": evaluate(sim.vo_stream, sim.truth_trace),
        }

    # -- planning / execution --------------------------------------------

    def map_snapshot(self):
        if self._snapshot_cache is None:
            self._snapshot_cache = snapshot(self.grid, self.scene.bounds)
        return self._snapshot_cache

    def current_pose(self) -> Pose:
        return Pose(self.vehicle_state.position.copy(), self.vehicle_state.yaw)

    def plan_frame(self, frame_id: int, algorithm: str | None = None) -> RevisitOutcome:
        self.store.get(frame_id)  # FrameNotFound before any phase change
        t = self.vehicle_state.timestamp
        self.transition("planning", t)
        pcfg = cfgmod.planner_config(self.cfg, algorithm=algorithm)
        outcome = plan_revisit(
            self.store, frame_id, self.current_pose(), self.map_snapshot(),
            self.scene.bounds, cfgmod.body_box(self.cfg), pcfg,
            v_max=self.cfg["vehicle"]["v_max"],
            yaw_rate_max=self.cfg["vehicle"]["yaw_rate_max"],
            goal_tolerance=self.cfg["planner"]["goal_tolerance"])
        self.active_outcome = outcome
        self.counters["plans"] += 1
        self.log(t, "plan", {"frame_id": frame_id, "status": outcome.status,
                             "length": outcome.path.length if outcome.path else None})
        self.transition("awaiting_selection", t)
        return outcome

    def execute_frame(self, frame_id: int):
        """Generator of status dicts: planning -> executing -> terminal."""
        self.store.get(frame_id)  # FrameNotFound before any phase change
        t = self.vehicle_state.timestamp
        yield {"status": "planning", "frame_id": frame_id}
        outcome = self.active_outcome
        if outcome is None or outcome.frame_id != frame_id or \
                outcome.status not in ("planned",):
            self.transition("planning", t)
            pcfg = cfgmod.planner_config(self.cfg)
            outcome = plan_revisit(
                self.store, frame_id, self.current_pose(), self.map_snapshot(),
                self.scene.bounds, cfgmod.body_box(self.cfg), pcfg,
                v_max=self.cfg["vehicle"]["v_max"],
                yaw_rate_max=self.cfg["vehicle"]["yaw_rate_max"],
                goal_tolerance=self.cfg["planner"]["goal_tolerance"])
            self.counters["plans"] += 1
            self.log(t, "plan", {"frame_id": frame_id, "status": outcome.status,
                                 "length": outcome.path.length if outcome.path else None})
            if outcome.status != "planned":
                self.active_outcome = outcome
                self.transition("awaiting_selection", t)
                yield {"status": "no_feasible_plan", "frame_id": frame_id}
                return
            self.transition("executing", t)
        else:
            self.transition("planning", t)
            self.transition("executing", t)
        yield {"status": "executing", "frame_id": frame_id,
               "waypoints": len(outcome.path.waypoints)}

        goal = self.store.get(frame_id).pose
        try:
            traj, _ = follow(
                self.vehicle_state, outcome.commands, self.truth_grid,
                body=cfgmod.body_box(self.cfg), tau=self.cfg["vehicle"]["tau"],
                dwell_time_constants=self.cfg["vehicle"]["dwell_time_constants"])
            self.vehicle_state = traj[-1]
            final_error = float(np.linalg.norm(traj[-1].position - goal.position))
            self.active_outcome = RevisitOutcome(
                frame_id=frame_id, status="executed", path=outcome.path,
                commands=outcome.commands, final_error=final_error)
            self.counters["executions"] += 1
            self.log(traj[-1].timestamp, "event",
                     {"executed": frame_id, "final_error": round(final_error, 6)})
            self.transition("awaiting_selection", traj[-1].timestamp)
            yield {"status": "executed", "frame_id": frame_id,
                   "final_error": final_error}
        except AbortedTrajectory as exc:
            self.vehicle_state = exc.trajectory[-1]
            self.active_outcome = RevisitOutcome(
                frame_id=frame_id, status="execution_aborted",
                path=outcome.path, commands=outcome.commands)
            self.log(self.vehicle_state.timestamp, "event",
                     {"aborted": frame_id,
                      "position": np.round(exc.position, 4).tolist()})
            self.transition("error", self.vehicle_state.timestamp)
            yield {"status": "execution_aborted", "frame_id": frame_id}

    # -- artifacts ---------------------------------------------------------

    def export_artifacts(self) -> dict:
        paths = {"map": self.out_dir / "map.ogrd",
                 "frames": self.store.directory,
                 "log": self.log_path}
        export_map(self.grid, paths["map"])
        if self.sim is not None:
            trace = self.out_dir / "estimates.csv"
            with open(trace, "w", encoding="utf-8") as fh:
                fh.write("t,x,y,z,yaw,source\n")
                for e in self.sim.vo_stream:
                    fh.write(f"{e.timestamp},{e.position[0]},{e.position[1]},"
                             f"{e.position[2]},{e.yaw},VO\n")
                for e in self.sim.fused:
                    fh.write(f"{e.timestamp},{e.position[0]},{e.position[1]},"
                             f"{e.position[2]},{e.yaw},FUSED\n")
            truth = self.out_dir / "truth.csv"
            with open(truth, "w", encoding="utf-8") as fh:
                fh.write("t,x,y,z,yaw\n")
                for row in self.sim.truth_trace:
                    fh.write(",".join(repr(float(v)) for v in row) + "\n")
            paths["estimates"] = trace
            paths["truth"] = truth
        return paths

    def close(self):
        self._log_fh.close()


def replay_phases(log_path) -> list:
    """Phase sequence reconstructed from a mission log."""
    phases = []
    with open(log_path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            if rec["kind"] == "state":
                phases.append(rec["payload"]["phase"])
    return phases
