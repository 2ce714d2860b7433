"""Command-line entry points.

Subcommands: sim (headless mapping mission), eval (Table-1-style state
estimation report), plan (one-shot planning on a saved map), compare
(planner benchmark), serve (mission HTTP service). Reports land as JSON or
CSV next to rendered figures. Exit codes: 0 success, 2 usage error, 1
runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path as FsPath

import numpy as np

from . import config as cfgmod
from . import report
from .estimation import evaluate
from .geometry import Aabb, Pose
from .mapping import import_map, snapshot, snapshot_from_truth
from .mission import Mission, reference_script, simulate_streams
from .planning import (DEFAULT_LIMITS, NoFeasiblePlan, PlannerConfig,
                       PlanningProblem, compare_planners, plan, validate)
from .vehicle import VelocityCommand
from .world import build_grid, load_reference_scene, load_scene


def _load_script(path):
    rows = json.loads(FsPath(path).read_text(encoding="utf-8"))
    return [VelocityCommand(np.array(r[:3], dtype=float), float(r[3]), float(r[4]))
            for r in rows]


def _scene_from_config(cfg):
    if cfg["scene"]["path"]:
        return load_scene(cfg["scene"]["path"])
    return load_reference_scene()


def cmd_sim(args) -> int:
    cfg = cfgmod.load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = FsPath(args.out)
    mission = Mission(cfg, out)
    script = _load_script(args.script_file) if args.script_file else reference_script()
    summary = mission.run_mapping(script)
    paths = mission.export_artifacts()
    fused = summary.pop("fused_report")
    vo = summary.pop("vo_report")
    summary["fused_max_deviation"] = {"x": fused.max_dev_x, "y": fused.max_dev_y,
                                      "z": fused.max_dev_z, "yaw": fused.max_dev_yaw}
    summary["vo_max_deviation"] = {"x": vo.max_dev_x, "y": vo.max_dev_y,
                                   "z": vo.max_dev_z, "yaw": vo.max_dev_yaw}
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n",
                                      encoding="utf-8")
    report.map_figure(mission.grid, out / "map.png", truth_grid=mission.truth_grid,
                      trajectory=mission.sim.truth_trace)
    report.estimation_figure(mission.sim.truth_trace, mission.sim.vo_stream,
                             mission.sim.fused, out / "estimation.png")
    mission.close()
    print(f"mapping done: {summary['frames']} frames, "
          f"IoU {summary['map_iou']:.3f}, artifacts in {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = cfgmod.load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = FsPath(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scene = _scene_from_config(cfg)
    truth_grid = build_grid(scene, cfg["scene"]["voxel_size"])
    script = _load_script(args.script_file) if args.script_file else reference_script()

    t0 = time.monotonic()
    seeds = [cfg["seed"] + k for k in range(args.seeds)]
    per_seed = []
    first_sim = None
    for seed in seeds:
        sim = simulate_streams(truth_grid, script, cfg, seed=seed)
        if first_sim is None:
            first_sim = sim
        fused = evaluate(sim.fused, sim.truth_trace)
        vo = evaluate(sim.vo_stream, sim.truth_trace)
        per_seed.append({"seed": seed,
                         "vo": {"x": vo.max_dev_x, "y": vo.max_dev_y,
                                "z": vo.max_dev_z, "yaw": vo.max_dev_yaw},
                         "fused": {"x": fused.max_dev_x, "y": fused.max_dev_y,
                                   "z": fused.max_dev_z, "yaw": fused.max_dev_yaw}})
    base = per_seed[0]
    rows = [{"axis": a, "unit": "rad" if a == "yaw" else "m",
             "vo_max_deviation": base["vo"][a],
             "fused_max_deviation": base["fused"][a]}
            for a in ("x", "y", "z", "yaw")]
    doc = {"rows": rows, "seeds": per_seed,
           "runtime_s": round(time.monotonic() - t0, 3)}
    (out / "report.json").write_text(json.dumps(doc, indent=2) + "\n",
                                     encoding="utf-8")
    with open(out / "estimates.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "y", "z", "yaw", "source"])
        for e in first_sim.vo_stream:
            w.writerow([e.timestamp, *e.position.tolist(), e.yaw, "VO"])
        for e in first_sim.fused:
            w.writerow([e.timestamp, *e.position.tolist(), e.yaw, "FUSED"])
    report.estimation_figure(first_sim.truth_trace, first_sim.vo_stream,
                             first_sim.fused, out / "estimation.png")
    for row in rows:
        print(f"{row['axis']:>4}: VO {row['vo_max_deviation']:.4f} "
              f"fused {row['fused_max_deviation']:.4f} {row['unit']}")
    return 0


def _parse_pose(text) -> Pose:
    vals = [float(v) for v in text.split(",")]
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("pose must be x,y,z,yaw")
    return Pose(np.array(vals[:3]), vals[3])


def cmd_plan(args) -> int:
    cfg = cfgmod.load_config(args.config)
    scene = _scene_from_config(cfg)
    if args.map:
        grid = import_map(args.map)
        snap = snapshot(grid, scene.bounds)
    else:
        snap = snapshot_from_truth(build_grid(scene, cfg["scene"]["voxel_size"]))
    problem = PlanningProblem(args.start, args.goal, scene.bounds,
                              cfgmod.body_box(cfg), snap,
                              goal_tolerance=cfg["planner"]["goal_tolerance"])
    pcfg = cfgmod.planner_config(cfg, algorithm=args.algorithm,
                                 seed=args.seed if args.seed is not None else 0)
    try:
        path = plan(problem, pcfg)
    except NoFeasiblePlan as exc:
        print(f"no feasible motion plan ({exc.iterations} iterations)",
              file=sys.stderr)
        return 1
    rep = validate(path, DEFAULT_LIMITS, cfgmod.body_box(cfg), snap)
    doc = path.as_dict()
    doc["within_constraints"] = rep.within_constraints
    text = json.dumps(doc, indent=2)
    if args.out:
        out = FsPath(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "path.json").write_text(text + "\n", encoding="utf-8")
        grid_for_fig = import_map(args.map) if args.map else None
        if grid_for_fig is not None:
            report.map_figure(grid_for_fig, out / "plan.png", planned_path=path)
    print(text)
    return 0


def _corridor_problem(cfg):
    bounds = Aabb(np.zeros(3), np.array([12.0, 3.0, 3.0]))
    from .world import GroundTruthScene
    grid = build_grid(GroundTruthScene([], [], bounds, 0),
                      cfg["scene"]["voxel_size"])
    return PlanningProblem(Pose([1.0, 1.5, 1.5], 0.0), Pose([11.0, 1.5, 1.5], 0.0),
                           bounds, cfgmod.body_box(cfg), snapshot_from_truth(grid),
                           goal_tolerance=cfg["planner"]["goal_tolerance"])


def _tworoom_problem(cfg):
    scene = _scene_from_config(cfg)
    snap = snapshot_from_truth(build_grid(scene, cfg["scene"]["voxel_size"]))
    return PlanningProblem(Pose([2.0, 2.0, 1.2], 0.0), Pose([7.0, 2.0, 1.2], np.pi / 2),
                           scene.bounds, cfgmod.body_box(cfg), snap,
                           goal_tolerance=cfg["planner"]["goal_tolerance"])


def cmd_compare(args) -> int:
    cfg = cfgmod.load_config(args.config)
    problem = _tworoom_problem(cfg) if args.scenario == "tworoom" \
        else _corridor_problem(cfg)
    base_seed = args.seed if args.seed is not None else 0
    configs = {alg: PlannerConfig(algorithm=alg, time_budget=args.budget,
                                  seed=base_seed)
               for alg in ("RRT", "RRT_STAR", "PRM_STAR")}
    table = compare_planners(problem, configs, n_seeds=args.seeds)
    out = FsPath(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "compare.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=["algorithm", "success_rate",
                                           "mean_length", "mean_time"])
        w.writeheader()
        w.writerows(table["rows"])
    with open(out / "records.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=["algorithm", "seed", "success",
                                           "length", "time", "iterations"],
                           extrasaction="ignore")
        w.writeheader()
        w.writerows(table["records"])
    report.planner_figure(table["rows"], out / "compare.png")
    for row in table["rows"]:
        print(f"{row['algorithm']:9s} success={row['success_rate']:.2f} "
              f"mean_length={row['mean_length']:.3f} mean_time={row['mean_time']:.3f}s")
    return 0


def cmd_serve(args) -> int:
    from .service import serve
    cfg = cfgmod.load_config(args.config)
    mission = Mission(cfg, args.out)
    if not args.skip_mapping:
        script = _load_script(args.script_file) if args.script_file \
            else reference_script()
        mission.run_mapping(script)
    host = args.host or cfg["service"]["host"]
    port = args.port or cfg["service"]["port"]
    print(f"serving mission API on http://{host}:{port}")
    serve(mission, host, port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inspecta",
        description="Quadrotor building-inspection simulator and mission toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sim", help="run a mapping mission headless")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--script-file", help="JSON [[vx,vy,vz,yaw_rate,duration],...]")
    p.set_defaults(fn=cmd_sim)

    p = sub.add_parser("eval", help="state-estimation error report")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", type=int, default=1, help="number of seeds to run")
    p.add_argument("--script-file")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("plan", help="one-shot planning on a saved map")
    p.add_argument("--config")
    p.add_argument("--map", help="OGRD1 map file (default: truth grid)")
    p.add_argument("--start", type=_parse_pose, required=True)
    p.add_argument("--goal", type=_parse_pose, required=True)
    p.add_argument("--algorithm", choices=["RRT", "RRT_STAR", "PRM_STAR"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_plan)

    p = sub.add_parser("compare", help="planner benchmark table")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--seed", type=int)
    p.add_argument("--budget", type=float, default=1.0)
    p.add_argument("--scenario", choices=["corridor", "tworoom"],
                   default="corridor")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("serve", help="mission HTTP service")
    p.add_argument("--config")
    p.add_argument("--out", default="mission_out")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--script-file")
    p.add_argument("--skip-mapping", action="store_true")
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 2
    try:
        return args.fn(args)
    except Exception as exc:  # runtime failures -> exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
