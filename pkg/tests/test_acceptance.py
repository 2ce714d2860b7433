"""Acceptance suite: one test per criterion, each at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
pass lines. The expensive reference missions are shared module fixtures.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from inspecta.config import default_config, load_config
from inspecta.estimation import (
    DEFAULT_Q_DIAG,
    EkfState,
    ekf_predict,
    ekf_update,
    evaluate,
    propagate_mean,
    propagation_jacobian,
)
from inspecta.geometry import Aabb, Pose
from inspecta.mapping import MapSnapshot, snapshot_from_truth
from inspecta.mission import Mission, reference_script, simulate_streams
from inspecta.planning import (
    DEFAULT_LIMITS,
    PlannerConfig,
    PlanningProblem,
    compare_planners,
    validate,
)
from inspecta.revisit import classify_frames, plan_revisit
from inspecta.vehicle import BodyBox, follow
from inspecta.world import build_grid, load_reference_scene

# a frame "contains a crack" when at least 2% of its pixels image crack
# surface; below that the decal is a sliver clipped at the image border
CRACK_FRAME_FRACTION = 0.02


def ok(name: str, detail: str = ""):
    print(f"[ACCEPTANCE] {name}: PASS {detail}")


@pytest.fixture(scope="module")
def reference_mission_fused(tmp_path_factory):
    m = Mission(default_config(), tmp_path_factory.mktemp("accept_fused"))
    t0 = time.monotonic()
    summary = m.run_mapping()
    yield m, summary, time.monotonic() - t0
    m.close()


@pytest.fixture(scope="module")
def reference_mission_truth(tmp_path_factory):
    cfg = default_config()
    cfg["mapping"]["use_truth_poses"] = True
    m = Mission(cfg, tmp_path_factory.mktemp("accept_truth"))
    t0 = time.monotonic()
    summary = m.run_mapping()
    yield m, summary, time.monotonic() - t0
    m.close()


class TestStateEstimation:
    def test_estimation_errors_and_yaw_ordering(self):
        """Fused <= 0.15 m per axis; fused yaw < VO yaw on 10/10 seeds; < 60 s."""
        cfg = default_config()
        grid = build_grid(load_reference_scene(), cfg["scene"]["voxel_size"])
        script = reference_script()
        t0 = time.monotonic()
        orderings = []
        shipped = None
        for k in range(10):
            sim = simulate_streams(grid, script, cfg, seed=cfg["seed"] + k)
            fused = evaluate(sim.fused, sim.truth_trace)
            vo = evaluate(sim.vo_stream, sim.truth_trace)
            orderings.append(fused.max_dev_yaw < vo.max_dev_yaw)
            if k == 0:
                shipped = (fused, vo)
        runtime = time.monotonic() - t0

        fused, vo = shipped
        assert fused.max_dev_x <= 0.15
        assert fused.max_dev_y <= 0.15
        assert fused.max_dev_z <= 0.15
        assert sum(orderings) == 10
        # shipped drift config brackets the reported VO yaw magnitude
        assert 0.15 <= vo.max_dev_yaw <= 0.35
        assert runtime < 60.0
        ok("state-estimation",
           f"(fused max {max(fused.max_dev_x, fused.max_dev_y, fused.max_dev_z):.3f} m, "
           f"yaw {fused.max_dev_yaw:.4f} vs VO {vo.max_dev_yaw:.4f} rad, "
           f"10/10 seeds, {runtime:.1f} s)")


class TestEkfNumerics:
    def test_jacobian_vs_central_finite_differences(self):
        """Max relative error < 1e-5 against the finite-difference oracle."""
        rng = np.random.default_rng(17)
        worst = 0.0
        for _ in range(50):
            mean = np.zeros(15)
            mean[0:3] = rng.normal(0, 2.0, 3)
            mean[3:6] = rng.normal(0, 0.5, 3)
            mean[6:9] = rng.normal(0, 1.0, 3)
            mean[9:12] = rng.normal(0, 0.6, 3)
            mean[12:15] = rng.normal(0, 1.5, 3)
            dt = 0.02
            f = propagation_jacobian(mean, dt)
            fd = np.zeros_like(f)
            for j in range(15):
                h = 1e-6 * max(1.0, abs(mean[j]))
                hi = mean.copy(); hi[j] += h
                lo = mean.copy(); lo[j] -= h
                fd[:, j] = (propagate_mean(hi, dt) - propagate_mean(lo, dt)) / (2 * h)
            worst = max(worst, np.abs(fd - f).max() / max(1.0, np.abs(f).max()))
        assert worst < 1e-5
        ok("ekf-jacobian", f"(max rel err {worst:.2e})")

    def test_covariance_psd_over_ten_thousand_steps(self):
        """Symmetric and min eigenvalue >= -1e-9 through 1e4 predict/update."""
        state = EkfState(np.zeros(15), np.eye(15) * 1e-3, 0.0)
        rng = np.random.default_rng(23)
        worst_asym = 0.0
        worst_eig = 0.0
        for i in range(10_000):
            state = ekf_predict(state, 0.02, DEFAULT_Q_DIAG)
            if i % 5 == 0:
                z = state.mean[[0, 1, 2, 5]] + rng.normal(0, 0.01, 4)
                state, _ = ekf_update(state, z, "vo_pose",
                                      np.diag([1.44e-4] * 3 + [0.25]))
            if i % 2 == 0:
                z = np.concatenate([state.mean[9:15],
                                    state.mean[3:5]]) + rng.normal(0, 0.01, 8)
                state, _ = ekf_update(state, z, "imu",
                                      np.diag([4e-6] * 3 + [1e-2] * 3 + [2.5e-3] * 2))
            if i % 500 == 0 or i == 9_999:
                asym = np.abs(state.covariance - state.covariance.T).max()
                eig = float(np.linalg.eigvalsh(state.covariance).min())
                worst_asym = max(worst_asym, asym)
                worst_eig = min(worst_eig, eig) if i else eig
        assert worst_asym <= 1e-9
        assert worst_eig >= -1e-9
        ok("ekf-psd", f"(asym {worst_asym:.1e}, min eig {worst_eig:.1e})")

    def test_ekf_equals_linear_kalman_filter(self):
        """Joseph-form EKF vs information-filter oracle within 1e-10."""
        rng = np.random.default_rng(29)
        q = np.diag(DEFAULT_Q_DIAG)
        idx = np.array([0, 1, 2, 5])
        h = np.zeros((4, 15))
        h[np.arange(4), idx] = 1.0
        r = np.diag([1e-4, 1e-4, 1e-4, 4e-4])
        mean = np.zeros(15)
        mean[6:9] = (0.3, -0.2, 0.1)
        cov = np.eye(15) * 1e-3
        state = EkfState(mean, cov, 0.0)
        mean_o, cov_o = mean.copy(), cov.copy()
        worst = 0.0
        for _ in range(3):
            f = propagation_jacobian(state.mean, 0.02)
            state = ekf_predict(state, 0.02)
            mean_o = propagate_mean(mean_o, 0.02)
            cov_o = f @ cov_o @ f.T + q * 0.02
            cov_o = 0.5 * (cov_o + cov_o.T)
            z = state.mean[idx] + rng.normal(0, 0.003, 4)
            info = np.linalg.inv(cov_o) + h.T @ np.linalg.inv(r) @ h
            cov_post = np.linalg.inv(info)
            mean_o = mean_o + cov_post @ h.T @ np.linalg.inv(r) @ (z - h @ mean_o)
            cov_o = 0.5 * (cov_post + cov_post.T)
            state, _ = ekf_update(state, z, "vo_pose", r)
            worst = max(worst, np.abs(state.mean - mean_o).max(),
                        np.abs(state.covariance - cov_o).max())
        assert worst < 1e-10
        ok("ekf-linear-equivalence", f"(max diff {worst:.1e})")


class TestMappingFidelity:
    def test_truth_pose_iou(self, reference_mission_truth):
        m, summary, runtime = reference_mission_truth
        assert summary["map_iou"] >= 0.9
        assert runtime < 60.0
        ok("mapping-truth-poses", f"(IoU {summary['map_iou']:.3f}, {runtime:.1f} s)")

    def test_fused_pose_iou(self, reference_mission_fused):
        m, summary, runtime = reference_mission_fused
        assert summary["map_iou"] >= 0.8
        assert runtime < 60.0
        ok("mapping-fused-poses", f"(IoU {summary['map_iou']:.3f}, {runtime:.1f} s)")


class TestPlannerBattery:
    def corridor_problem(self):
        from inspecta.world import GroundTruthScene
        bounds = Aabb(np.zeros(3), np.array([12.0, 3.0, 3.0]))
        grid = build_grid(GroundTruthScene([], [], bounds, 0), 0.1)
        return PlanningProblem(Pose([1.0, 1.5, 1.5], 0.0),
                               Pose([11.0, 1.5, 1.5], 0.0), bounds, BodyBox(),
                               snapshot_from_truth(grid), goal_tolerance=0.1)

    def junction_problem(self):
        scene = load_reference_scene()
        snap = snapshot_from_truth(build_grid(scene, 0.1))
        return PlanningProblem(Pose([2.0, 2.0, 1.2], 0.0),
                               Pose([7.0, 2.0, 1.2], np.pi / 2), scene.bounds,
                               BodyBox(), snap, goal_tolerance=0.1)

    def run_battery(self, problem, budget):
        configs = {alg: PlannerConfig(algorithm=alg, time_budget=budget, seed=100)
                   for alg in ("RRT", "RRT_STAR", "PRM_STAR")}
        return compare_planners(problem, configs, n_seeds=20)

    def test_planner_battery(self):
        body = BodyBox()
        results = {}
        for name, problem, budget in (("corridor", self.corridor_problem(), 1.5),
                                      ("junction", self.junction_problem(), 1.5)):
            table = self.run_battery(problem, budget)
            results[name] = table
            rows = {r["algorithm"]: r for r in table["rows"]}
            assert rows["RRT_STAR"]["success_rate"] == 1.0, name
            # every returned path passes the independent fine-resolution recheck
            for rec in table["records"]:
                if rec["success"]:
                    rep = validate(rec["path"], DEFAULT_LIMITS, body, problem.map)
                    assert rep.within_constraints, (name, rec["algorithm"],
                                                    rec["seed"], rep)

        corridor_rows = {r["algorithm"]: r for r in results["corridor"]["rows"]}
        star_lengths = [r["length"] for r in results["corridor"]["records"]
                        if r["algorithm"] == "RRT_STAR" and r["success"]]
        assert max(star_lengths) <= 1.10 * 10.0
        # paired seeds: same seed sequence for both algorithms
        assert corridor_rows["RRT_STAR"]["mean_length"] <= \
            corridor_rows["RRT"]["mean_length"]
        ok("planner-battery",
           f"(RRT* 40/40, worst corridor ratio "
           f"{max(star_lengths) / 10.0:.3f}, mean RRT* "
           f"{corridor_rows['RRT_STAR']['mean_length']:.2f} <= RRT "
           f"{corridor_rows['RRT']['mean_length']:.2f})")


class TestRevisitEndToEnd:
    def test_capture_contract_and_recall(self, reference_mission_fused):
        m, summary, _ = reference_mission_fused
        frames = m.store.frames
        assert len(frames) >= 20
        ts = [f.timestamp for f in frames]
        assert min(np.diff(ts)) >= m.cfg["sync"]["period"] - 1e-9
        for f in frames:
            assert abs(f.timestamp - f.pose_timestamp) <= m.cfg["sync"]["slop"]

        classify_frames(m.store, "reference")
        crack_frames = [f for f in frames
                        if f.crack_truth_fraction >= CRACK_FRAME_FRACTION]
        assert len(crack_frames) >= 13
        missed = [f for f in crack_frames if f.classification.label != "Crack"]
        assert not missed, [f.frame_id for f in missed]
        detected = [f for f in frames if f.classification.label == "Crack"]
        tp = [f for f in detected
              if f.crack_truth_fraction >= CRACK_FRAME_FRACTION]
        precision = len(tp) / len(detected)
        ok("revisit-capture-and-recall",
           f"({len(frames)} frames, recall 1.0 on {len(crack_frames)} crack "
           f"frames, precision {precision:.3f} reported)")

    def test_plan_and_follow_reaches_frame(self, reference_mission_fused):
        m, _, _ = reference_mission_fused
        crack_frames = [f for f in m.store.frames
                        if f.crack_truth_fraction >= CRACK_FRAME_FRACTION]
        target = max(crack_frames, key=lambda f: f.crack_truth_fraction)
        outcome = plan_revisit(
            m.store, target.frame_id, m.current_pose(), m.map_snapshot(),
            m.scene.bounds, BodyBox(), PlannerConfig(time_budget=2.0, seed=11),
            v_max=m.cfg["vehicle"]["v_max"],
            yaw_rate_max=m.cfg["vehicle"]["yaw_rate_max"])
        assert outcome.status == "planned"
        traj, _ = follow(m.vehicle_state, outcome.commands, m.truth_grid,
                         body=BodyBox(), tau=m.cfg["vehicle"]["tau"],
                         dwell_time_constants=m.cfg["vehicle"]["dwell_time_constants"])
        err = float(np.linalg.norm(traj[-1].position - target.pose.position))
        assert err < 0.2
        ok("revisit-plan-and-follow",
           f"(frame {target.frame_id}, final error {err:.3f} m)")

    def test_sealed_goal_no_feasible_plan(self, reference_mission_fused, tmp_path):
        m, _, _ = reference_mission_fused
        from inspecta.revisit import FrameStore
        bounds = Aabb(np.zeros(3), np.array([6.0, 6.0, 3.0]))
        blocked = np.zeros((60, 60, 30), dtype=bool)
        blocked[40:42, 40:, :] = True
        blocked[40:, 40:42, :] = True
        snap = MapSnapshot(0.1, np.zeros(3), blocked, bounds)
        store = FrameStore(tmp_path / "sealed")
        store.add(np.full((12, 16, 3), 120, dtype=np.uint8),
                  Pose([5.2, 5.2, 1.2], 0.0), 0.0, 0.0)
        outcome = plan_revisit(store, 0, Pose([1.0, 1.0, 1.2], 0.0), snap,
                               bounds, BodyBox(),
                               PlannerConfig(time_budget=0.5, seed=5))
        assert outcome.status == "no_feasible_plan"
        ok("revisit-sealed-goal", "(no_feasible_plan)")


class TestDeterminism:
    def test_equal_seed_missions_byte_identical(self, tmp_path, monkeypatch):
        monkeypatch.setenv("INSPECTA_SEED", "4242")

        def run(name):
            cfg = load_config()  # INSPECTA_SEED overrides the config seed
            assert cfg["seed"] == 4242
            m = Mission(cfg, tmp_path / name)
            m.run_mapping()
            paths = m.export_artifacts()
            m.close()
            return paths

        p1, p2 = run("a"), run("b")
        index1 = (p1["frames"] / "index.jsonl").read_bytes()
        index2 = (p2["frames"] / "index.jsonl").read_bytes()
        map1 = p1["map"].read_bytes()
        map2 = p2["map"].read_bytes()
        log1 = p1["log"].read_bytes()
        log2 = p2["log"].read_bytes()
        assert index1 == index2
        assert map1 == map2
        assert log1 == log2
        ok("determinism",
           f"(index {len(index1)} B, map {len(map1)} B, log {len(log1)} B identical)")
