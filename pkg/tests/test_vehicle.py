import numpy as np
import pytest

from inspecta.geometry import Aabb
from inspecta.vehicle import (
    AbortedTrajectory,
    BodyBox,
    VehicleState,
    VelocityCommand,
    follow,
    step,
)
from inspecta.world import GroundTruthScene, SceneBox, build_grid


def hover(p=(0.0, 0.0, 1.0)):
    return VehicleState(np.asarray(p, float), np.zeros(3), 0.0, 0.0, 0.0)


def empty_world():
    bounds = Aabb(np.array([-10.0, -10.0, 0.0]), np.array([10.0, 10.0, 5.0]))
    return build_grid(GroundTruthScene([], [], bounds, 0), 0.1)


def walled_world():
    bounds = Aabb(np.array([-10.0, -10.0, 0.0]), np.array([10.0, 10.0, 5.0]))
    wall = SceneBox([5.0, 0.0, 2.5], [0.5, 10.0, 2.5], "brick")
    return build_grid(GroundTruthScene([wall], [], bounds, 0), 0.1)


class TestStep:
    def test_instantaneous_tracking_advances_exactly(self):
        s = hover()
        cmd = VelocityCommand([1.0, 0.0, 0.0], 0.0, 1.0)
        for _ in range(50):
            s = step(s, cmd, 0.02, tau=0.0)
        assert s.position[0] == pytest.approx(1.0, abs=1e-12)
        assert s.timestamp == pytest.approx(1.0, abs=1e-12)

    def test_zero_command_only_advances_time(self):
        s = hover()
        s2 = step(s, VelocityCommand(np.zeros(3), 0.0, 1.0), 0.02, tau=0.5)
        np.testing.assert_array_equal(s2.position, s.position)
        np.testing.assert_array_equal(s2.velocity, s.velocity)
        assert s2.yaw == s.yaw
        assert s2.timestamp == pytest.approx(0.02)

    def test_first_order_step_response_matches_closed_form(self):
        # oracle: v(t) = 1 - exp(-t / tau) for a unit velocity command
        tau = 0.5
        s = hover()
        cmd = VelocityCommand([1.0, 0.0, 0.0], 0.0, 1.0)
        t = 0.0
        while t < 1.0 - 1e-9:
            s = step(s, cmd, 0.001, tau=tau)
            t += 0.001
            expected = 1.0 - np.exp(-t / tau)
            assert abs(s.velocity[0] - expected) <= 0.01 * max(expected, 1e-6)

    def test_dt_bounds_enforced(self):
        s = hover()
        cmd = VelocityCommand([1.0, 0.0, 0.0], 0.0, 1.0)
        with pytest.raises(ValueError):
            step(s, cmd, 0.05, tau=0.0)
        with pytest.raises(ValueError):
            step(s, cmd, 0.0, tau=0.0)
        with pytest.raises(ValueError):
            step(s, cmd, 0.01, tau=-1.0)

    def test_speed_never_exceeds_envelope(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            v0 = rng.normal(0, 0.4, 3)
            vc = rng.normal(0, 0.4, 3)
            s = VehicleState(np.zeros(3), v0, 0.0, 0.0, 0.0)
            cmd = VelocityCommand(vc, 0.0, 1.0)
            envelope = max(np.linalg.norm(v0), np.linalg.norm(vc)) + 1e-12
            for _ in range(100):
                s = step(s, cmd, 0.01, tau=0.3)
                assert np.linalg.norm(s.velocity) <= envelope

    def test_timestep_convergence(self):
        # exact integrator: halving dt moves the 1 s endpoint by O(dt) at most
        def endpoint(dt):
            s = hover()
            cmd = VelocityCommand([0.5, -0.2, 0.1], 0.3, 1.0)
            n = int(round(1.0 / dt))
            for _ in range(n):
                s = step(s, cmd, dt, tau=0.3)
            return s.position
        d = np.linalg.norm(endpoint(0.02) - endpoint(0.01))
        assert d <= 0.02  # O(dt) bound; exact solution gives ~1e-15

    def test_yaw_wraps(self):
        s = VehicleState(np.zeros(3), np.zeros(3), 3.1, 0.0, 0.0)
        s = step(s, VelocityCommand(np.zeros(3), 5.0, 1.0), 0.02, tau=0.0)
        assert -np.pi < s.yaw <= np.pi


class TestFollow:
    def test_single_segment_exact_with_zero_tau(self):
        cmds = [VelocityCommand([0.5, 0.0, 0.0], 0.0, 2.0)]
        traj, err = follow(hover((0, 0, 1)), cmds, empty_world(), tau=0.0)
        assert err < 1e-9
        assert traj[-1].position[0] == pytest.approx(1.0, abs=1e-9)

    def test_lagged_following_settles_with_dwell(self):
        cmds = [
            VelocityCommand([0.5, 0.0, 0.0], 0.0, 2.0),
            VelocityCommand([0.0, 0.5, 0.0], 0.0, 2.0),
        ]
        traj, err = follow(hover((0, 0, 1)), cmds, empty_world(), tau=0.3)
        assert err < 0.05

    def test_collision_aborts(self):
        cmds = [VelocityCommand([0.5, 0.0, 0.0], 0.0, 20.0)]
        with pytest.raises(AbortedTrajectory) as exc:
            follow(hover((0, 0, 1)), cmds, walled_world(), tau=0.0)
        # wall face at x = 4.5, body half extent 0.45
        assert exc.value.position[0] < 5.0
        assert len(exc.value.trajectory) > 1

    def test_closed_loop_returns_to_start(self):
        cmds = [
            VelocityCommand([0.5, 0.0, 0.0], 0.0, 1.0),
            VelocityCommand([0.0, 0.5, 0.0], 0.0, 1.0),
            VelocityCommand([-0.5, 0.0, 0.0], 0.0, 1.0),
            VelocityCommand([0.0, -0.5, 0.0], 0.0, 1.0),
        ]
        traj, err = follow(hover((0, 0, 1)), cmds, empty_world(), tau=0.0)
        assert np.linalg.norm(traj[-1].position - np.array([0, 0, 1.0])) < 1e-6


class TestBodyBox:
    def test_rotated_aabb_is_conservative(self):
        body = BodyBox()
        lo, hi = body.world_aabb(np.zeros(3), np.pi / 4)
        assert hi[0] == pytest.approx(0.45 * np.sqrt(2), abs=1e-12)
        lo0, hi0 = body.world_aabb(np.zeros(3), 0.0)
        assert hi0[0] == pytest.approx(0.45)

    def test_positive_extents_required(self):
        with pytest.raises(ValueError):
            BodyBox((0.4, 0.0, 0.1))
