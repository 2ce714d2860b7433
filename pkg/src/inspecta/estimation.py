"""Visual-odometry emulation and the 50 Hz visual-inertial EKF.

The filter carries a 15-dimensional state:

    [0:3]   position (world, m)
    [3:6]   orientation roll, pitch, yaw (rad)
    [6:9]   linear velocity (body, m/s)
    [9:12]  angular velocity (body, rad/s)
    [12:15] linear acceleration (body, m/s^2)

following the generalized kinematic EKF convention of common robot
localization stacks: velocities and accelerations live in the body frame
and the position propagates through the body-to-world rotation. The
measurement maps are linear selectors, so all nonlinearity sits in the
propagation step.

Which state variables each sensor feeds is a reasoned reconstruction (the
source system does not publish its per-sensor configuration): VO supplies
world position and yaw; the IMU supplies body angular velocity, body linear
acceleration (specific force with gravity removed) and a roll/pitch
pseudo-measurement from the gravity direction; the altimeter supplies
height. Yaw is deliberately not derived from the accelerometer - gravity
carries no information about it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose, rot_rpy, wrap_angle

N_STATES = 15
GRAVITY_W = np.array([0.0, 0.0, -9.81])

P_SLICE = slice(0, 3)
RPY_SLICE = slice(3, 6)
V_SLICE = slice(6, 9)
W_SLICE = slice(9, 12)
A_SLICE = slice(12, 15)

ANGLE_STATES = (3, 4, 5)

MEASUREMENT_MAPS = {
    "vo_pose": (0, 1, 2, 5),
    "imu": (9, 10, 11, 12, 13, 14, 3, 4),
    "imu_inertial": (9, 10, 11, 12, 13, 14),
    "alt": (2,),
}

# process noise density per second, one entry per state
DEFAULT_Q_DIAG = np.array(
    [1e-5] * 3          # position
    + [1e-6, 1e-6, 1e-7]  # roll, pitch, yaw (yaw is gyro-driven, keep stiff)
    + [1e-3] * 3        # linear velocity
    + [1e-3] * 3        # angular velocity
    + [5e-2] * 3        # linear acceleration
)


class NumericFailure(RuntimeError):
    """Raised when the filter state stops being finite."""


@dataclass(frozen=True)
class EkfState:
    mean: np.ndarray        # (15,)
    covariance: np.ndarray  # (15, 15)
    timestamp: float

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "covariance",
                           np.asarray(self.covariance, dtype=float))
        if self.mean.shape != (N_STATES,) or self.covariance.shape != (N_STATES, N_STATES):
            raise ValueError("EkfState expects a 15-state mean and 15x15 covariance")

    @property
    def position(self) -> np.ndarray:
        return self.mean[P_SLICE]

    @property
    def yaw(self) -> float:
        return float(self.mean[5])

    def pose(self) -> Pose:
        return Pose(self.position.copy(), self.yaw)


def initial_state(position, yaw: float, timestamp: float = 0.0,
                  p0: float = 1e-6) -> EkfState:
    mean = np.zeros(N_STATES)
    mean[P_SLICE] = np.asarray(position, dtype=float)
    mean[5] = wrap_angle(yaw)
    return EkfState(mean, np.eye(N_STATES) * p0, timestamp)


@dataclass(frozen=True)
class OdomEstimate:
    position: np.ndarray
    yaw: float
    covariance: np.ndarray  # 4x4 over (x, y, z, yaw)
    timestamp: float
    source: str             # "VO" | "FUSED"

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "yaw", float(wrap_angle(self.yaw)))
        object.__setattr__(self, "covariance",
                           np.asarray(self.covariance, dtype=float))


@dataclass(frozen=True)
class DriftModel:
    pos_walk_std: float = 0.003   # m / sqrt(s), per axis
    yaw_walk_std: float = 0.03    # rad / sqrt(s)
    pos_noise_std: float = 0.01   # m
    yaw_noise_std: float = 0.02   # rad
    rate: float = 20.0            # Hz

    def __post_init__(self):
        if min(self.pos_walk_std, self.yaw_walk_std,
               self.pos_noise_std, self.yaw_noise_std) < 0:
            raise ValueError("drift model stds must be >= 0")


class VoEmulator:
    """Random-walk-plus-noise stand-in for feature-based visual odometry.

    The walk state persists across calls, emulating unbounded VO drift;
    loop-closure correction is intentionally absent.
    """

    def __init__(self, drift: DriftModel, rng):
        self.drift = drift
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.pos_walk = np.zeros(3)
        self.yaw_walk = 0.0
        self._last_t = None

    def emit(self, true_position, true_yaw: float, timestamp: float) -> OdomEstimate:
        dt = 1.0 / self.drift.rate if self._last_t is None else max(0.0, timestamp - self._last_t)
        self._last_t = timestamp
        sq = math.sqrt(dt)
        if self.drift.pos_walk_std > 0:
            self.pos_walk = self.pos_walk + self.rng.normal(0.0, self.drift.pos_walk_std * sq, 3)
        if self.drift.yaw_walk_std > 0:
            self.yaw_walk += self.rng.normal(0.0, self.drift.yaw_walk_std * sq)
        pos_noise = self.rng.normal(0.0, self.drift.pos_noise_std, 3) \
            if self.drift.pos_noise_std > 0 else np.zeros(3)
        yaw_noise = self.rng.normal(0.0, self.drift.yaw_noise_std) \
            if self.drift.yaw_noise_std > 0 else 0.0
        cov = np.diag([self.drift.pos_noise_std ** 2] * 3 + [self.drift.yaw_noise_std ** 2])
        return OdomEstimate(
            position=np.asarray(true_position, dtype=float) + self.pos_walk + pos_noise,
            yaw=wrap_angle(true_yaw + self.yaw_walk + yaw_noise),
            covariance=cov, timestamp=timestamp, source="VO")


def vo_emulate(true_pose: Pose, drift: DriftModel, emulator: VoEmulator,
               timestamp: float) -> OdomEstimate:
    """Functional wrapper over VoEmulator for one-off calls."""
    assert emulator.drift is drift
    return emulator.emit(true_pose.position, true_pose.yaw, timestamp)


def _euler_rate_matrix(roll: float, pitch: float) -> np.ndarray:
    sr, cr = math.sin(roll), math.cos(roll)
    tp = math.tan(pitch)
    sec = 1.0 / math.cos(pitch)
    return np.array([
        [1.0, sr * tp, cr * tp],
        [0.0, cr, -sr],
        [0.0, sr * sec, cr * sec],
    ])


def _rotation_derivatives(roll: float, pitch: float, yaw: float):
    """dR/droll, dR/dpitch, dR/dyaw for R = Rz Ry Rx."""
    sr, cr = math.sin(roll), math.cos(roll)
    sp, cp = math.sin(pitch), math.cos(pitch)
    sy, cy = math.sin(yaw), math.cos(yaw)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    drx = np.array([[0, 0, 0], [0, -sr, -cr], [0, cr, -sr]])
    dry = np.array([[-sp, 0, cp], [0, 0, 0], [-cp, 0, -sp]])
    drz = np.array([[-sy, -cy, 0], [cy, -sy, 0], [0, 0, 0]])
    return rz @ ry @ drx, rz @ dry @ rx, drz @ ry @ rx


def _euler_rate_derivatives(roll: float, pitch: float):
    """dT/droll and dT/dpitch of the Euler-rate matrix."""
    sr, cr = math.sin(roll), math.cos(roll)
    tp = math.tan(pitch)
    sec = 1.0 / math.cos(pitch)
    dt_droll = np.array([
        [0.0, cr * tp, -sr * tp],
        [0.0, -sr, -cr],
        [0.0, cr * sec, -sr * sec],
    ])
    dt_dpitch = np.array([
        [0.0, sr * sec * sec, cr * sec * sec],
        [0.0, 0.0, 0.0],
        [0.0, sr * sec * tp, cr * sec * tp],
    ])
    return dt_droll, dt_dpitch


def propagate_mean(mean: np.ndarray, dt: float) -> np.ndarray:
    """Nonlinear constant-acceleration kinematic model."""
    roll, pitch, yaw = mean[RPY_SLICE]
    r = rot_rpy(roll, pitch, yaw)
    t = _euler_rate_matrix(roll, pitch)
    v, w, a = mean[V_SLICE], mean[W_SLICE], mean[A_SLICE]
    out = mean.copy()
    out[P_SLICE] = mean[P_SLICE] + r @ (v * dt + 0.5 * a * dt * dt)
    out[RPY_SLICE] = wrap_angle(mean[RPY_SLICE] + t @ w * dt)
    out[V_SLICE] = v + a * dt
    return out


def propagation_jacobian(mean: np.ndarray, dt: float) -> np.ndarray:
    roll, pitch, yaw = mean[RPY_SLICE]
    r = rot_rpy(roll, pitch, yaw)
    t = _euler_rate_matrix(roll, pitch)
    dr = _rotation_derivatives(roll, pitch, yaw)
    dt_dr, dt_dp = _euler_rate_derivatives(roll, pitch)
    v, w, a = mean[V_SLICE], mean[W_SLICE], mean[A_SLICE]
    u = v * dt + 0.5 * a * dt * dt

    f = np.eye(N_STATES)
    for k in range(3):
        f[0:3, 3 + k] = dr[k] @ u
    f[0:3, 6:9] = r * dt
    f[0:3, 12:15] = r * (0.5 * dt * dt)
    f[3:6, 3] += dt_dr @ w * dt
    f[3:6, 4] += dt_dp @ w * dt
    f[3:6, 9:12] = t * dt
    f[6:9, 12:15] = np.eye(3) * dt
    return f


def ekf_predict(state: EkfState, dt: float,
                q_diag: np.ndarray = DEFAULT_Q_DIAG) -> EkfState:
    """Propagate mean and covariance: P <- F P F^T + Q dt."""
    if not 0.0 < dt <= 0.1:
        raise ValueError("predict dt must lie in (0, 0.1]")
    if not np.all(np.isfinite(state.mean)):
        raise NumericFailure("non-finite state mean")
    mean = propagate_mean(state.mean, dt)
    f = propagation_jacobian(state.mean, dt)
    cov = f @ state.covariance @ f.T + np.diag(q_diag) * dt
    cov = 0.5 * (cov + cov.T)
    return EkfState(mean, cov, state.timestamp + dt)


def _resolve_map(h):
    if isinstance(h, str):
        try:
            idx = MEASUREMENT_MAPS[h]
        except KeyError:
            raise ValueError(f"unknown measurement map {h!r}") from None
    else:
        idx = tuple(int(i) for i in h)
    angle_mask = np.array([i in ANGLE_STATES for i in idx])
    return np.array(idx, dtype=np.int64), angle_mask


def ekf_update(state: EkfState, z, h, r_cov):
    """Joseph-form EKF update; angle residuals are wrapped.

    h names a measurement map (see MEASUREMENT_MAPS) or is an explicit
    sequence of state indices. Returns (state, innovation); a singular
    innovation covariance skips the update and returns innovation None.
    """
    idx, angle_mask = _resolve_map(h)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    r_cov = np.atleast_2d(np.asarray(r_cov, dtype=float))
    if z.shape[0] != idx.shape[0] or r_cov.shape != (len(idx), len(idx)):
        raise ValueError("measurement/none covariance shape mismatch")
    if not np.all(np.isfinite(state.mean)):
        raise NumericFailure("non-finite state mean")

    p = state.covariance
    innovation = z - state.mean[idx]
    innovation[angle_mask] = wrap_angle(innovation[angle_mask])

    ph_t = p[:, idx]                      # P H^T for a selector H
    s = ph_t[idx, :] + r_cov              # H P H^T + R
    try:
        if np.linalg.cond(s) > 1e12:
            return state, None
        k = np.linalg.solve(s.T, ph_t.T).T   # K = P H^T S^-1
    except np.linalg.LinAlgError:
        return state, None

    mean = state.mean + k @ innovation
    mean[RPY_SLICE] = wrap_angle(mean[RPY_SLICE])

    i_kh = np.eye(N_STATES)
    i_kh[:, idx] -= k
    cov = i_kh @ p @ i_kh.T + k @ r_cov @ k.T
    cov = 0.5 * (cov + cov.T)
    return EkfState(mean, cov, state.timestamp), innovation


@dataclass(frozen=True)
class FusionConfig:
    rate: float = 50.0
    q_diag: np.ndarray = field(default_factory=lambda: DEFAULT_Q_DIAG.copy())
    r_vo_pos: float = 0.012
    r_vo_yaw: float = 0.5      # deliberately loose: yaw leans on the gyro
    r_gyro: float = 0.002
    r_accel: float = 0.1
    r_rollpitch: float = 0.05
    r_alt: float = 0.02
    # skip the gravity-direction roll/pitch pseudo-measurement while the
    # horizontal specific force says the vehicle is accelerating
    rollpitch_gate: float = 0.5
    stale_gap: float = 1.0
    max_delay_ticks: int = 2


@dataclass
class FusionResult:
    estimates: list
    final_state: EkfState
    warnings: list
    dropped_measurements: int
    skipped_updates: int


def _imu_measurement(sample, state: EkfState, cfg: FusionConfig):
    """Build the stacked IMU measurement (w, a, [roll, pitch])."""
    f = np.asarray(sample.specific_force, dtype=float)
    w = np.asarray(sample.angular_velocity, dtype=float)
    r_wb = rot_rpy(*state.mean[RPY_SLICE])
    a_body = f + r_wb.T @ GRAVITY_W
    horiz = math.hypot(f[0], f[1])
    if horiz <= cfg.rollpitch_gate:
        roll = math.atan2(f[1], f[2])
        pitch = math.atan2(-f[0], math.hypot(f[1], f[2]))
        z = np.concatenate([w, a_body, [roll, pitch]])
        r = np.diag([cfg.r_gyro ** 2] * 3 + [cfg.r_accel ** 2] * 3
                    + [cfg.r_rollpitch ** 2] * 2)
        return z, "imu", r
    z = np.concatenate([w, a_body])
    r = np.diag([cfg.r_gyro ** 2] * 3 + [cfg.r_accel ** 2] * 3)
    return z, "imu_inertial", r


def run_fusion(vo_stream, imu_stream, alt_stream, initial: EkfState,
               cfg: FusionConfig | None = None) -> FusionResult:
    """Fuse timestamped sensor streams on the 50 Hz filter clock.

    One predict per tick; all measurements due by the tick are applied in
    timestamp order. Measurements older than max_delay_ticks ticks are
    dropped (counted), and any stream gap over stale_gap emits a warning.
    """
    cfg = cfg or FusionConfig()
    events = []
    for s in vo_stream:
        events.append((s.timestamp, 0, "vo", s))
    for s in imu_stream:
        events.append((s.timestamp, 1, "imu", s))
    for s in alt_stream:
        events.append((s.timestamp, 2, "alt", s))
    events.sort(key=lambda e: (e[0], e[1]))

    warnings = []
    for name, stream in (("vo", vo_stream), ("imu", imu_stream), ("alt", alt_stream)):
        ts = [s.timestamp for s in stream]
        for a, b in zip(ts[:-1], ts[1:]):
            if b - a > cfg.stale_gap:
                warnings.append(f"stale-data: {name} gap {b - a:.3f}s at t={a:.3f}")
                break

    dt = 1.0 / cfg.rate
    state = initial
    estimates = []
    dropped = 0
    skipped = 0
    ei = 0
    if not events:
        return FusionResult([], state, warnings, 0, 0)
    t_end = max(e[0] for e in events)
    tick = 0
    t0 = initial.timestamp
    while t0 + tick * dt < t_end - 1e-9:
        tick += 1
        t_now = t0 + tick * dt
        pending = []
        while ei < len(events) and events[ei][0] <= t_now + 1e-9:
            pending.append(events[ei])
            ei += 1
        pending.sort(key=lambda e: (e[0], e[1]))
        for t_meas, _, kind, payload in pending:
            if t_now - t_meas > cfg.max_delay_ticks * dt + 1e-9:
                dropped += 1
                continue
            # sub-step the predict to the measurement's own timestamp; late
            # arrivals within the delay window apply without re-linearizing
            dt_m = t_meas - state.timestamp
            if dt_m > 1e-9:
                state = ekf_predict(state, dt_m, cfg.q_diag)
            if kind == "vo":
                z = np.concatenate([payload.position, [payload.yaw]])
                r = np.diag([cfg.r_vo_pos ** 2] * 3 + [cfg.r_vo_yaw ** 2])
                state, innov = ekf_update(state, z, "vo_pose", r)
            elif kind == "imu":
                z, map_id, r = _imu_measurement(payload, state, cfg)
                state, innov = ekf_update(state, z, map_id, r)
            else:
                state, innov = ekf_update(state, [payload.range_to_ground], "alt",
                                          [[cfg.r_alt ** 2]])
            if innov is None:
                skipped += 1
        dt_rem = t_now - state.timestamp
        if dt_rem > 1e-9:
            state = ekf_predict(state, dt_rem, cfg.q_diag)
        cov4 = state.covariance[np.ix_([0, 1, 2, 5], [0, 1, 2, 5])]
        estimates.append(OdomEstimate(state.position.copy(), state.yaw,
                                      cov4, t_now, source="FUSED"))
    return FusionResult(estimates, state, warnings, dropped, skipped)


@dataclass(frozen=True)
class ErrorReport:
    max_dev_x: float
    max_dev_y: float
    max_dev_z: float
    max_dev_yaw: float
    n_matched: int

    def as_rows(self):
        return [
            {"axis": "x", "max_deviation": self.max_dev_x, "unit": "m"},
            {"axis": "y", "max_deviation": self.max_dev_y, "unit": "m"},
            {"axis": "z", "max_deviation": self.max_dev_z, "unit": "m"},
            {"axis": "yaw", "max_deviation": self.max_dev_yaw, "unit": "rad"},
        ]


def evaluate(estimates, truth_trace, match_tol: float = 0.02) -> ErrorReport:
    """Per-axis maximum absolute deviation against a ground-truth trace.

    truth_trace rows are (t, x, y, z, yaw). Each estimate is matched to the
    nearest truth sample within match_tol seconds; unmatched estimates are
    ignored.
    """
    truth = np.asarray([[t, p[0], p[1], p[2], y] for (t, p, y) in
                        ((row[0], row[1:4], row[4]) for row in np.atleast_2d(truth_trace))])
    if truth.size == 0 or not estimates:
        return ErrorReport(0.0, 0.0, 0.0, 0.0, 0)
    ts = truth[:, 0]
    max_dev = np.zeros(4)
    matched = 0
    for est in estimates:
        i = int(np.searchsorted(ts, est.timestamp))
        best, best_dt = None, match_tol + 1e-12
        for j in (i - 1, i):
            if 0 <= j < len(ts):
                d = abs(ts[j] - est.timestamp)
                if d < best_dt:
                    best, best_dt = j, d
        if best is None:
            continue
        matched += 1
        err = np.abs(est.position - truth[best, 1:4])
        yaw_err = abs(wrap_angle(est.yaw - truth[best, 4]))
        max_dev[:3] = np.maximum(max_dev[:3], err)
        max_dev[3] = max(max_dev[3], yaw_err)
    return ErrorReport(*max_dev.tolist(), matched)
