"""Sensor simulation and the per-vehicle error-state EKF.

The filter carries a 15-dimensional error state
    [dpos, dvel, dtheta (world-side attitude), accel bias, gyro bias]
around a nominal (position, velocity, quaternion, biases) strapdown state.
IMU samples drive the predict step; GPS / barometer / magnetometer arrive as
gated measurement updates. Pitot airspeed and the bias-corrected body rates
are filtered outside the error state (controllers read them, the EKF does
not observe them).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from .quat import (
    quat_from_axis_angle,
    quat_integrate,
    quat_multiply,
    quat_normalize,
    quat_rotate_inverse,
    quat_to_matrix,
)

MAG_NORTH = np.array([0.0, 1.0, 0.0])  # magnetic north == true north (flat ENU world)

# innovation gates at chi-square 0.999 per measurement dimension
_GATE = {1: chi2.ppf(0.999, 1), 2: chi2.ppf(0.999, 2), 3: chi2.ppf(0.999, 3)}


@dataclass
class SensorConfig:
    """Per-sample noise std-devs and channel rates (Hz)."""

    imu_rate: int = 500
    gps_rate: int = 5
    baro_rate: int = 25
    mag_rate: int = 25
    pitot_rate: int = 25

    accel_std: float = 0.05
    gyro_std: float = 0.002
    accel_bias_init_std: float = 0.02
    gyro_bias_init_std: float = 0.003
    accel_bias_walk: float = 2e-5  # per IMU sample
    gyro_bias_walk: float = 2e-6

    gps_pos_std: float = 0.8
    gps_vel_std: float = 0.15
    baro_std: float = 0.35
    mag_std: float = 0.02
    pitot_std: float = 0.25


@dataclass
class SensorFrame:
    """Channels emitted at one tick; absent channels are None."""

    time: float
    imu: tuple[np.ndarray, np.ndarray] | None = None  # (specific force, body rates)
    gps: tuple[np.ndarray, np.ndarray] | None = None  # (position, velocity)
    baro_alt: float | None = None
    mag: np.ndarray | None = None
    pitot_airspeed: float | None = None


class SensorSuite:
    """Simulates the avionics sensors of one vehicle from ground truth."""

    def __init__(self, cfg: SensorConfig, rng: np.random.Generator, base_rate: int = 500):
        self.cfg = cfg
        self.rng = rng
        self.base_rate = base_rate
        self.div_imu = base_rate // cfg.imu_rate
        self.div_gps = base_rate // cfg.gps_rate
        self.div_baro = base_rate // cfg.baro_rate
        self.div_mag = base_rate // cfg.mag_rate
        self.div_pitot = base_rate // cfg.pitot_rate
        self.accel_bias = rng.normal(0.0, cfg.accel_bias_init_std, 3)
        self.gyro_bias = rng.normal(0.0, cfg.gyro_bias_init_std, 3)

    def sample(self, tick: int, truth, specific_force_body, wind, time: float) -> SensorFrame:
        cfg, rng = self.cfg, self.rng
        frame = SensorFrame(time=time)
        if tick % self.div_imu == 0:
            self.accel_bias += rng.normal(0.0, cfg.accel_bias_walk, 3)
            self.gyro_bias += rng.normal(0.0, cfg.gyro_bias_walk, 3)
            accel = specific_force_body + self.accel_bias + rng.normal(0.0, cfg.accel_std, 3)
            gyro = truth.body_rates + self.gyro_bias + rng.normal(0.0, cfg.gyro_std, 3)
            frame.imu = (accel, gyro)
        if tick % self.div_gps == 0:
            frame.gps = (
                truth.position + rng.normal(0.0, cfg.gps_pos_std, 3),
                truth.velocity + rng.normal(0.0, cfg.gps_vel_std, 3),
            )
        if tick % self.div_baro == 0:
            frame.baro_alt = truth.position[2] + rng.normal(0.0, cfg.baro_std)
        if tick % self.div_mag == 0:
            frame.mag = quat_rotate_inverse(truth.attitude, MAG_NORTH) + rng.normal(
                0.0, cfg.mag_std, 3
            )
        if tick % self.div_pitot == 0:
            u = quat_rotate_inverse(truth.attitude, truth.velocity - wind)
            frame.pitot_airspeed = max(0.0, u[0]) + rng.normal(0.0, cfg.pitot_std)
        return frame


@dataclass
class NavEstimate:
    position: np.ndarray
    velocity: np.ndarray
    attitude: np.ndarray
    accel_bias: np.ndarray
    gyro_bias: np.ndarray
    covariance: np.ndarray  # 15x15 error-state
    airspeed: float
    body_rates: np.ndarray  # bias-corrected, low-passed gyro
    stamp: float


class Ekf:
    """Error-state EKF; one instance per vehicle."""

    REJECT_NONE = 0

    def __init__(
        self,
        cfg: SensorConfig,
        init_position,
        init_velocity,
        init_attitude,
        init_pos_std: float = 1.0,
        init_vel_std: float = 0.3,
        init_att_std: float = 0.05,
        cov_decimation: int = 5,
    ):
        self.cfg = cfg
        self.p = np.asarray(init_position, dtype=float).copy()
        self.v = np.asarray(init_velocity, dtype=float).copy()
        self.q = quat_normalize(np.asarray(init_attitude, dtype=float).copy())
        self.ba = np.zeros(3)
        self.bg = np.zeros(3)
        self.P = np.diag(
            [init_pos_std**2] * 3
            + [init_vel_std**2] * 3
            + [init_att_std**2] * 3
            + [cfg.accel_bias_init_std**2] * 3
            + [cfg.gyro_bias_init_std**2] * 3
        )
        self.airspeed = 0.0
        self.body_rates = np.zeros(3)
        self.stamp = 0.0
        self.reject_count = 0
        self.reset_count = 0
        self.cov_decimation = max(1, cov_decimation)
        self._cov_dt_accum = 0.0
        self._imu_count = 0
        self._gravity = np.array([0.0, 0.0, -9.81])

    # -- predict ------------------------------------------------------------

    def predict(self, accel: np.ndarray, gyro: np.ndarray, dt: float, time: float):
        if dt == 0.0:
            return
        f = accel - self.ba
        w = gyro - self.bg
        R = quat_to_matrix(self.q)
        a_world = R @ f + self._gravity
        self.v = self.v + dt * a_world
        self.p = self.p + dt * self.v
        self.q = quat_integrate(self.q, w, dt)
        self.body_rates = self.body_rates + 0.04 * (w - self.body_rates)
        self.stamp = time

        self._cov_dt_accum += dt
        self._imu_count += 1
        if self._imu_count % self.cov_decimation == 0:
            self._propagate_covariance(R, f, self._cov_dt_accum)
            self._cov_dt_accum = 0.0

    def _propagate_covariance(self, R: np.ndarray, f: np.ndarray, dt: float):
        cfg = self.cfg
        F = np.eye(15)
        F[0:3, 3:6] = dt * np.eye(3)
        Rf = R @ f
        F[3:6, 6:9] = -dt * _skew(Rf)
        F[3:6, 9:12] = -dt * R
        F[6:9, 12:15] = -dt * R
        P = F @ self.P @ F.T
        # per-sample noise applied over the aggregated interval
        n = dt * cfg.imu_rate  # samples folded into this propagation
        qv = (dt / max(1.0, n) * cfg.accel_std) ** 2 * n
        qt = (dt / max(1.0, n) * cfg.gyro_std) ** 2 * n
        qba = cfg.accel_bias_walk**2 * n
        qbg = cfg.gyro_bias_walk**2 * n
        d = np.concatenate([np.zeros(3), [qv] * 3, [qt] * 3, [qba] * 3, [qbg] * 3])
        P[np.arange(15), np.arange(15)] += d
        self.P = 0.5 * (P + P.T)

    # -- updates ------------------------------------------------------------

    def _apply(self, H: np.ndarray, z_err: np.ndarray, R_meas: np.ndarray) -> bool:
        # tiny floor keeps S invertible when configured noise is zero
        S = H @ self.P @ H.T + R_meas + 1e-9 * np.eye(len(z_err))
        try:
            Sinv = np.linalg.inv(S)
        except np.linalg.LinAlgError:
            return False
        d2 = float(z_err @ Sinv @ z_err)
        if d2 > _GATE[len(z_err)]:
            self.reject_count += 1
            return False
        K = self.P @ H.T @ Sinv
        dx = K @ z_err
        IKH = np.eye(15) - K @ H
        P = IKH @ self.P @ IKH.T + K @ R_meas @ K.T
        self.P = 0.5 * (P + P.T)
        self._inject(dx)
        self._check_spd()
        return True

    def _inject(self, dx: np.ndarray):
        self.p += dx[0:3]
        self.v += dx[3:6]
        dq = quat_from_axis_angle(dx[6:9], float(np.linalg.norm(dx[6:9])))
        self.q = quat_normalize(quat_multiply(dq, self.q))
        self.ba += dx[9:12]
        self.bg += dx[12:15]

    def _check_spd(self):
        try:
            np.linalg.cholesky(self.P + 1e-12 * np.eye(15))
        except np.linalg.LinAlgError:
            self.reset_count += 1
            self.P = np.diag([4.0] * 3 + [1.0] * 3 + [0.1] * 3 + [1e-3] * 6)

    def update_gps(self, pos: np.ndarray, vel: np.ndarray):
        H = np.zeros((3, 15))
        H[:, 0:3] = np.eye(3)
        self._apply(H, pos - self.p, np.eye(3) * self.cfg.gps_pos_std**2)
        Hv = np.zeros((3, 15))
        Hv[:, 3:6] = np.eye(3)
        self._apply(Hv, vel - self.v, np.eye(3) * self.cfg.gps_vel_std**2)

    def update_baro(self, alt: float):
        H = np.zeros((1, 15))
        H[0, 2] = 1.0
        self._apply(H, np.array([alt - self.p[2]]), np.array([[self.cfg.baro_std**2]]))

    def update_mag(self, mag: np.ndarray):
        R = quat_to_matrix(self.q)
        h = R.T @ MAG_NORTH
        H = np.zeros((3, 15))
        H[:, 6:9] = R.T @ _skew(MAG_NORTH)
        self._apply(H, mag - h, np.eye(3) * self.cfg.mag_std**2)

    def update_pitot(self, airspeed: float):
        # low-pass only; airspeed is not an error-state observable
        self.airspeed += 0.3 * (airspeed - self.airspeed)

    def ingest(self, frame: SensorFrame, dt: float):
        """Apply one sensor frame (predict on IMU, then channel updates)."""
        if frame.imu is not None:
            self.predict(frame.imu[0], frame.imu[1], dt, frame.time)
        if frame.gps is not None:
            self.update_gps(frame.gps[0], frame.gps[1])
        if frame.baro_alt is not None:
            self.update_baro(frame.baro_alt)
        if frame.mag is not None:
            self.update_mag(frame.mag)
        if frame.pitot_airspeed is not None:
            self.update_pitot(frame.pitot_airspeed)

    def estimate(self) -> NavEstimate:
        return NavEstimate(
            position=self.p.copy(),
            velocity=self.v.copy(),
            attitude=self.q.copy(),
            accel_bias=self.ba.copy(),
            gyro_bias=self.bg.copy(),
            covariance=self.P.copy(),
            airspeed=self.airspeed,
            body_rates=self.body_rates.copy(),
            stamp=self.stamp,
        )


def _skew(v) -> np.ndarray:
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )
