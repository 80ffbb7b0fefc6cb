"""Standstill detection, attitude estimation at rest, gravity compensation
and the zero-velocity measurement model used to initialize IMU biases.

Conventions: world z is up, world gravity is (0, 0, -g); body z is up and a
resting accelerometer reads +g on its up axis.  gravity_body is
R_world_to_body @ (0, 0, -g).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from radgrip.core import (ImuSample, InsufficientDataError, VehicleConfig,
                          VehicleState)


@dataclass
class AttitudeEstimate:
    rotation_world_to_body: np.ndarray
    gravity_body: np.ndarray


@dataclass(frozen=True)
class StandstillStatus:
    """stationary means both rest conditions have held for >= T_stop since
    `since`; `since` is the start of the current qualifying run."""

    stationary: bool
    since: float | None


INITIAL_STANDSTILL = StandstillStatus(False, None)


def update_standstill(status: StandstillStatus, speed_est: float | None,
                      accel_mag_comp: float, t: float,
                      cfg: VehicleConfig) -> StandstillStatus:
    """Advance the standstill detector by one sample.

    Both the speed and the gravity-compensated acceleration magnitude must
    stay under their thresholds continuously for T_stop; any violation (or
    a missing speed estimate) restarts the run at the current time.
    """
    th = cfg.thresholds
    ok = (speed_est is not None and speed_est < th.V_min
          and accel_mag_comp < th.A_min)
    if not ok:
        return StandstillStatus(False, t)
    since = status.since if status.since is not None else t
    return StandstillStatus(t - since >= th.T_stop, since)


def level_attitude(g: float) -> AttitudeEstimate:
    return AttitudeEstimate(np.eye(3), np.array([0.0, 0.0, -g]))


class _Madgwick:
    """Gradient-descent IMU orientation filter (accelerometer + gyro)."""

    def __init__(self, beta: float = 0.1):
        self.beta = beta
        self.q = np.array([1.0, 0.0, 0.0, 0.0])

    def update(self, gx, gy, gz, ax, ay, az, dt):
        q1, q2, q3, q4 = self.q
        norm = math.sqrt(ax * ax + ay * ay + az * az)
        if norm == 0.0:
            return
        ax, ay, az = ax / norm, ay / norm, az / norm

        _2q1, _2q2, _2q3, _2q4 = 2 * q1, 2 * q2, 2 * q3, 2 * q4
        _4q1, _4q2, _4q3 = 4 * q1, 4 * q2, 4 * q3
        _8q2, _8q3 = 8 * q2, 8 * q3
        q1q1, q2q2, q3q3, q4q4 = q1 * q1, q2 * q2, q3 * q3, q4 * q4

        s1 = _4q1 * q3q3 + _2q3 * ax + _4q1 * q2q2 - _2q2 * ay
        s2 = (_4q2 * q4q4 - _2q4 * ax + 4 * q1q1 * q2 - _2q1 * ay - _4q2
              + _8q2 * q2q2 + _8q2 * q3q3 + _4q2 * az)
        s3 = (4 * q1q1 * q3 + _2q1 * ax + _4q3 * q4q4 - _2q4 * ay - _4q3
              + _8q3 * q2q2 + _8q3 * q3q3 + _4q3 * az)
        s4 = 4 * q2q2 * q4 - _2q2 * ax + 4 * q3q3 * q4 - _2q3 * ay
        norm = math.sqrt(s1 * s1 + s2 * s2 + s3 * s3 + s4 * s4)
        if norm > 0.0:
            s1, s2, s3, s4 = s1 / norm, s2 / norm, s3 / norm, s4 / norm

        qd1 = 0.5 * (-q2 * gx - q3 * gy - q4 * gz) - self.beta * s1
        qd2 = 0.5 * (q1 * gx + q3 * gz - q4 * gy) - self.beta * s2
        qd3 = 0.5 * (q1 * gy - q2 * gz + q4 * gx) - self.beta * s3
        qd4 = 0.5 * (q1 * gz + q2 * gy - q3 * gx) - self.beta * s4

        q = self.q + np.array([qd1, qd2, qd3, qd4]) * dt
        self.q = q / np.linalg.norm(q)


def _quat_to_rotation(q: np.ndarray) -> np.ndarray:
    """Body-to-world rotation for the Madgwick quaternion (w, x, y, z)."""
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def estimate_attitude(imu_window: Sequence[ImuSample],
                      cfg: VehicleConfig) -> AttitudeEstimate:
    """Converged attitude from a standstill IMU window.

    Runs the orientation filter over the window repeatedly until the
    per-sweep quaternion change falls below 1e-8.  Samples missing 3-axis
    channels are completed with level-vehicle defaults (az = g, gx = gy = 0).
    Raises InsufficientDataError when the window does not span T_stop.
    """
    samples = list(imu_window)
    if len(samples) < 2:
        raise InsufficientDataError("attitude window is empty or too short")
    span = samples[-1].t - samples[0].t
    if span < cfg.thresholds.T_stop - 1e-6:
        raise InsufficientDataError(
            f"attitude window spans {span:.3f}s < T_stop="
            f"{cfg.thresholds.T_stop}s")
    filt = _Madgwick(beta=0.1)
    # seed from the mean accelerometer direction for fast convergence
    acc = np.array([[s.ax, s.ay, s.az if s.az is not None else cfg.g]
                    for s in samples])
    mean_up = acc.mean(axis=0)
    mean_up /= np.linalg.norm(mean_up)
    filt.q = _quat_from_up(mean_up)
    dts = np.diff([s.t for s in samples])
    for _ in range(200):
        q_before = filt.q.copy()
        for i in range(1, len(samples)):
            s = samples[i]
            filt.update(
                s.gx if s.gx is not None else 0.0,
                s.gy if s.gy is not None else 0.0,
                s.r,
                s.ax, s.ay, s.az if s.az is not None else cfg.g,
                max(float(dts[i - 1]), 1e-6),
            )
        if np.linalg.norm(filt.q - q_before) < 1e-8:
            break
    R_body_to_world = _quat_to_rotation(filt.q)
    R_wb = R_body_to_world.T
    gravity_body = R_wb @ np.array([0.0, 0.0, -cfg.g])
    return AttitudeEstimate(R_wb, gravity_body)


def _quat_from_up(up_body: np.ndarray) -> np.ndarray:
    """Quaternion whose body frame sees world-up along up_body."""
    z = np.array([0.0, 0.0, 1.0])
    v = np.cross(up_body, z)
    c = float(np.dot(up_body, z))
    if c < -0.999999:
        return np.array([0.0, 1.0, 0.0, 0.0])
    s = math.sqrt(2.0 * (1.0 + c))
    q = np.array([s / 2.0, v[0] / s, v[1] / s, v[2] / s])
    return q / np.linalg.norm(q)


def gravity_compensate(ax_meas: float, ay_meas: float,
                       att: AttitudeEstimate) -> tuple[float, float]:
    """Measured accelerations minus the body-frame gravity components."""
    return (ax_meas - att.gravity_body[0], ay_meas - att.gravity_body[1])


def zv_residual(x: VehicleState, ax_tilde: float, ay_tilde: float,
                r_meas: float, sigma_zv: np.ndarray) -> np.ndarray:
    """Whitened zero-velocity residual: velocities and yaw rate at zero,
    accel biases at the gravity-compensated readings, gyro bias at the raw
    yaw-rate sample."""
    raw = np.array([x.vx, x.vy, x.r,
                    x.bx - ax_tilde, x.by - ay_tilde, x.br - r_meas])
    return raw / np.sqrt(np.asarray(sigma_zv, dtype=float))


def accel_magnitude_deviation(ax: float, ay: float, az: float | None,
                              g: float) -> float:
    """|‖a‖ - g|: gravity-compensated acceleration magnitude used by the
    standstill detector (attitude-free; az defaults to a level vehicle)."""
    if az is None:
        az = g
    return abs(math.sqrt(ax * ax + ay * ay + az * az) - g)
