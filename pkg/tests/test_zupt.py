import math

import numpy as np
import pytest

from radgrip.core import ImuSample, InsufficientDataError, VehicleState, \
    default_config
from radgrip.zupt import (AttitudeEstimate, INITIAL_STANDSTILL,
                          StandstillStatus, accel_magnitude_deviation,
                          estimate_attitude, gravity_compensate,
                          level_attitude, update_standstill, zv_residual)

CFG = default_config()
G = CFG.g


def _feed(status, speed, accel, t0, t1, rate=200.0):
    t = t0
    while t <= t1 + 1e-9:
        status = update_standstill(status, speed, accel, t, CFG)
        t += 1.0 / rate
    return status


def test_standstill_after_sustained_quiet():
    status = _feed(INITIAL_STANDSTILL, 0.1, 0.05, 0.0, 1.2)
    assert status.stationary


def test_speed_violation_resets():
    status = _feed(INITIAL_STANDSTILL, 0.1, 0.05, 0.0, 2.0)
    assert status.stationary
    status = update_standstill(status, 0.6, 0.05, 2.005, CFG)
    assert not status.stationary
    assert status.since == 2.005


def test_duration_not_met():
    status = _feed(INITIAL_STANDSTILL, 0.1, 0.05, 0.0, 0.5)
    assert not status.stationary


def test_detector_deterministic():
    a = _feed(INITIAL_STANDSTILL, 0.2, 0.1, 0.0, 1.5)
    b = _feed(INITIAL_STANDSTILL, 0.2, 0.1, 0.0, 1.5)
    assert a == b


def test_missing_speed_resets():
    status = update_standstill(INITIAL_STANDSTILL, None, 0.0, 1.0, CFG)
    assert not status.stationary and status.since == 1.0


def _imu_window(accel, gyro=(0.0, 0.0, 0.0), duration=1.2, rate=200.0,
                noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    n = int(duration * rate) + 1
    for k in range(n):
        na = rng.normal(0, noise, 3) if noise else np.zeros(3)
        out.append(ImuSample(
            t=k / rate, ax=accel[0] + na[0], ay=accel[1] + na[1],
            r=gyro[2], az=accel[2] + na[2], gx=gyro[0], gy=gyro[1]))
    return out


def test_attitude_level_vehicle():
    att = estimate_attitude(_imu_window((0.0, 0.0, G), noise=0.01), CFG)
    assert att.gravity_body[0] == pytest.approx(0.0, abs=2e-3)
    assert att.gravity_body[1] == pytest.approx(0.0, abs=2e-3)
    assert att.gravity_body[2] == pytest.approx(-G, abs=2e-3)
    R = att.rotation_world_to_body
    assert np.abs(R @ R.T - np.eye(3)).max() < 1e-9


def test_attitude_pitched_five_degrees():
    # physical accelerometer readings for a 5 deg nose-down vehicle at rest
    p = math.radians(5.0)
    accel = (-G * math.sin(p), 0.0, G * math.cos(p))
    att = estimate_attitude(_imu_window(accel), CFG)
    assert att.gravity_body[0] == pytest.approx(0.8549978, abs=2e-4)
    assert np.linalg.norm(att.gravity_body) == pytest.approx(G, rel=0.01)


def test_attitude_empty_window():
    with pytest.raises(InsufficientDataError):
        estimate_attitude([], CFG)


def test_attitude_short_window():
    with pytest.raises(InsufficientDataError):
        estimate_attitude(_imu_window((0, 0, G), duration=0.5), CFG)


def test_gravity_compensate_level():
    ax_t, ay_t = gravity_compensate(0.05, -0.02, level_attitude(G))
    assert ax_t == pytest.approx(0.05)
    assert ay_t == pytest.approx(-0.02)


def test_gravity_compensate_subtraction():
    att = AttitudeEstimate(np.eye(3), np.array([0.855, -0.3, -G]))
    ax_t, ay_t = gravity_compensate(0.9, -0.25, att)
    assert ax_t == pytest.approx(0.045)
    assert ay_t == pytest.approx(0.05)


def test_gravity_compensate_linear():
    att = AttitudeEstimate(np.eye(3), np.array([0.2, 0.1, -G]))
    a1 = gravity_compensate(0.3, 0.4, att)
    a2 = gravity_compensate(0.3 + 1.5, 0.4 - 0.7, att)
    assert a2[0] - a1[0] == pytest.approx(1.5)
    assert a2[1] - a1[1] == pytest.approx(-0.7)


def test_zv_residual_exact_fit():
    x = VehicleState(0.0, 0.0, 0.0, 0.0, 0.05, -0.02, 0.003)
    res = zv_residual(x, 0.05, -0.02, 0.003, np.ones(6))
    assert np.allclose(res, 0.0)


def test_zv_residual_bias_component():
    x = VehicleState(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    res = zv_residual(x, 0.05, 0.0, 0.0, np.ones(6))
    assert res[3] == pytest.approx(-0.05)


def test_zv_residual_velocity_component():
    x = VehicleState(0.0, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0)
    res = zv_residual(x, 0.0, 0.0, 0.0, np.ones(6))
    assert res[0] == pytest.approx(0.2)


def test_accel_magnitude_deviation():
    assert accel_magnitude_deviation(0.0, 0.0, G, G) == 0.0
    assert accel_magnitude_deviation(0.0, 0.0, None, G) == 0.0
    assert accel_magnitude_deviation(3.0, 4.0, G, G) > 1.0
