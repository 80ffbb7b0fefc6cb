import math

import numpy as np
import pytest

from radgrip.core import (InputSample, NumericError, VehicleState,
                          WindowOrderError)
from radgrip.motion import (process_residual, state_transition,
                            transition_jacobian)


def _x(vx=0.0, vy=0.0, r=0.0, bx=0.0, by=0.0, br=0.0, t=0.0):
    return VehicleState(t, vx, vy, r, bx, by, br)


def _u(ax=0.0, ay=0.0, r=0.0, delta=0.0, t=0.0):
    return InputSample(t, ax, ay, r, delta)


def test_zero_input_fixed_point():
    for dt in (0.001, 0.01, 0.1):
        nxt = state_transition(_x(), _u(), dt)
        assert nxt.as_array().tolist() == [0.0] * 6
        assert nxt.t == pytest.approx(dt)


def test_euler_step_longitudinal():
    nxt = state_transition(_x(vx=10.0), _u(ax=2.0), 0.01)
    assert nxt.vx == pytest.approx(10.02)
    assert nxt.vy == 0.0


def test_euler_step_coriolis():
    nxt = state_transition(_x(vx=10.0, r=1.0), _u(r=1.0), 0.01)
    assert nxt.vx == pytest.approx(10.0)
    assert nxt.vy == pytest.approx(-0.1)
    assert nxt.r == pytest.approx(1.0)


def test_yaw_rate_is_algebraic_from_previous_gyro():
    nxt = state_transition(_x(r=0.5, br=0.02), _u(r=0.3), 0.01)
    assert nxt.r == pytest.approx(0.3 - 0.02)


def test_bias_transparency():
    rng = np.random.default_rng(5)
    for _ in range(50):
        x = _x(*rng.normal(0, 1, 6))
        u = _u(*rng.normal(0, 1, 3))
        c = rng.normal(0, 1, 3)
        x_shift = VehicleState(x.t, x.vx, x.vy, x.r,
                               x.bx + c[0], x.by + c[1], x.br + c[2])
        u_shift = InputSample(u.t, u.ax_meas + c[0], u.ay_meas + c[1],
                              u.r_meas + c[2], 0.0)
        a = state_transition(x, u, 0.01)
        b = state_transition(x_shift, u_shift, 0.01)
        assert b.vx == pytest.approx(a.vx, abs=1e-12)
        assert b.vy == pytest.approx(a.vy, abs=1e-12)
        assert b.r == pytest.approx(a.r, abs=1e-12)


def test_single_step_error_is_second_order():
    # smooth analytic truth with consistent curvilinear inputs
    def truth(t):
        vx = 20.0 + 2.0 * math.sin(t)
        vy = 0.8 * math.cos(1.3 * t)
        r = 0.3 * math.sin(2.0 * t)
        vx_dot = 2.0 * math.cos(t)
        vy_dot = -1.04 * math.sin(1.3 * t)
        ax = vx_dot - r * vy
        ay = vy_dot + r * vx
        return vx, vy, r, ax, ay

    t0 = 0.7
    errs = []
    for dt in (0.01, 0.005):
        vx, vy, r, ax, ay = truth(t0)
        pred = state_transition(_x(vx=vx, vy=vy, r=r), _u(ax=ax, ay=ay), dt)
        vx1, vy1, _, _, _ = truth(t0 + dt)
        errs.append(math.hypot(pred.vx - vx1, pred.vy - vy1))
    assert errs[0] / errs[1] >= 3.5


def test_process_residual_zero_for_model_pair():
    x = _x(vx=12.0, vy=0.4, r=0.2, bx=0.05)
    u = _u(ax=1.0, ay=-0.5, r=0.21)
    sigma_w = np.full(6, 1e-4)
    nxt = state_transition(x, u, 0.01)
    res = process_residual(nxt, x, u, 0.01, sigma_w)
    assert np.allclose(res, 0.0, atol=1e-12)


def test_process_residual_whitening():
    # weight 10 on vx means variance 0.01 at this dt
    sigma_w = np.array([0.01, 1.0, 1.0, 1.0, 1.0, 1.0])
    x = _x(vx=5.0)
    u = _u()
    nxt = state_transition(x, u, 0.01)
    bumped = VehicleState(nxt.t, nxt.vx + 0.1, nxt.vy, nxt.r,
                          nxt.bx, nxt.by, nxt.br)
    res = process_residual(bumped, x, u, 0.01, sigma_w, dt_nominal=0.01)
    assert res[0] == pytest.approx(1.0)
    assert np.allclose(res[1:], 0.0)


def test_process_residual_rejects_nonpositive_dt():
    with pytest.raises(WindowOrderError):
        process_residual(_x(), _x(), _u(), 0.0, np.ones(6))


def test_state_transition_rejects_nonfinite():
    with pytest.raises(NumericError):
        state_transition(_x(vx=float("nan")), _u(), 0.01)


def test_transition_jacobian_matches_finite_differences():
    rng = np.random.default_rng(11)
    for _ in range(20):
        xa = rng.normal(0, 2, 6)
        u = _u(*rng.normal(0, 1, 3))
        dt = 0.01
        F = transition_jacobian(xa, dt)
        for j in range(6):
            h = 1e-6
            xp, xm = xa.copy(), xa.copy()
            xp[j] += h
            xm[j] -= h
            fp = state_transition(VehicleState(0, *xp), u, dt).as_array()
            fm = state_transition(VehicleState(0, *xm), u, dt).as_array()
            fd = (fp - fm) / (2 * h)
            assert np.allclose(F[:, j], fd, atol=1e-8)
