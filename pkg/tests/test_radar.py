import math

import numpy as np
import pytest

from radgrip.core import (AliasDomainError, InputSample, RadarPoint,
                          RadarScan, StaleScanError, VehicleState,
                          default_config)
from radgrip.mhe import SlidingWindow
from radgrip.radar import (REJECT_INNOVATION, REJECT_LOW_SNR, bearing_vector,
                           dealias, doppler_residual, ego_velocity_ls,
                           expected_doppler, gate_point, scan_to_factors)
from radgrip.simgen import wrap

CFG = default_config()


def _x(vx=0.0, vy=0.0, r=0.0, t=0.0):
    return VehicleState(t, vx, vy, r, 0.0, 0.0, 0.0)


def test_bearing_boresight():
    assert np.allclose(bearing_vector(0.0, 0.0), [1.0, 0.0, 0.0])


def test_bearing_left_abeam():
    assert np.allclose(bearing_vector(math.pi / 2, 0.0), [0.0, 1.0, 0.0],
                       atol=1e-15)


def test_bearing_unit_norm():
    rng = np.random.default_rng(2)
    for _ in range(200):
        b = bearing_vector(rng.uniform(-1, 1), rng.uniform(-0.3, 0.3))
        assert abs(np.linalg.norm(b) - 1.0) < 1e-12


def test_expected_doppler_forward():
    ext = CFG.radars[0]  # identity rotation at (2, 0, 0.2)
    v = expected_doppler(_x(vx=20.0), ext, 0.0, 0.0)
    assert v == pytest.approx(-20.0)


def test_expected_doppler_lever_arm():
    ext = type(CFG.radars[0])(np.eye(3), np.array([2.0, 0.0, 0.0]), 26.5)
    v = expected_doppler(_x(r=1.0), ext, math.pi / 2, 0.0)
    assert v == pytest.approx(-2.0)


def test_expected_doppler_rotated_radar():
    c, s = math.cos(math.pi / 2), math.sin(math.pi / 2)
    R = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])
    ext = type(CFG.radars[0])(R, np.zeros(3), 26.5)
    v = expected_doppler(_x(vx=10.0), ext, 0.0, 0.0)
    assert v == pytest.approx(0.0, abs=1e-12)


def test_dealias_in_band():
    assert dealias(10.0, 10.0, 26.5) == (10.0, 0)


def test_dealias_one_wrap_up():
    v_r, n = dealias(-20.0, 31.0, 26.5)
    assert (v_r, n) == (33.0, 1)


def test_dealias_one_wrap_down():
    v_r, n = dealias(23.0, -30.0, 26.5)
    assert (v_r, n) == (-30.0, -1)


def test_dealias_rejects_out_of_band_measurement():
    with pytest.raises(AliasDomainError):
        dealias(30.0, 0.0, 26.5)


def test_dealias_tie_breaks_to_even():
    # |v_e - v_d| exactly V_N: ratio is 0.5, nint gives 0 (half to even)
    v_r, n = dealias(0.0, 26.5, 26.5)
    assert n == 0 and v_r == 0.0
    v_r, n = dealias(0.0, 79.5, 26.5)  # ratio 1.5 rounds to 2
    assert n == 2


def test_dealias_recovers_exactly():
    rng = np.random.default_rng(9)
    V_N = 26.5
    for _ in range(10_000):
        v_true = rng.uniform(-4 * V_N, 4 * V_N)
        v_e = v_true + rng.uniform(-0.95 * V_N, 0.95 * V_N)
        v_d = wrap(v_true, V_N)
        v_rec, _ = dealias(v_d, v_e, V_N)
        assert abs(v_rec - v_true) < 1e-12


def test_gate_accepts_clean_point():
    p = RadarPoint(10.0, 0.0, 0.0, 5.0, 25.0)
    assert gate_point(p, 5.4, 5.0, CFG) is None


def test_gate_low_snr():
    p = RadarPoint(10.0, 0.0, 0.0, 5.0, 4.0)
    assert gate_point(p, 5.0, 5.0, CFG) == REJECT_LOW_SNR


def test_gate_innovation():
    p = RadarPoint(10.0, 0.0, 0.0, 5.0, 25.0)
    assert gate_point(p, 0.0, 5.0, CFG) == REJECT_INNOVATION


def test_gate_monotone_in_snr():
    rng = np.random.default_rng(3)
    import copy
    lowered = copy.deepcopy(CFG)
    lowered.thresholds.snr_min = 5.0
    for _ in range(200):
        p = RadarPoint(10.0, 0.0, 0.0, 5.0, float(rng.uniform(0, 40)))
        inno = float(rng.uniform(0, 5))
        if gate_point(p, 5.0 + inno, 5.0, CFG) is None:
            assert gate_point(p, 5.0 + inno, 5.0, lowered) is None


def _window_at_speed(vx, t_end=1.0):
    win = SlidingWindow(CFG)
    u = InputSample(0.0, 0.0, 0.0, 0.0, 0.0)
    win.seed(0.0, u)
    win.states[0].x[0] = vx
    t = CFG.thresholds.dt
    while t <= t_end + 1e-9:
        win.push_state(t, InputSample(t, 0.0, 0.0, 0.0, 0.0))
        t += CFG.thresholds.dt
    return win


def _scan(points, t_capture, t_receive, radar_id=0):
    return RadarScan(radar_id, t_capture, t_receive, tuple(points))


def test_scan_inserts_state_back_in_time():
    # capture 90.3 ms back falls between grid states and forces insertion
    win = _window_at_speed(20.0)
    newest = win.newest_t()
    t_cap = newest - 0.0903
    pts = [RadarPoint(10.0, 0.0, 0.0, wrap(-20.0, 26.5), 25.0)]
    n_before = len(win.states)
    factors = scan_to_factors(_scan(pts, t_cap, newest), win, CFG)
    assert len(win.states) == n_before + 1
    times = [s.t for s in win.states]
    assert any(abs(t - t_cap) < 1e-9 for t in times)
    assert times == sorted(times)
    assert len(factors) == 1
    assert factors[0].state_timestamp == pytest.approx(t_cap)
    assert factors[0].v_r == pytest.approx(-20.0)


def test_scan_ninety_ms_back_binds_at_capture_time():
    # a capture exactly 90 ms back coincides with the state grid here, so
    # the factor binds to that state without inserting a duplicate
    win = _window_at_speed(20.0)
    newest = win.newest_t()
    t_cap = newest - 0.09
    pts = [RadarPoint(10.0, 0.0, 0.0, wrap(-20.0, 26.5), 25.0)]
    n_before = len(win.states)
    factors = scan_to_factors(_scan(pts, t_cap, newest), win, CFG)
    assert len(win.states) == n_before
    assert factors[0].state_timestamp == pytest.approx(t_cap)


def test_scan_binds_to_existing_grid_state():
    win = _window_at_speed(20.0)
    t_cap = win.states[-3].t
    pts = [RadarPoint(10.0, 0.0, 0.0, wrap(-20.0, 26.5), 25.0)]
    n_before = len(win.states)
    scan_to_factors(_scan(pts, t_cap, win.newest_t()), win, CFG)
    assert len(win.states) == n_before


def test_scan_fully_gated_yields_no_factors():
    win = _window_at_speed(20.0)
    pts = [RadarPoint(10.0, 0.0, 0.0, wrap(-20.0, 26.5), 2.0)]  # low SNR
    factors = scan_to_factors(
        _scan(pts, win.newest_t() - 0.05, win.newest_t()), win, CFG)
    assert factors == []


def test_stale_scan_rejected():
    win = _window_at_speed(20.0)
    pts = [RadarPoint(10.0, 0.0, 0.0, 0.0, 25.0)]
    with pytest.raises(StaleScanError):
        scan_to_factors(_scan(pts, win.oldest_t() - 0.2, win.newest_t()),
                        win, CFG)


def test_doppler_residual_consistency():
    win = _window_at_speed(20.0)
    pts = [RadarPoint(10.0, 0.1, 0.02, wrap(
        expected_doppler(_x(vx=20.0), CFG.radars[0], 0.1, 0.02), 26.5), 25.0)]
    f = scan_to_factors(_scan(pts, win.newest_t() - 0.05, win.newest_t()),
                        win, CFG)[0]
    res = doppler_residual(f, _x(vx=20.0), CFG.radars[0])
    assert res == pytest.approx(0.0, abs=1e-9)


def test_doppler_residual_velocity_error():
    # boresight forward point: 1 m/s vx error over sigma 0.2 gives |5.0|
    ext = CFG.radars[0]
    v_true = expected_doppler(_x(vx=20.0), ext, 0.0, 0.0)
    win = _window_at_speed(20.0)
    pts = [RadarPoint(10.0, 0.0, 0.0, wrap(v_true, 26.5), 25.0)]
    f = scan_to_factors(_scan(pts, win.newest_t() - 0.05, win.newest_t()),
                        win, CFG)[0]
    f_scaled = type(f)(f.state_timestamp, f.bearing, f.v_r, 0.2, f.radar_id,
                       f.n_wraps, f.cx, f.cy, f.lever)
    res = doppler_residual(f_scaled, _x(vx=19.0), ext)
    assert abs(res) == pytest.approx(5.0, abs=1e-9)


def test_doppler_residual_lateral_orthogonality():
    # point at pi/2 sees vy only; vx error does not move the residual
    ext = type(CFG.radars[0])(np.eye(3), np.zeros(3), 26.5)
    v_true = expected_doppler(_x(vx=20.0, vy=0.5), ext, math.pi / 2, 0.0)
    win = _window_at_speed(20.0)
    pts = [RadarPoint(10.0, math.pi / 2, 0.0, wrap(v_true, 26.5), 25.0)]
    f = scan_to_factors(_scan(pts, win.newest_t() - 0.05, win.newest_t()),
                        win, CFG)[0]
    r1 = doppler_residual(f, _x(vx=20.0, vy=0.5), ext)
    r2 = doppler_residual(f, _x(vx=15.0, vy=0.5), ext)
    assert r1 == pytest.approx(r2, abs=1e-9)


def test_ego_velocity_ls():
    ext = CFG.radars[0]
    rng = np.random.default_rng(4)
    pts = []
    for _ in range(20):
        az, el = rng.uniform(-0.6, 0.6), rng.uniform(-0.1, 0.1)
        vd = expected_doppler(_x(vx=12.0, vy=0.8), ext, az, el)
        pts.append(RadarPoint(10.0, az, el, vd, 25.0))
    sol = ego_velocity_ls(_scan(pts, 0.0, 0.0), ext, 10.0)
    # lever arm of the yaw term is zero here (r = 0), so LS is exact
    assert sol[0] == pytest.approx(12.0, abs=1e-6)
    assert sol[1] == pytest.approx(0.8, abs=1e-6)
