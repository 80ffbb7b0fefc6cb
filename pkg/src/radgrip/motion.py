"""Discrete rigid-body motion model in curvilinear coordinates.

Velocities integrate measured accelerations (bias-corrected, with Coriolis
coupling) by forward Euler; the yaw rate is taken algebraically from the
previous gyro sample minus its bias; biases are random walks.
"""

from __future__ import annotations

import math

import numpy as np

from radgrip.core import (InputSample, NumericError, VehicleState,
                          WindowOrderError)


def state_transition(x_prev: VehicleState, u_prev: InputSample,
                     dt: float) -> VehicleState:
    """One forward-Euler step of the motion model.

    vx' = vx + ((ax - bx) + r*vy) * dt
    vy' = vy + ((ay - by) - r*vx) * dt
    r'  = r_meas - br          (algebraic, previous gyro sample)
    biases carried unchanged.
    """
    if not (dt > 0.0):
        raise WindowOrderError(f"dt must be positive, got {dt}")
    vals = (x_prev.vx, x_prev.vy, x_prev.r, x_prev.bx, x_prev.by, x_prev.br,
            u_prev.ax_meas, u_prev.ay_meas, u_prev.r_meas)
    if not all(math.isfinite(v) for v in vals):
        raise NumericError("non-finite state or input in state_transition")
    vx = x_prev.vx + ((u_prev.ax_meas - x_prev.bx)
                      + x_prev.r * x_prev.vy) * dt
    vy = x_prev.vy + ((u_prev.ay_meas - x_prev.by)
                      - x_prev.r * x_prev.vx) * dt
    r = u_prev.r_meas - x_prev.br
    return VehicleState(x_prev.t + dt, vx, vy, r,
                        x_prev.bx, x_prev.by, x_prev.br)


def predict_array(x_prev: np.ndarray, u_ax: float, u_ay: float, u_r: float,
                  dt: float) -> np.ndarray:
    """Array form of state_transition on [vx,vy,r,bx,by,br] (no checks)."""
    vx, vy, r, bx, by, br = x_prev
    return np.array([
        vx + ((u_ax - bx) + r * vy) * dt,
        vy + ((u_ay - by) - r * vx) * dt,
        u_r - br,
        bx, by, br,
    ])


def process_residual(x_next: VehicleState, x_prev: VehicleState,
                     u_prev: InputSample, dt: float,
                     sigma_w: np.ndarray, dt_nominal: float = 0.010
                     ) -> np.ndarray:
    """Whitened 6-vector residual x_next - f(x_prev, u_prev).

    sigma_w is the per-component process variance at dt_nominal; the
    variance used here scales linearly with dt.
    """
    if not (dt > 0.0):
        raise WindowOrderError(f"dt must be positive, got {dt}")
    pred = state_transition(x_prev, u_prev, dt)
    raw = x_next.as_array() - pred.as_array()
    var = np.asarray(sigma_w, dtype=float) * (dt / dt_nominal)
    return raw / np.sqrt(var)


def transition_jacobian(x_prev: np.ndarray, dt: float) -> np.ndarray:
    """d f / d x_prev for one Euler step (6x6)."""
    vx, vy, r = x_prev[0], x_prev[1], x_prev[2]
    F = np.eye(6)
    F[0, 1] = r * dt
    F[0, 2] = vy * dt
    F[0, 3] = -dt
    F[1, 0] = -r * dt
    F[1, 2] = -vx * dt
    F[1, 4] = -dt
    F[2, 2] = 0.0
    F[2, 5] = -1.0
    return F
