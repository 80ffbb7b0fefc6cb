"""Lateral-dynamics measurement model: slip angles, vertical loads with
aero downforce, the Pacejka lateral curve, and the inertial force split.

The curve output is normalized (force per unit vertical load), so axle
forces are vertical load times curve value.  All formulas here are shared
with the truth simulator through the *_raw array helpers.
"""

from __future__ import annotations

import math

import numpy as np

from radgrip.core import (GateError, InputSample, LoadDomainError,
                          PacejkaAxleParams, SteeringDomainError,
                          TireParamSet, VehicleConfig, VehicleState)

# steering split is undefined past this; far beyond physical steering range
_COS_DELTA_MIN = math.cos(math.radians(80.0))


def slip_angles_raw(vx, vy, r, delta, lf: float, lr: float):
    """Front/rear axle slip angles without the speed gate (array-safe)."""
    alpha_f = np.arctan((vy + r * lf) / vx) - delta
    alpha_r = np.arctan((vy - r * lr) / vx)
    return alpha_f, alpha_r


def slip_angles(x: VehicleState, delta: float,
                cfg: VehicleConfig) -> tuple[float, float]:
    """Axle slip angles; gated on |vx| to stay clear of the 1/vx singularity."""
    if abs(x.vx) < cfg.thresholds.V_Fy_min:
        raise GateError(
            f"|vx|={abs(x.vx):.3f} below V_Fy_min={cfg.thresholds.V_Fy_min}")
    af, ar = slip_angles_raw(x.vx, x.vy, x.r, delta, cfg.lf, cfg.lr)
    return float(af), float(ar)


def vertical_loads_raw(vx, ax_meas, cfg: VehicleConfig):
    """Static load, longitudinal transfer and downforce per axle (array-safe)."""
    wb = cfg.lf + cfg.lr
    q = 0.5 * cfg.rho * cfg.A * vx * vx
    Fzf = cfg.m / wb * (cfg.g * cfg.lr - ax_meas * cfg.hg) + cfg.Czf * q
    Fzr = cfg.m / wb * (cfg.g * cfg.lf + ax_meas * cfg.hg) + cfg.Czr * q
    return Fzf, Fzr


def vertical_loads(x: VehicleState, u: InputSample,
                   cfg: VehicleConfig) -> tuple[float, float]:
    Fzf, Fzr = vertical_loads_raw(x.vx, u.ax_meas, cfg)
    if Fzf <= 0.0 or Fzr <= 0.0:
        raise LoadDomainError(
            f"nonphysical vertical load Fzf={Fzf:.1f} Fzr={Fzr:.1f}")
    return float(Fzf), float(Fzr)


def magic_formula(slip: float, p: PacejkaAxleParams) -> float:
    """Normalized lateral force Y(slip) = y(slip + Sh) + Sv with
    y(s) = D sin(C atan(B s - E (B s - atan(B s))))."""
    s = slip + p.Sh
    u1 = p.B * s
    inner = u1 - p.E * (u1 - math.atan(u1))
    return p.D * math.sin(p.C * math.atan(inner)) + p.Sv


def magic_formula_values(slip, p6):
    """Vectorized curve values only (cheaper than magic_formula_derivs)."""
    slip = np.asarray(slip, dtype=float)
    B, C, D, E, Sh, Sv = (float(v) for v in p6)
    u1 = B * (slip + Sh)
    inner = u1 - E * (u1 - np.arctan(u1))
    return D * np.sin(C * np.arctan(inner)) + Sv


def magic_formula_derivs(slip, p6):
    """Curve value plus derivatives w.r.t. slip and the 6 parameters.

    slip may be an array; p6 is [B, C, D, E, Sh, Sv].  Returns
    (Y, dY_dslip, dY_dp) with dY_dp of shape slip.shape + (6,).
    """
    slip = np.asarray(slip, dtype=float)
    B, C, D, E, Sh, Sv = (float(v) for v in p6)
    s = slip + Sh
    u1 = B * s
    at_u1 = np.arctan(u1)
    inner = u1 - E * (u1 - at_u1)
    at_in = np.arctan(inner)
    sin_phi = np.sin(C * at_in)
    cos_phi = np.cos(C * at_in)
    d_at_in = 1.0 / (1.0 + inner * inner)
    d_inner_du1 = 1.0 - E * (1.0 - 1.0 / (1.0 + u1 * u1))
    common = D * cos_phi * C * d_at_in
    Y = D * sin_phi + Sv
    dY_dslip = common * B * d_inner_du1
    dY_dp = np.empty(slip.shape + (6,))
    dY_dp[..., 0] = common * s * d_inner_du1          # dB
    dY_dp[..., 1] = D * cos_phi * at_in               # dC
    dY_dp[..., 2] = sin_phi                           # dD
    dY_dp[..., 3] = common * (-(u1 - at_u1))          # dE
    dY_dp[..., 4] = dY_dslip                          # dSh
    dY_dp[..., 5] = np.ones_like(slip)                # dSv
    return Y, dY_dslip, dY_dp


def force_slip(alpha):
    """Slip fed to the tire curve.

    The curve is parameterized over the force-producing slip direction,
    the negative of the velocity-side slip angle of slip_angles; a tire
    force opposes the slip of its contact patch, and this orientation is
    what keeps the fitted B, C, D positive inside their box.
    """
    return -alpha


def model_lateral_forces(x: VehicleState, u: InputSample, P: TireParamSet,
                         cfg: VehicleConfig) -> tuple[float, float]:
    """Axle lateral forces from the tire curve at the current state."""
    af, ar = slip_angles(x, u.delta, cfg)
    Fzf, Fzr = vertical_loads(x, u, cfg)
    return (Fzf * magic_formula(force_slip(af), P.front),
            Fzr * magic_formula(force_slip(ar), P.rear))


def measured_lateral_forces(ay_meas: float, delta: float,
                            cfg: VehicleConfig) -> tuple[float, float]:
    """Static-split inertial axle forces from lateral acceleration."""
    cd = math.cos(delta)
    if cd <= _COS_DELTA_MIN:
        raise SteeringDomainError(f"cos(delta)={cd:.4f} too small")
    wb = cfg.lf + cfg.lr
    Fyf = (cfg.lr / wb) * cfg.m * ay_meas / cd
    Fyr = (cfg.lf / wb) * cfg.m * ay_meas
    return Fyf, Fyr


def passes_force_gate(x: VehicleState, cfg: VehicleConfig) -> bool:
    """Total-speed gate for the lateral-force model; also requires the
    |vx| condition used by slip_angles so both stay consistent."""
    v_min = cfg.thresholds.V_Fy_min
    return math.hypot(x.vx, x.vy) > v_min and abs(x.vx) >= v_min


def lateral_force_residual(x: VehicleState, u: InputSample, P: TireParamSet,
                           cfg: VehicleConfig) -> np.ndarray | None:
    """Whitened (measured - model) force residual, or None below the gate."""
    if not passes_force_gate(x, cfg):
        return None
    Fyf_m, Fyr_m = measured_lateral_forces(u.ay_meas, u.delta, cfg)
    Fyf, Fyr = model_lateral_forces(x, u, P, cfg)
    raw = np.array([Fyf_m - Fyf, Fyr_m - Fyr])
    return raw / np.sqrt(cfg.covariances.Sigma_Fy)


def cornering_stiffness(p: PacejkaAxleParams) -> float:
    """Slope of the normalized lateral curve at zero effective slip."""
    return p.B * p.C * p.D
