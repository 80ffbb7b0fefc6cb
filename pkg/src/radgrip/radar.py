"""Radar Doppler processing: bearing geometry, expected Doppler from the
vehicle state, de-aliasing against the Nyquist band, SNR and innovation
gating, and conversion of scans into robust scalar residual factors bound
to time-matched window states.

The sign convention is v_d = -b . v_R: points ahead of a forward-moving
radar measure negative Doppler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from radgrip.core import (AliasDomainError, RadarExtrinsics, RadarPoint,
                          RadarScan, SchemaError, StaleScanError,
                          VehicleConfig, VehicleState)

REJECT_LOW_SNR = "LowSNR"
REJECT_INNOVATION = "Innovation"


@dataclass
class DopplerFactor:
    """One de-aliased Doppler observation bound to a window state.

    bearing is the unit vector in the radar frame; cx, cy, lever are the
    cached body-frame projection terms used by the solver:
    v_e = -(cx*vx + cy*vy + lever*r).
    """

    state_timestamp: float
    bearing: np.ndarray
    v_r: float
    sigma: float
    radar_id: int
    n_wraps: int
    cx: float
    cy: float
    lever: float


def bearing_vector(azimuth: float, elevation: float) -> np.ndarray:
    """Unit bearing vector (cos e cos a, cos e sin a, sin e)."""
    ce = math.cos(elevation)
    return np.array([ce * math.cos(azimuth), ce * math.sin(azimuth),
                     math.sin(elevation)])


def bearing_vectors(azimuth: np.ndarray, elevation: np.ndarray) -> np.ndarray:
    """Vectorized bearing_vector, shape (N, 3)."""
    ce = np.cos(elevation)
    return np.stack([ce * np.cos(azimuth), ce * np.sin(azimuth),
                     np.sin(elevation)], axis=-1)


def expected_doppler(x: VehicleState, ext: RadarExtrinsics,
                     azimuth: float, elevation: float) -> float:
    """Doppler a static point at this bearing would measure, given the
    planar state (z velocity and roll/pitch rates ignored)."""
    b = bearing_vector(azimuth, elevation)
    c = ext.rotation @ b  # bearing in body frame
    tx, ty = ext.translation[0], ext.translation[1]
    lever = c[1] * tx - c[0] * ty
    return -(c[0] * x.vx + c[1] * x.vy + lever * x.r)


def body_projection(ext: RadarExtrinsics, bearings: np.ndarray):
    """Per-point body-frame projection terms (cx, cy, lever) for a set of
    radar-frame bearings of shape (N, 3)."""
    c = bearings @ ext.rotation.T
    tx, ty = ext.translation[0], ext.translation[1]
    lever = c[:, 1] * tx - c[:, 0] * ty
    return c[:, 0], c[:, 1], lever


def expected_doppler_many(vx: float, vy: float, r: float,
                          cx: np.ndarray, cy: np.ndarray,
                          lever: np.ndarray) -> np.ndarray:
    return -(cx * vx + cy * vy + lever * r)


def dealias(v_d: float, v_e: float, V_N: float) -> tuple[float, int]:
    """Recover the true Doppler from the wrapped measurement using the
    predicted value: n = nint((v_e - v_d) / (2 V_N)), v_r = v_d + 2 n V_N.

    nint ties (exact .5) resolve half-to-even.  Raises AliasDomainError if
    the measurement itself violates |v_d| <= V_N.
    """
    if abs(v_d) > V_N * (1.0 + 1e-12):
        raise AliasDomainError(f"|v_d|={abs(v_d):.3f} exceeds V_N={V_N}")
    n = int(np.rint((v_e - v_d) / (2.0 * V_N)))
    return v_d + 2.0 * n * V_N, n


def gate_point(p: RadarPoint, v_e: float, v_r: float,
               cfg: VehicleConfig) -> str | None:
    """None if the point is accepted, else the rejection reason."""
    if p.snr < cfg.thresholds.snr_min:
        return REJECT_LOW_SNR
    if abs(v_r - v_e) > cfg.thresholds.dV_r_max:
        return REJECT_INNOVATION
    return None


def scan_to_factors(scan: RadarScan, window, cfg: VehicleConfig
                    ) -> list[DopplerFactor]:
    """Convert a scan into Doppler factors bound to a state at t_capture.

    Requests (and if needed inserts) a window state at the capture time,
    predicts per-point Doppler there, de-aliases, gates, and emits one
    factor per surviving point.  Raises StaleScanError when the capture
    time predates the window.
    """
    if not (0 <= scan.radar_id < len(cfg.radars)):
        raise SchemaError(f"unknown radar_id {scan.radar_id}")
    ext = cfg.radars[scan.radar_id]
    if scan.t_capture < window.oldest_t() - 1e-9:
        raise StaleScanError(
            f"scan captured at {scan.t_capture:.4f} predates window start "
            f"{window.oldest_t():.4f}")
    x_cap = window.ensure_state_at(scan.t_capture)
    if not scan.points:
        return []
    az = np.array([p.azimuth for p in scan.points])
    el = np.array([p.elevation for p in scan.points])
    vd = np.array([p.doppler for p in scan.points])
    if np.any(np.abs(vd) > ext.nyquist * (1.0 + 1e-12)):
        worst = float(np.abs(vd).max())
        raise AliasDomainError(
            f"|v_d|={worst:.3f} exceeds V_N={ext.nyquist}")
    b = bearing_vectors(az, el)
    cx, cy, lever = body_projection(ext, b)
    v_e = expected_doppler_many(x_cap[0], x_cap[1], x_cap[2], cx, cy, lever)
    n = np.rint((v_e - vd) / (2.0 * ext.nyquist)).astype(int)
    v_r = vd + 2.0 * n * ext.nyquist
    factors = []
    for i, p in enumerate(scan.points):
        if gate_point(p, float(v_e[i]), float(v_r[i]), cfg) is not None:
            continue
        factors.append(DopplerFactor(
            state_timestamp=scan.t_capture,
            bearing=b[i],
            v_r=float(v_r[i]),
            sigma=cfg.covariances.sigma_doppler,
            radar_id=scan.radar_id,
            n_wraps=int(n[i]),
            cx=float(cx[i]),
            cy=float(cy[i]),
            lever=float(lever[i]),
        ))
    return factors


def doppler_residual(factor: DopplerFactor, x_at_capture: VehicleState,
                     ext: RadarExtrinsics) -> float:
    """Whitened scalar residual for one factor; the solver applies the
    Cauchy robust loss on top of this value."""
    v_e = expected_doppler(x_at_capture, ext,
                           math.atan2(factor.bearing[1], factor.bearing[0]),
                           math.asin(np.clip(factor.bearing[2], -1.0, 1.0)))
    return (factor.v_r - v_e) / factor.sigma


def ego_velocity_ls(scan: RadarScan, ext: RadarExtrinsics,
                    snr_min: float) -> tuple[float, float] | None:
    """Instantaneous planar velocity from one scan by least squares over
    v_d = -(cx vx + cy vy).  Valid only below the Nyquist band; used as a
    coarse speed source for the standstill detector before the first fix.
    """
    pts = [p for p in scan.points if p.snr >= snr_min]
    if len(pts) < 5:
        return None
    az = np.array([p.azimuth for p in pts])
    el = np.array([p.elevation for p in pts])
    vd = np.array([p.doppler for p in pts])
    b = bearing_vectors(az, el)
    cx, cy, _ = body_projection(ext, b)
    A = np.stack([-cx, -cy], axis=1)
    AtA = A.T @ A
    if np.linalg.det(AtA) < 1e-6:
        return None
    sol = np.linalg.solve(AtA, A.T @ vd)
    return float(sol[0]), float(sol[1])
