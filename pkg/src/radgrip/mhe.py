"""Sliding-window problem assembly and the bounded nonlinear least-squares
solver that jointly refines vehicle states and tire parameters.

States enter the window every dt (10 ms default); radar scans bind Doppler
factors to a state at their capture time, inserting one back in time when
the capture instant falls between grid states.  The full problem is solved
when a scan contributes at least one gated-in factor, after which the
window shifts and priors are refreshed from the newest estimates.

The solver is a small Levenberg-Marquardt on the window's block structure:
block-tridiagonal state chain plus one dense tire-parameter column.  Tire
parameters are kept inside their box by clamping trial steps; Doppler rows
carry a Cauchy robust loss, everything else is quadratic.
"""

from __future__ import annotations

import bisect
import gc
import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from radgrip import radar as radar_mod
from radgrip import tire, zupt
from radgrip.core import (ImuSample, InputSample, NumericError, RadarScan,
                          ReferenceVelocity, SolverCfg, StaleEventError,
                          StaleScanError, SteeringSample, TireParamSet,
                          VehicleConfig, VehicleState, WindowOrderError,
                          event_time)
from radgrip.motion import predict_array

SolverSettings = SolverCfg

_T_EPS = 1e-9


# ---------------------------------------------------------------------------
# Window
# ---------------------------------------------------------------------------

@dataclass
class WindowState:
    t: float
    x: np.ndarray            # [vx, vy, r, bx, by, br] current estimate
    u: InputSample           # input governing [t, next.t) and models at t
    grid: bool               # True for 10 ms grid states (output rows)
    zv: tuple | None = None  # (ax_tilde, ay_tilde, r_meas) while stationary


class SlidingWindow:
    """Time-ordered states with attached measurements and priors."""

    def __init__(self, cfg: VehicleConfig):
        self.cfg = cfg
        self.states: list[WindowState] = []
        self.doppler: list[radar_mod.DopplerFactor] = []
        self.prior_x: np.ndarray | None = None
        self.prior_P: np.ndarray = np.clip(
            cfg.initial_params.as_array(),
            cfg.bounds.full_min(), cfg.bounds.full_max())
        self.input_lookup = None  # optional t -> InputSample

    def oldest_t(self) -> float:
        return self.states[0].t

    def newest_t(self) -> float:
        return self.states[-1].t

    def span(self) -> float:
        return self.states[-1].t - self.states[0].t if self.states else 0.0

    def seed(self, t: float, u: InputSample) -> WindowState:
        x0 = np.zeros(6)
        x0[3:6] = self.cfg.initial_biases
        ws = WindowState(t, x0, u, grid=True)
        self.states = [ws]
        self.prior_x = x0.copy()
        return ws

    def push_state(self, t: float, u: InputSample) -> WindowState:
        """Append a grid state predicted from the newest one."""
        if not self.states:
            return self.seed(t, u)
        newest = self.states[-1]
        dt = t - newest.t
        if dt <= _T_EPS:
            raise WindowOrderError(
                f"push at t={t} does not advance newest={newest.t}")
        nu = newest.u
        x = predict_array(newest.x, nu.ax_meas, nu.ay_meas, nu.r_meas, dt)
        ws = WindowState(t, x, u, grid=True)
        self.states.append(ws)
        return ws

    def _input_at(self, t: float) -> InputSample:
        if self.input_lookup is not None:
            u = self.input_lookup(t)
            if u is not None:
                return u
        idx = bisect.bisect_right([s.t for s in self.states], t) - 1
        return self.states[max(idx, 0)].u

    def ensure_state_at(self, t: float) -> np.ndarray:
        """Current estimate of the state at time t, inserting one if needed.

        An inserted state is initialized by linear interpolation of its
        neighbours (or prediction when beyond the newest state); process
        residuals re-link across the split automatically.
        """
        times = [s.t for s in self.states]
        i = bisect.bisect_left(times, t - _T_EPS)
        if i < len(times) and abs(times[i] - t) <= _T_EPS:
            return self.states[i].x
        if t < times[0]:
            raise StaleScanError(f"state request at {t} predates window")
        u = self._input_at(t)
        if t > times[-1]:
            newest = self.states[-1]
            nu = newest.u
            x = predict_array(newest.x, nu.ax_meas, nu.ay_meas, nu.r_meas,
                              t - newest.t)
            ws = WindowState(t, x, u, grid=False)
            self.states.append(ws)
            return ws.x
        lo, hi = self.states[i - 1], self.states[i]
        w = (t - lo.t) / (hi.t - lo.t)
        x = (1.0 - w) * lo.x + w * hi.x
        ws = WindowState(t, x, u, grid=False)
        self.states.insert(i, ws)
        return ws.x

    def shift(self, P_new: np.ndarray) -> list[WindowState]:
        """Evict states until the span fits the horizon, refresh priors.

        Returns the evicted states (oldest first).
        """
        evicted = []
        dTw = self.cfg.thresholds.dTw
        while len(self.states) > 1 and self.span() > dTw + _T_EPS:
            evicted.append(self.states.pop(0))
        if evicted:
            t0 = self.oldest_t()
            self.doppler = [f for f in self.doppler
                            if f.state_timestamp >= t0 - _T_EPS]
        self.prior_x = self.states[0].x.copy()
        self.prior_P = np.asarray(P_new, dtype=float).copy()
        return evicted


# ---------------------------------------------------------------------------
# Problem assembly
# ---------------------------------------------------------------------------

_CLASSES = ("prior_state", "prior_params", "process", "zupt",
            "lateral_force", "doppler")


class WindowProblem:
    """Residuals and analytic Jacobian of one window solve.

    Variables are z = [x_0 ... x_{K-1}, P] with x_k the 6 state components
    and P the 12 tire parameters (front then rear axle).
    """

    def __init__(self, window: SlidingWindow, P_init: np.ndarray,
                 cfg: VehicleConfig):
        th, cov = cfg.thresholds, cfg.covariances
        self.cfg = cfg
        states = window.states
        K = self.K = len(states)
        self.t = np.array([s.t for s in states])
        self.X_init = np.stack([s.x for s in states])
        self.P_lo = cfg.bounds.full_min()
        self.P_hi = cfg.bounds.full_max()
        self.P_init = np.clip(np.asarray(P_init, dtype=float),
                              self.P_lo, self.P_hi)
        self.dt = np.diff(self.t)
        self.u_ax = np.array([s.u.ax_meas for s in states])
        self.u_ay = np.array([s.u.ay_meas for s in states])
        self.u_r = np.array([s.u.r_meas for s in states])
        self.u_delta = np.array([s.u.delta for s in states])

        self.prior_x = window.prior_x.copy()
        self.prior_P = np.clip(window.prior_P, self.P_lo, self.P_hi)
        self.w_x0 = 1.0 / np.sqrt(cov.Sigma_x0)
        self.w_P = 1.0 / np.sqrt(cov.Sigma_P)
        self.w_proc = 1.0 / np.sqrt(
            cov.Sigma_w[None, :] * (self.dt[:, None] / th.dt))
        self.w_zv = 1.0 / np.sqrt(cov.Sigma_zv)
        self.w_fy = 1.0 / np.sqrt(cov.Sigma_Fy)

        self.zv_idx = np.array([k for k, s in enumerate(states)
                                if s.zv is not None], dtype=int)
        self.zv_target = np.array(
            [[0.0, 0.0, 0.0, s.zv[0], s.zv[1], s.zv[2]]
             for s in states if s.zv is not None]).reshape(-1, 6)

        # lateral-force rows: gate on the entry estimates, fixed per solve
        fy_idx = []
        for k, s in enumerate(states):
            xs = VehicleState.from_array(s.t, s.x)
            if (tire.passes_force_gate(xs, cfg)
                    and math.cos(s.u.delta) > 0.2):
                fy_idx.append(k)
        self.fy_idx = np.array(fy_idx, dtype=int)
        if len(fy_idx):
            wb = cfg.lf + cfg.lr
            d = self.u_delta[self.fy_idx]
            ay = self.u_ay[self.fy_idx]
            self.fy_meas = np.stack([
                (cfg.lr / wb) * cfg.m * ay / np.cos(d),
                (cfg.lf / wb) * cfg.m * ay,
            ], axis=1)
        else:
            self.fy_meas = np.zeros((0, 2))

        facs = window.doppler
        if facs:
            ft = np.array([f.state_timestamp for f in facs])
            self.dop_idx = np.searchsorted(self.t, ft - _T_EPS)
            self.dop_cx = np.array([f.cx for f in facs])
            self.dop_cy = np.array([f.cy for f in facs])
            self.dop_lever = np.array([f.lever for f in facs])
            self.dop_vr = np.array([f.v_r for f in facs])
            self.dop_w = 1.0 / np.array([f.sigma for f in facs])
        else:
            self.dop_idx = np.zeros(0, dtype=int)
            self.dop_cx = self.dop_cy = self.dop_lever = np.zeros(0)
            self.dop_vr = self.dop_w = np.zeros(0)

        self.cauchy = cfg.solver.cauchy_scale
        n_zv, n_fy, n_dop = len(self.zv_idx), len(self.fy_idx), len(facs)
        sizes = {
            "prior_state": 6,
            "prior_params": 12,
            "process": 6 * (K - 1),
            "zupt": 6 * n_zv,
            "lateral_force": 2 * n_fy,
            "doppler": n_dop,
        }
        self.slices = {}
        off = 0
        for name in _CLASSES:
            self.slices[name] = slice(off, off + sizes[name])
            off += sizes[name]
        self.nrows = off
        self.nvar = 6 * K + 12
        # reused buffers; every written Jacobian slot is overwritten per call
        self._r_buf = np.zeros(self.nrows)
        self._J_buf = np.zeros((self.nrows, self.nvar))
        self._pred_buf = np.empty((K - 1, 6))
        ks = np.arange(K - 1)
        self._proc_row = self.slices["process"].start + 6 * ks
        self._proc_col = 6 * ks
        if len(self.zv_idx):
            self._zv_row = self.slices["zupt"].start \
                + 6 * np.arange(len(self.zv_idx))
            self._zv_col = 6 * self.zv_idx
        if len(self.fy_idx):
            self._fy_row = self.slices["lateral_force"].start \
                + 2 * np.arange(len(self.fy_idx))
            self._fy_col = 6 * self.fy_idx
        if len(self.dop_idx):
            self._dop_row = self.slices["doppler"].start \
                + np.arange(len(self.dop_idx))
            self._dop_col = 6 * self.dop_idx

    def z_init(self) -> np.ndarray:
        return np.concatenate([self.X_init.ravel(), self.P_init])

    def clamp(self, z: np.ndarray) -> np.ndarray:
        z[6 * self.K:] = np.clip(z[6 * self.K:], self.P_lo, self.P_hi)
        return z

    def _split(self, z: np.ndarray):
        return z[:6 * self.K].reshape(self.K, 6), z[6 * self.K:]

    def _axle_geometry(self, X: np.ndarray):
        """Slip angles and vertical loads at the lateral-force states."""
        cfg = self.cfg
        idx = self.fy_idx
        vx, vy, r = X[idx, 0], X[idx, 1], X[idx, 2]
        d = self.u_delta[idx]
        af, ar = tire.slip_angles_raw(vx, vy, r, d, cfg.lf, cfg.lr)
        Fzf, Fzr = tire.vertical_loads_raw(vx, self.u_ax[idx], cfg)
        return vx, vy, r, d, af, ar, Fzf, Fzr

    def residuals(self, z: np.ndarray) -> np.ndarray:
        X, P = self._split(z)
        r = self._r_buf
        r[self.slices["prior_state"]] = self.w_x0 * (X[0] - self.prior_x)
        r[self.slices["prior_params"]] = self.w_P * (P - self.prior_P)

        Xp = X[:-1]
        pred = self._pred_buf
        pred[:, 0] = Xp[:, 0] + ((self.u_ax[:-1] - Xp[:, 3])
                                 + Xp[:, 2] * Xp[:, 1]) * self.dt
        pred[:, 1] = Xp[:, 1] + ((self.u_ay[:-1] - Xp[:, 4])
                                 - Xp[:, 2] * Xp[:, 0]) * self.dt
        pred[:, 2] = self.u_r[:-1] - Xp[:, 5]
        pred[:, 3:6] = Xp[:, 3:6]
        r[self.slices["process"]] = ((X[1:] - pred) * self.w_proc).ravel()

        if len(self.zv_idx):
            rz = (X[self.zv_idx] - self.zv_target) * self.w_zv
            r[self.slices["zupt"]] = rz.ravel()

        if len(self.fy_idx):
            _, _, _, d, af, ar, Fzf, Fzr = self._axle_geometry(X)
            Yf = tire.magic_formula_values(tire.force_slip(af), P[:6])
            Yr = tire.magic_formula_values(tire.force_slip(ar), P[6:])
            res = (self.fy_meas
                   - np.stack([Fzf * Yf, Fzr * Yr], axis=1)) * self.w_fy
            r[self.slices["lateral_force"]] = res.ravel()

        if len(self.dop_idx):
            di = self.dop_idx
            v_e = -(self.dop_cx * X[di, 0] + self.dop_cy * X[di, 1]
                    + self.dop_lever * X[di, 2])
            r[self.slices["doppler"]] = (self.dop_vr - v_e) * self.dop_w
        return r

    def check_finite(self, r: np.ndarray) -> None:
        if np.all(np.isfinite(r)):
            return
        for name in _CLASSES:
            if not np.all(np.isfinite(r[self.slices[name]])):
                raise NumericError(f"non-finite residuals in {name}")

    def cost(self, r: np.ndarray) -> float:
        dop = self.slices["doppler"]
        quad = float(r[:dop.start] @ r[:dop.start])
        rd = r[dop]
        c2 = self.cauchy * self.cauchy
        return quad + float(c2 * np.sum(np.log1p(rd * rd / c2)))

    def cost_breakdown(self, r: np.ndarray) -> dict:
        out = {}
        c2 = self.cauchy * self.cauchy
        for name in _CLASSES:
            rs = r[self.slices[name]]
            if name == "doppler":
                out[name] = float(c2 * np.sum(np.log1p(rs * rs / c2)))
            else:
                out[name] = float(rs @ rs)
        return out

    def robust_weights(self, r: np.ndarray) -> np.ndarray:
        """Row scalings sqrt(rho'(s)) for the IRLS normal equations."""
        w = np.ones(self.nrows)
        dop = self.slices["doppler"]
        rd = r[dop]
        c2 = self.cauchy * self.cauchy
        w[dop] = 1.0 / np.sqrt(1.0 + rd * rd / c2)
        return w

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        X, P = self._split(z)
        K = self.K
        J = self._J_buf
        pcol = 6 * K

        sl = self.slices["prior_state"]
        J[sl, 0:6][np.arange(6), np.arange(6)] = self.w_x0
        sl = self.slices["prior_params"]
        J[sl, pcol:pcol + 12][np.arange(12), np.arange(12)] = self.w_P

        w = self.w_proc
        dt = self.dt
        vx, vy, rr = X[:-1, 0], X[:-1, 1], X[:-1, 2]
        col = self._proc_col
        row = self._proc_row
        # d residual / d x_k  (minus the transition Jacobian, whitened)
        J[row, col] = -w[:, 0]
        J[row, col + 1] = -w[:, 0] * rr * dt
        J[row, col + 2] = -w[:, 0] * vy * dt
        J[row, col + 3] = w[:, 0] * dt
        J[row + 1, col] = w[:, 1] * rr * dt
        J[row + 1, col + 1] = -w[:, 1]
        J[row + 1, col + 2] = w[:, 1] * vx * dt
        J[row + 1, col + 4] = w[:, 1] * dt
        J[row + 2, col + 5] = w[:, 2]
        J[row + 3, col + 3] = -w[:, 3]
        J[row + 4, col + 4] = -w[:, 4]
        J[row + 5, col + 5] = -w[:, 5]
        # d residual / d x_{k+1}
        for i in range(6):
            J[row + i, col + 6 + i] = w[:, i]

        if len(self.zv_idx):
            zrow, zcol = self._zv_row, self._zv_col
            for i in range(6):
                J[zrow + i, zcol + i] = self.w_zv[i]

        if len(self.fy_idx):
            cfg = self.cfg
            vx, vy, r_, d, af, ar, Fzf, Fzr = self._axle_geometry(X)
            Yf, dYf_ds, dYf_dp = tire.magic_formula_derivs(
                tire.force_slip(af), P[:6])
            Yr, dYr_ds, dYr_dp = tire.magic_formula_derivs(
                tire.force_slip(ar), P[6:])
            qf = (vy + r_ * cfg.lf) / vx
            qr = (vy - r_ * cfg.lr) / vx
            gf = 1.0 / (1.0 + qf * qf)
            gr = 1.0 / (1.0 + qr * qr)
            # chain rule through force_slip: d(-alpha)/d(state)
            daf_dvx, daf_dvy, daf_dr = gf * qf / vx, -gf / vx, -gf * cfg.lf / vx
            dar_dvx, dar_dvy, dar_dr = gr * qr / vx, -gr / vx, gr * cfg.lr / vx
            dFz_dvx_f = cfg.Czf * cfg.rho * cfg.A * vx
            dFz_dvx_r = cfg.Czr * cfg.rho * cfg.A * vx
            frow, scol = self._fy_row, self._fy_col
            wf, wr = self.w_fy[0], self.w_fy[1]
            J[frow, scol] = -wf * (dFz_dvx_f * Yf + Fzf * dYf_ds * daf_dvx)
            J[frow, scol + 1] = -wf * Fzf * dYf_ds * daf_dvy
            J[frow, scol + 2] = -wf * Fzf * dYf_ds * daf_dr
            J[frow + 1, scol] = -wr * (dFz_dvx_r * Yr + Fzr * dYr_ds * dar_dvx)
            J[frow + 1, scol + 1] = -wr * Fzr * dYr_ds * dar_dvy
            J[frow + 1, scol + 2] = -wr * Fzr * dYr_ds * dar_dr
            pidx = np.arange(6)
            J[frow[:, None], pcol + pidx[None, :]] = \
                -wf * Fzf[:, None] * dYf_dp
            J[frow[:, None] + 1, pcol + 6 + pidx[None, :]] = \
                -wr * Fzr[:, None] * dYr_dp

        if len(self.dop_idx):
            drow, dcol = self._dop_row, self._dop_col
            J[drow, dcol] = self.dop_w * self.dop_cx
            J[drow, dcol + 1] = self.dop_w * self.dop_cy
            J[drow, dcol + 2] = self.dop_w * self.dop_lever
        return J


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------

@dataclass
class SolveReport:
    iterations: int
    initial_cost: float
    final_cost: float
    wall_time: float
    termination: str
    breakdown: dict
    t: float = 0.0
    trigger: str = "radar"
    n_states: int = 0
    n_doppler: int = 0


def solve_problem(problem: WindowProblem, settings: SolverSettings,
                  lam: float | None = None
                  ) -> tuple[np.ndarray, SolveReport, float]:
    """Levenberg-Marquardt with clamped parameter box.

    Every trial step (accepted or rejected) counts toward the iteration
    cap; the wall-clock cap returns the last accepted iterate.  The cost
    never increases.  Returns (z, report, damping) with the damping carried
    to the next solve as a warm start.
    """
    t_start = time.perf_counter()
    if lam is None:
        lam = settings.lm_lambda_init
    z = problem.clamp(problem.z_init())
    r = problem.residuals(z).copy()
    problem.check_finite(r)
    cost = problem.cost(r)
    initial_cost = cost
    iters = 0
    term = None
    dop = problem.slices["doppler"]
    diag_ix = np.arange(problem.nvar)

    while term is None:
        if iters >= settings.max_iterations:
            term = "max_iterations"
            break
        if time.perf_counter() - t_start > settings.max_time:
            term = "max_time"
            break
        # robust reweighting applied in place to the Doppler rows only
        J = problem.jacobian(z)
        rw = r.copy()
        rd = r[dop]
        wd = 1.0 / np.sqrt(1.0 + rd * rd / (problem.cauchy ** 2))
        J[dop] *= wd[:, None]
        rw[dop] *= wd
        g = J.T @ rw
        if np.abs(g).max() < settings.gradient_tol:
            term = "gradient_tol"
            break
        A = J.T @ J
        D = np.maximum(A[diag_ix, diag_ix], 1e-12)
        while term is None:
            iters += 1
            A_damped = A.copy()
            A_damped[diag_ix, diag_ix] += lam * D
            try:
                delta = cho_solve(
                    cho_factor(A_damped, lower=True, check_finite=False),
                    -g, check_finite=False)
            except np.linalg.LinAlgError:
                delta = None
            if delta is not None:
                z_new = problem.clamp(z + delta)
                r_new = problem.residuals(z_new)
                cost_new = problem.cost(r_new) if np.all(
                    np.isfinite(r_new)) else np.inf
                if cost_new < cost:
                    step = float(np.linalg.norm(z_new - z))
                    z, r, cost = z_new, r_new.copy(), cost_new
                    lam = max(lam / 3.0, 1e-10)
                    if step < settings.step_tol * (np.linalg.norm(z)
                                                   + settings.step_tol):
                        term = "step_tol"
                    break
            lam = min(lam * 10.0, 1e8)
            if iters >= settings.max_iterations:
                term = "max_iterations"
            elif time.perf_counter() - t_start > settings.max_time:
                term = "max_time"

    report = SolveReport(
        iterations=iters,
        initial_cost=initial_cost,
        final_cost=cost,
        wall_time=time.perf_counter() - t_start,
        termination=term,
        breakdown=problem.cost_breakdown(r),
        n_states=problem.K,
        n_doppler=len(problem.dop_idx),
    )
    return z, report, lam


def solve(window: SlidingWindow, P_current: np.ndarray | TireParamSet,
          settings: SolverSettings, cfg: VehicleConfig,
          lam: float | None = None
          ) -> tuple[list[WindowState], np.ndarray, SolveReport]:
    """Solve the window in place; states and returned P are the refined
    estimates."""
    if isinstance(P_current, TireParamSet):
        P_current = P_current.as_array()
    problem = WindowProblem(window, P_current, cfg)
    z, report, lam_out = solve_problem(problem, settings, lam)
    K = len(window.states)
    X = z[:6 * K].reshape(K, 6)
    for k, s in enumerate(window.states):
        s.x = X[k].copy()
    P_new = z[6 * K:].copy()
    report._lam = lam_out
    return window.states, P_new, report


# ---------------------------------------------------------------------------
# Outputs
# ---------------------------------------------------------------------------

@dataclass
class OutputRow:
    t: float
    vx: float
    vy: float
    r: float
    bx: float
    by: float
    br: float
    alpha_f: float | None
    alpha_r: float | None
    Fyf: float | None
    Fyr: float | None
    BCD_f: float
    BCD_r: float
    beta: float | None
    ay_derived: float | None


def estimate_outputs(window: SlidingWindow, P: np.ndarray | TireParamSet,
                     cfg: VehicleConfig, index: int = -1) -> OutputRow:
    """Output row for one window state (newest by default).  Slip, force
    and side-slip fields are None below the speed gate."""
    if isinstance(P, TireParamSet):
        P = P.as_array()
    ws = window.states[index]
    return _output_row(ws, P, cfg)


def _output_row(ws: WindowState, P: np.ndarray, cfg: VehicleConfig
                ) -> OutputRow:
    x = VehicleState.from_array(ws.t, ws.x)
    pset = TireParamSet.from_array(P)
    bcd_f = tire.cornering_stiffness(pset.front)
    bcd_r = tire.cornering_stiffness(pset.rear)
    alpha_f = alpha_r = fyf = fyr = beta = ay_d = None
    if tire.passes_force_gate(x, cfg) and math.cos(ws.u.delta) > 0.2:
        try:
            alpha_f, alpha_r = tire.slip_angles(x, ws.u.delta, cfg)
            fzf, fzr = tire.vertical_loads(x, ws.u, cfg)
            fyf = fzf * tire.magic_formula(tire.force_slip(alpha_f),
                                           pset.front)
            fyr = fzr * tire.magic_formula(tire.force_slip(alpha_r),
                                           pset.rear)
            beta = math.atan(x.vy / x.vx)
            ay_d = (fyf * math.cos(ws.u.delta) + fyr) / cfg.m
        except Exception:
            alpha_f = alpha_r = fyf = fyr = beta = ay_d = None
    return OutputRow(ws.t, x.vx, x.vy, x.r, x.bx, x.by, x.br,
                     alpha_f, alpha_r, fyf, fyr, bcd_f, bcd_r, beta, ay_d)


# ---------------------------------------------------------------------------
# Event-driven estimator
# ---------------------------------------------------------------------------

class Estimator:
    """Single-sequence estimation pipeline over a time-ordered event stream.

    Feed events with process_event (in arrival order), then call finalize
    to flush the last window.  Output rows appear in `rows`, one per grid
    state, each carrying the final (smoothed) estimate that state had when
    it left the window.
    """

    def __init__(self, cfg: VehicleConfig,
                 settings: SolverSettings | None = None,
                 p_init: TireParamSet | None = None):
        self.cfg = cfg
        self.settings = settings or cfg.solver
        self.window = SlidingWindow(cfg)
        self.window.input_lookup = self._input_at
        P0 = (p_init or cfg.initial_params).as_array()
        self.P = np.clip(P0, cfg.bounds.full_min(), cfg.bounds.full_max())
        self.rows: list[OutputRow] = []
        self.reports: list[SolveReport] = []
        self.param_history: list[tuple[float, np.ndarray]] = []
        self.counters = {
            "imu": 0, "steering": 0, "ref_vel": 0, "scans": 0,
            "stale_scans": 0, "stale_events": 0, "doppler_accepted": 0,
            "doppler_rejected": 0, "zv_states": 0, "solves": 0,
            "watchdog_solves": 0, "delta_clamped": 0,
        }
        self._imu_buffer: deque[ImuSample] = deque()
        self._input_hist: deque[InputSample] = deque()
        self._latest_delta = 0.0
        self._standstill = zupt.INITIAL_STANDSTILL
        self.attitude: zupt.AttitudeEstimate | None = None
        self.attitude_measured: zupt.AttitudeEstimate | None = None
        self._speed_proxy: float | None = None
        self._have_fix = False
        self._next_grid_t: float | None = None
        self._last_solve_t: float | None = None
        self._lam = self.settings.lm_lambda_init
        self._warned_tilt = False

    # -- input bookkeeping ------------------------------------------------

    def _input_at(self, t: float) -> InputSample | None:
        best = None
        for u in reversed(self._input_hist):
            if u.t <= t + _T_EPS:
                best = u
                break
        return best

    def _current_input(self, t: float) -> InputSample:
        u = self._input_at(t)
        if u is None:
            return InputSample(t, 0.0, 0.0, 0.0, self._latest_delta)
        return u

    def _note_imu(self, ev: ImuSample) -> None:
        self.counters["imu"] += 1
        buf = self._imu_buffer
        buf.append(ev)
        horizon = self.cfg.thresholds.T_stop + 0.5
        while buf and buf[0].t < ev.t - horizon:
            buf.popleft()
        u = InputSample(ev.t, ev.ax, ev.ay, ev.r, self._latest_delta)
        hist = self._input_hist
        hist.append(u)
        while hist and hist[0].t < ev.t - 1.0:
            hist.popleft()
        self._update_standstill(ev)

    def _note_steering(self, ev: SteeringSample) -> None:
        self.counters["steering"] += 1
        delta = ev.delta / self.cfg.steering_ratio
        if abs(delta) > self.cfg.delta_max:
            self.counters["delta_clamped"] += 1
            delta = math.copysign(self.cfg.delta_max, delta)
        self._latest_delta = delta

    # -- standstill / attitude --------------------------------------------

    def _update_standstill(self, ev: ImuSample) -> None:
        if self._have_fix and self.window.states:
            x = self.window.states[-1].x
            speed = math.hypot(x[0], x[1])
        else:
            speed = self._speed_proxy
        comp = zupt.accel_magnitude_deviation(ev.ax, ev.ay, ev.az,
                                              self.cfg.g)
        prev = self._standstill
        self._standstill = zupt.update_standstill(prev, speed, comp, ev.t,
                                                  self.cfg)
        if self._standstill.stationary and not prev.stationary:
            self._enter_standstill(ev.t)

    def _enter_standstill(self, t: float) -> None:
        horizon = self.cfg.thresholds.T_stop + 1e-6
        samples = [s for s in self._imu_buffer if s.t >= t - horizon]
        try:
            att = zupt.estimate_attitude(samples, self.cfg)
        except Exception:
            self.attitude = None
            return
        self.attitude_measured = att
        tilt = math.asin(min(1.0, math.hypot(att.gravity_body[0],
                                             att.gravity_body[1])
                             / self.cfg.g))
        if tilt > math.radians(3.0) and not self._warned_tilt:
            self._warned_tilt = True
        if self.cfg.assume_level_standstill:
            self.attitude = zupt.level_attitude(self.cfg.g)
        else:
            self.attitude = att

    # -- event ingestion ---------------------------------------------------

    def attach(self, ev) -> bool:
        """Route one event into the window; True when a solve is due."""
        t_ev = event_time(ev)
        if not self.window.states:
            self.window.seed(t_ev, self._current_input(t_ev))
            self._next_grid_t = t_ev + self.cfg.thresholds.dt
            self._last_solve_t = t_ev
        elif (not isinstance(ev, RadarScan)
              and t_ev < self.window.oldest_t() - _T_EPS):
            self.counters["stale_events"] += 1
            raise StaleEventError(f"event at {t_ev} predates window")

        if isinstance(ev, ImuSample):
            self._note_imu(ev)
        elif isinstance(ev, SteeringSample):
            self._note_steering(ev)
        elif isinstance(ev, ReferenceVelocity):
            self.counters["ref_vel"] += 1

        self._advance_grid(t_ev)

        if isinstance(ev, RadarScan):
            return self._attach_scan(ev)
        return False

    def _advance_grid(self, t: float) -> None:
        dt = self.cfg.thresholds.dt
        while self._next_grid_t is not None and self._next_grid_t <= t + _T_EPS:
            tg = self._next_grid_t
            ws = self.window.push_state(tg, self._current_input(tg))
            if self._standstill.stationary and self.attitude is not None:
                ax_t, ay_t = zupt.gravity_compensate(
                    ws.u.ax_meas, ws.u.ay_meas, self.attitude)
                ws.zv = (ax_t, ay_t, ws.u.r_meas)
                self.counters["zv_states"] += 1
            self._next_grid_t = tg + dt
            if (tg - self._last_solve_t
                    >= self.cfg.thresholds.watchdog_period - _T_EPS
                    and len(self.window.states) >= 2):
                self._solve_and_shift(tg, "watchdog")

    def _attach_scan(self, scan: RadarScan) -> bool:
        self.counters["scans"] += 1
        try:
            factors = radar_mod.scan_to_factors(scan, self.window, self.cfg)
        except StaleScanError:
            self.counters["stale_scans"] += 1
            return False
        self.window.doppler.extend(factors)
        self.counters["doppler_accepted"] += len(factors)
        self.counters["doppler_rejected"] += len(scan.points) - len(factors)
        if not self._have_fix:
            ls = radar_mod.ego_velocity_ls(
                scan, self.cfg.radars[scan.radar_id],
                self.cfg.thresholds.snr_min)
            if ls is not None:
                self._speed_proxy = math.hypot(ls[0], ls[1])
        return bool(factors)

    def process_event(self, ev) -> None:
        try:
            trigger = self.attach(ev)
        except StaleEventError:
            return
        if trigger:
            self._solve_and_shift(event_time(ev), "radar")
            self._have_fix = True

    def _solve_and_shift(self, t: float, trigger: str) -> None:
        _, P_new, report = solve(self.window, self.P, self.settings,
                                 self.cfg, self._lam)
        self._lam = report._lam
        self.P = P_new
        report.t = t
        report.trigger = trigger
        self.reports.append(report)
        self.counters["solves"] += 1
        if trigger == "watchdog":
            self.counters["watchdog_solves"] += 1
        self.param_history.append((t, P_new.copy()))
        for ws in self.window.shift(P_new):
            if ws.grid:
                self.rows.append(_output_row(ws, self.P, self.cfg))
        self._last_solve_t = t

    def finalize(self) -> None:
        """Flush rows for grid states still inside the window."""
        for ws in self.window.states:
            if ws.grid:
                self.rows.append(_output_row(ws, self.P, self.cfg))
        self.window.states = []
        self.window.doppler = []

    @property
    def zupt_used(self) -> bool:
        return self.counters["zv_states"] > 0


def replay_events(events, cfg: VehicleConfig,
                  settings: SolverSettings | None = None,
                  p_init: TireParamSet | None = None) -> Estimator:
    """Run the estimator over an iterable of events in arrival order.

    Cyclic garbage collection is paused during the replay; the estimator
    allocates no reference cycles and GC pauses would eat into the
    per-solve time budget.
    """
    est = Estimator(cfg, settings=settings, p_init=p_init)
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for ev in events:
            est.process_event(ev)
    finally:
        if gc_was_enabled:
            gc.enable()
    est.finalize()
    return est
