"""Command-line entry points: `sim` generates scenario logs, `estimate`
replays a log through the estimator, `metrics` scores an estimate against
truth, and `bench` times the solver.

Exit codes: 0 success, 1 usage, 2 I/O or unusable input file, 3 numeric or
estimation failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from radgrip import mhe, simgen
from radgrip.core import (AlignmentError, ConfigError, ESTIMATE_CSV_HEADER,
                          EstimatorError, IoError, ParseError,
                          RangeError, SchemaError, TRUTH_CSV_HEADER,
                          TireParamSet, UsageError, VehicleConfig,
                          config_hash, load_config, parse_event,
                          serialize_event)


def _fmt(v) -> str:
    if v is None:
        return ""
    return f"{v:.10g}"


# ---------------------------------------------------------------------------
# sim
# ---------------------------------------------------------------------------

def cmd_sim(scenario: str, config_path: str | None, seed: int,
            out_dir: str) -> dict:
    """Generate one preset scenario; writes log, truth and a manifest."""
    cfg = load_config(config_path)
    try:
        spec = simgen.make_scenario(scenario, cfg, seed=seed)
    except KeyError:
        raise UsageError(
            f"unknown scenario {scenario!r}; presets: "
            + ", ".join(simgen.PRESET_NAMES))
    events, truth = simgen.run_scenario(spec.script, spec.p_truth,
                                        spec.noise, cfg)
    try:
        os.makedirs(out_dir, exist_ok=True)
        log_path = os.path.join(out_dir, f"{scenario}_log.jsonl")
        truth_path = os.path.join(out_dir, f"{scenario}_truth.csv")
        manifest_path = os.path.join(out_dir, f"{scenario}_manifest.json")
        with open(log_path, "w", encoding="utf-8") as fh:
            for ev in events:
                fh.write(serialize_event(ev) + "\n")
        write_truth_csv(truth_path, truth, cfg.thresholds.dt)
        manifest = {
            "scenario": scenario,
            "seed": seed,
            "config_sha256": config_hash(cfg),
            "log": os.path.basename(log_path),
            "truth": os.path.basename(truth_path),
            "events": len(events),
            "duration_s": float(truth.t[-1]),
        }
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as e:
        raise IoError(f"cannot write outputs to {out_dir!r}: {e}") from e
    return manifest


def write_truth_csv(path: str, truth: simgen.TruthTrajectory,
                    dt: float) -> None:
    stride = max(1, int(round(dt / truth.dt_sim)))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(TRUTH_CSV_HEADER + "\n")
        for i in range(0, len(truth.t), stride):
            fh.write(",".join(_fmt(v) for v in (
                truth.t[i], truth.vx[i], truth.vy[i], truth.r[i],
                truth.ax[i], truth.ay[i], truth.delta[i],
                truth.Fyf[i], truth.Fyr[i],
                truth.alpha_f[i], truth.alpha_r[i])) + "\n")


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------

def read_events(path: str):
    """Yield events from a JSONL log, reporting errors with line numbers."""
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot read log {path!r}: {e}") from e
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield parse_event(line)
            except (ParseError, SchemaError, RangeError) as e:
                raise type(e)(f"{path}:{lineno}: {e}") from e


def solve_time_stats(reports) -> dict:
    if not reports:
        return {"count": 0}
    wt = np.array([r.wall_time for r in reports])
    its = np.array([r.iterations for r in reports])
    return {
        "count": int(len(wt)),
        "mean_ms": float(wt.mean() * 1e3),
        "p50_ms": float(np.percentile(wt, 50) * 1e3),
        "p99_ms": float(np.percentile(wt, 99) * 1e3),
        "max_ms": float(wt.max() * 1e3),
        "max_iterations": int(its.max()),
    }


def cmd_estimate(log_path: str, config_path: str | None, out_csv: str,
                 randomize_params: int | None = None,
                 quiet: bool = False) -> mhe.Estimator:
    """Replay a log in arrival order, writing one row per 10 ms state."""
    cfg = load_config(config_path)
    p_init = None
    if randomize_params is not None:
        rng = np.random.default_rng(randomize_params)
        lo, hi = cfg.bounds.full_min(), cfg.bounds.full_max()
        p_init = TireParamSet.from_array(rng.uniform(lo, hi))
    est = mhe.replay_events(read_events(log_path), cfg, p_init=p_init)
    try:
        with open(out_csv, "w", encoding="utf-8") as fh:
            fh.write(ESTIMATE_CSV_HEADER + "\n")
            for row in est.rows:
                deg = math.degrees
                fh.write(",".join(_fmt(v) for v in (
                    row.t, row.vx, row.vy, row.r, row.bx, row.by, row.br,
                    row.alpha_f, row.alpha_r, row.Fyf, row.Fyr,
                    row.BCD_f, row.BCD_r, row.beta)) + "\n")
        summary = {
            "log": os.path.basename(log_path),
            "config_sha256": config_hash(cfg),
            "rows": len(est.rows),
            "counters": est.counters,
            "solve_time": solve_time_stats(est.reports),
        }
        with open(out_csv + ".summary.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as e:
        raise IoError(f"cannot write estimate CSV {out_csv!r}: {e}") from e
    if not est.zupt_used:
        print("warning: biases unverified (log has no standstill preamble)",
              file=sys.stderr)
    if not quiet:
        st = summary["solve_time"]
        if st.get("count"):
            print(f"{len(est.rows)} rows, {st['count']} solves, "
                  f"mean {st['mean_ms']:.2f} ms, p99 {st['p99_ms']:.2f} ms, "
                  f"max {st['max_ms']:.2f} ms, "
                  f"max iterations {st['max_iterations']}")
        else:
            print(f"{len(est.rows)} rows, no solves triggered")
    return est


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

@dataclass
class MetricsReport:
    channels: dict              # name -> {max_abs_err, rmse, samples}
    param_convergence_time: float | None
    solve_time: dict | None

    def to_dict(self) -> dict:
        return {
            "channels": self.channels,
            "param_convergence_time": self.param_convergence_time,
            "solve_time": self.solve_time,
        }


def _read_csv(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            rows = [line.strip().split(",") for line in fh if line.strip()]
    except OSError as e:
        raise IoError(f"cannot read CSV {path!r}: {e}") from e
    cols = {}
    for j, name in enumerate(header):
        vals = [(r[j] if j < len(r) else "") for r in rows]
        cols[name] = np.array(
            [float(v) if v else np.nan for v in vals])
    return cols


def compute_metrics(est_csv: str, truth_csv: str,
                    cfg: VehicleConfig) -> MetricsReport:
    """Nearest-neighbour alignment within 5 ms, then per-channel errors.

    Slip and force channels are scored only where the truth speed exceeds
    the gate and the estimate emitted a value; velocities everywhere.
    """
    est = _read_csv(est_csv)
    tru = _read_csv(truth_csv)
    te, tt = est["t"], tru["t"]
    if len(te) == 0 or len(tt) == 0:
        raise AlignmentError("empty CSV")
    idx = np.searchsorted(tt, te)
    idx = np.clip(idx, 0, len(tt) - 1)
    idx_lo = np.clip(idx - 1, 0, len(tt) - 1)
    use_lo = np.abs(tt[idx_lo] - te) < np.abs(tt[idx] - te)
    idx = np.where(use_lo, idx_lo, idx)
    ok = np.abs(tt[idx] - te) <= 5e-3
    if not np.any(ok):
        raise AlignmentError("estimate and truth time ranges do not overlap")
    idx = idx[ok]
    speed_ok = np.hypot(tru["vx"][idx], tru["vy"][idx]) \
        > cfg.thresholds.V_Fy_min
    channels = {}
    for name, gated in (("vx", False), ("vy", False), ("alpha_f", True),
                        ("alpha_r", True), ("Fyf", True), ("Fyr", True)):
        e = est[name][ok]
        t_ = tru[name][idx]
        mask = np.isfinite(e) & np.isfinite(t_)
        if gated:
            mask &= speed_ok
        if not np.any(mask):
            channels[name] = {"max_abs_err": None, "rmse": None,
                              "samples": 0}
            continue
        err = e[mask] - t_[mask]
        channels[name] = {
            "max_abs_err": float(np.abs(err).max()),
            "rmse": float(np.sqrt(np.mean(err * err))),
            "samples": int(mask.sum()),
        }
    conv = _param_convergence_time(est)
    solve_time = None
    summary_path = est_csv + ".summary.json"
    if os.path.exists(summary_path):
        with open(summary_path, "r", encoding="utf-8") as fh:
            solve_time = json.load(fh).get("solve_time")
    return MetricsReport(channels, conv, solve_time)


def _param_convergence_time(est: dict) -> float | None:
    """Earliest time after which both BCD channels stay within 5 percent
    of their final values."""
    t = est["t"]
    conv = t[0] if len(t) else None
    for name in ("BCD_f", "BCD_r"):
        v = est[name]
        fin = v[np.isfinite(v)]
        if len(fin) == 0:
            return None
        final = fin[-1]
        tol = 0.05 * abs(final) + 1e-12
        bad = np.where(np.isfinite(v) & (np.abs(v - final) > tol))[0]
        t_ch = t[bad[-1] + 1] if len(bad) and bad[-1] + 1 < len(t) else t[0]
        if len(bad) and bad[-1] + 1 >= len(t):
            return None
        conv = max(conv, t_ch)
    return float(conv)


def cmd_metrics(est_csv: str, truth_csv: str, config_path: str | None,
                json_out: str | None = None) -> MetricsReport:
    cfg = load_config(config_path)
    report = compute_metrics(est_csv, truth_csv, cfg)
    print(f"{'channel':<10}{'max_abs_err':>14}{'rmse':>14}{'samples':>10}")
    for name, ch in report.channels.items():
        mx = "n/a" if ch["max_abs_err"] is None else f"{ch['max_abs_err']:.5g}"
        rm = "n/a" if ch["rmse"] is None else f"{ch['rmse']:.5g}"
        print(f"{name:<10}{mx:>14}{rm:>14}{ch['samples']:>10}")
    conv = report.param_convergence_time
    print(f"param convergence time: "
          f"{'n/a' if conv is None else f'{conv:.2f} s'}")
    if report.solve_time and report.solve_time.get("count"):
        st = report.solve_time
        print(f"solve time: mean {st['mean_ms']:.2f} ms, "
              f"p99 {st['p99_ms']:.2f} ms, max {st['max_ms']:.2f} ms")
    if json_out:
        try:
            with open(json_out, "w", encoding="utf-8") as fh:
                json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as e:
            raise IoError(f"cannot write {json_out!r}: {e}") from e
    return report


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def cmd_bench(log_path: str, config_path: str | None,
              repetitions: int) -> dict:
    """Re-run the estimation pipeline, timing every solve."""
    if repetitions < 1:
        raise UsageError("repetitions must be >= 1")
    cfg = load_config(config_path)
    events = list(read_events(log_path))
    wall = []
    costs = None
    costs_identical = True
    tick_means = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        est = mhe.replay_events(events, cfg)
        total = time.perf_counter() - t0
        wall.extend(r.wall_time for r in est.reports)
        run_costs = [r.final_cost for r in est.reports]
        if costs is None:
            costs = run_costs
        elif run_costs != costs:
            costs_identical = False
        tick_means.append(total / max(len(est.rows), 1))
    wt = np.array(wall)
    out = {
        "repetitions": repetitions,
        "solves_per_rep": len(costs or []),
        "per_solve_ms": {
            "mean": float(wt.mean() * 1e3),
            "p50": float(np.percentile(wt, 50) * 1e3),
            "p99": float(np.percentile(wt, 99) * 1e3),
            "max": float(wt.max() * 1e3),
        },
        "per_tick_mean_ms": float(np.mean(tick_means) * 1e3),
        "costs_identical_across_reps": costs_identical,
    }
    ps = out["per_solve_ms"]
    print(f"{len(wt)} solves over {repetitions} reps: "
          f"mean {ps['mean']:.3f} ms, p50 {ps['p50']:.3f} ms, "
          f"p99 {ps['p99']:.3f} ms, max {ps['max']:.3f} ms")
    print(f"per-tick mean {out['per_tick_mean_ms']:.3f} ms; "
          f"cost trajectory identical across reps: {costs_identical}")
    return out


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="radgrip")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("sim", help="generate a scenario log")
    ps.add_argument("scenario")
    ps.add_argument("--config", default=None)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--out", default=".")

    pe = sub.add_parser("estimate", help="replay a log through the estimator")
    pe.add_argument("log")
    pe.add_argument("--config", default=None)
    pe.add_argument("--out", default="estimate.csv")
    pe.add_argument("--randomize-params", type=int, default=None,
                    metavar="SEED",
                    help="draw the initial tire parameters uniformly "
                         "inside the configured box")

    pm = sub.add_parser("metrics", help="score an estimate against truth")
    pm.add_argument("estimate_csv")
    pm.add_argument("truth_csv")
    pm.add_argument("--config", default=None)
    pm.add_argument("--json", default=None)

    pb = sub.add_parser("bench", help="time the solver on a log")
    pb.add_argument("log")
    pb.add_argument("--config", default=None)
    pb.add_argument("--repetitions", type=int, default=3)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "sim":
            cmd_sim(args.scenario, args.config, args.seed, args.out)
        elif args.command == "estimate":
            cmd_estimate(args.log, args.config, args.out,
                         randomize_params=args.randomize_params)
        elif args.command == "metrics":
            cmd_metrics(args.estimate_csv, args.truth_csv, args.config,
                        json_out=args.json)
        elif args.command == "bench":
            cmd_bench(args.log, args.config, args.repetitions)
        return 0
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (IoError, ParseError, SchemaError, RangeError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except EstimatorError as e:
        print(f"estimation error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
