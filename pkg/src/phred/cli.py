"""Batch driver: simulate | reduce | evaluate | bounds | sweep.

Configuration is a single JSON document; outputs are CSV/JSON files written
to --out.  All randomized estimators are seeded, so a fixed config and seed
reproduce byte-identical CSVs (measured wall-clock columns in the evaluate
CSV are the one exception).  Logging verbosity comes from the PHRED_LOG
environment variable (error|warn|info|debug).

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

import argparse
import csv
import itertools
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import basis as basis_mod
from .bounds import deim_reduction_bound, projection_bound_report
from .deim import pod_deim_ph
from .errors import ConfigError, PhredError
from .integrate import SCHEMES, IntegratorConfig, simulate
from .models import (LadderParams, TodaParams, constant_signal,
                     gaussian_pulse, ladder_network, sinusoid_signal,
                     toda_lattice)
from .phcore import WeightedMetric, validate_structure
from .reduction import error_metrics, project_ph, simulate_reduced

log = logging.getLogger("phred")

METHODS = ("pod", "h2eps", "hybrid", "pod-deim", "h2eps-deim")
METRICS = ("identity", "hessian-at-0")
_FLOAT_FMT = "{:.17e}"


def _setup_logging():
    level = os.environ.get("PHRED_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        raise ConfigError(f"PHRED_LOG must be one of {sorted(levels)}, got {level!r}")
    logging.basicConfig(level=levels[level],
                        format="%(levelname)s %(name)s: %(message)s")


@dataclass
class RunConfig:
    """Validated run configuration (see README for the JSON schema)."""

    model: str
    model_params: dict
    input_name: str
    input_params: dict
    t_span: tuple
    dt: float
    scheme: str = "implicit-midpoint"
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    method: str = "pod"
    r: int = 6
    r_pod: int = None
    r_h2: int = None
    m: int = None
    stride: int = 1
    metric: str = "hessian-at-0"
    seed: int = 0
    timing_repeats: int = 5
    test_inputs: list = field(default_factory=list)
    snapshot_t_span: tuple = None
    snapshot_dt: float = None
    h2_max_iter: int = 100
    h2_shift_tol: float = 1e-6
    sweep: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw):
        try:
            model = raw["model"]["name"]
            model_params = {k: v for k, v in raw["model"].items() if k != "name"}
            input_name = raw["input"]["name"]
            input_params = {k: v for k, v in raw["input"].items() if k != "name"}
            t_span = tuple(raw["t_span"])
            dt = float(raw["dt"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"config missing required field: {exc}") from exc
        cfg = cls(model=model, model_params=model_params,
                  input_name=input_name, input_params=input_params,
                  t_span=t_span, dt=dt)
        for name in ("scheme", "newton_tol", "newton_max_iter", "method", "r",
                     "r_pod", "r_h2", "m", "stride", "metric", "seed",
                     "timing_repeats", "test_inputs", "h2_max_iter",
                     "h2_shift_tol", "sweep"):
            if name in raw:
                setattr(cfg, name, raw[name])
        if "snapshot_t_span" in raw:
            cfg.snapshot_t_span = tuple(raw["snapshot_t_span"])
        if "snapshot_dt" in raw:
            cfg.snapshot_dt = float(raw["snapshot_dt"])
        cfg.validate()
        return cfg

    def validate(self):
        if self.model not in ("ladder", "toda"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}")
        if len(self.t_span) != 2 or not self.t_span[1] > self.t_span[0]:
            raise ConfigError("t_span must be [t0, t1] with t1 > t0")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.r < 1:
            raise ConfigError("r must be >= 1")
        if self.method == "hybrid":
            if self.r_pod is None or self.r_h2 is None:
                raise ConfigError("hybrid needs r_pod and r_h2")
            if self.r_pod + self.r_h2 != self.r:
                raise ConfigError(
                    f"hybrid split must satisfy r_pod + r_h2 = r "
                    f"({self.r_pod} + {self.r_h2} != {self.r})")
        if self.method.endswith("-deim") and self.m is None:
            raise ConfigError(f"method {self.method} requires m")


def build_system(cfg):
    if cfg.model == "ladder":
        return ladder_network(LadderParams(**cfg.model_params))
    return toda_lattice(TodaParams(**cfg.model_params))


def build_input(name, params, m_in):
    factories = {
        "const_0p1": lambda: constant_signal(0.1, m_in=m_in),
        "constant": lambda: constant_signal(m_in=m_in, **params),
        "sin_0p1": lambda: sinusoid_signal(0.1, 1.0, m_in=m_in),
        "gaussian": lambda: gaussian_pulse(m_in=m_in, **params),
        "sinusoid_ladder": lambda: sinusoid_signal(m_in=m_in, **params),
        "sinusoid": lambda: sinusoid_signal(m_in=m_in, **params),
    }
    if name not in factories:
        raise ConfigError(f"unknown input signal {name!r}")
    return factories[name]()


def _integrator(cfg):
    return IntegratorConfig(scheme=cfg.scheme, dt=cfg.dt,
                            newton_tol=cfg.newton_tol,
                            newton_max_iter=cfg.newton_max_iter)


def _snapshot_integrator(cfg):
    return IntegratorConfig(scheme=cfg.scheme, dt=cfg.snapshot_dt or cfg.dt,
                            newton_tol=cfg.newton_tol,
                            newton_max_iter=cfg.newton_max_iter)


def choose_metric(cfg, sys):
    if cfg.metric == "identity":
        return WeightedMetric.identity(sys.n)
    if sys.split_q is not None:
        return WeightedMetric(sys.split_q)
    return basis_mod.linearize(sys).metric


def build_reduced(cfg, sys, snaps):
    """Run the basis pipeline selected by cfg.method and project."""
    metric = choose_metric(cfg, sys)
    h2_log = None
    if cfg.method in ("h2eps", "hybrid", "h2eps-deim"):
        lin = basis_mod.linearize(sys)
    if cfg.method == "pod":
        bas = basis_mod.pod_ph_bases(snaps, cfg.r)
        red = project_ph(sys, bas)
    elif cfg.method == "h2eps":
        bas, h2_log = basis_mod.h2eps_ph_bases(lin, cfg.r,
                                               max_iter=cfg.h2_max_iter,
                                               shift_tol=cfg.h2_shift_tol)
        red = project_ph(sys, bas)
    elif cfg.method == "hybrid":
        pod = basis_mod.pod_ph_bases(snaps, cfg.r_pod)
        h2, h2_log = basis_mod.h2eps_ph_bases(lin, cfg.r_h2,
                                              max_iter=cfg.h2_max_iter,
                                              shift_tol=cfg.h2_shift_tol)
        bas = basis_mod.hybrid_bases(pod, h2)
        red = project_ph(sys, bas)
    elif cfg.method == "pod-deim":
        red = pod_deim_ph(sys, snaps, cfg.r, cfg.m,
                          metric=None if cfg.metric != "identity" else
                          np.ones(sys.n))
        bas = red.basis
    else:  # h2eps-deim
        h2, h2_log = basis_mod.h2eps_ph_bases(lin, cfg.r,
                                              max_iter=cfg.h2_max_iter,
                                              shift_tol=cfg.h2_shift_tol)
        red = pod_deim_ph(sys, snaps, cfg.r, cfg.m, bases=h2)
        bas = red.basis
    return red, bas, metric, h2_log


def _collect(cfg, sys):
    span = cfg.snapshot_t_span or cfg.t_span
    return basis_mod.collect_snapshots(sys, build_input(cfg.input_name,
                                                        cfg.input_params,
                                                        sys.m_in),
                                       span, _snapshot_integrator(cfg),
                                       stride=cfg.stride)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_FLOAT_FMT.format(v) if isinstance(v, float)
                             else v for v in row])


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def cmd_simulate(cfg, out_dir):
    sys_ = build_system(cfg)
    traj = simulate(sys_, build_input(cfg.input_name, cfg.input_params,
                                      sys_.m_in), cfg.t_span, _integrator(cfg))
    header = (["t"] + [f"x{i}" for i in range(sys_.n)]
              + [f"y{i}" for i in range(sys_.m_in)]
              + [f"u{i}" for i in range(sys_.m_in)])
    rows = [[float(traj.times[k])] + [float(v) for v in traj.states[k]]
            + [float(v) for v in traj.outputs[k]]
            + [float(v) for v in traj.inputs[k]]
            for k in range(traj.times.size)]
    _write_csv(os.path.join(out_dir, "trajectory.csv"), header, rows)
    log.info("wrote trajectory.csv (%d rows)", len(rows))
    return 0


def cmd_reduce(cfg, out_dir):
    sys_ = build_system(cfg)
    stage = "snapshot collection"
    try:
        snaps = _collect(cfg, sys_)
        stage = "basis construction"
        red, bas, _, h2_log = build_reduced(cfg, sys_, snaps)
        stage = "structure validation"
        report = validate_structure(red.to_system())
    except PhredError as exc:
        raise PhredError(f"[stage: {stage}] {exc}") from exc
    np.savez(os.path.join(out_dir, "basis.npz"), V=bas.V, W=bas.W,
             provenance=bas.provenance, r=bas.r)
    if hasattr(red, "deim") and red.deim is not None:
        np.savez(os.path.join(out_dir, "deim.npz"), U=red.deim.U,
                 indices=red.deim.indices, growth=red.deim.growth)
    _write_json(os.path.join(out_dir, "structure_report.json"), {
        "passed": report.passed, "skew_defect": report.skew_defect,
        "sym_defect": report.sym_defect, "min_eig_r": report.min_eig_r,
        "messages": list(report.messages)})
    if h2_log is not None:
        _write_json(os.path.join(out_dir, "iteration_log.json"), {
            "converged": h2_log.converged, "warning": h2_log.warning,
            "n_iter": h2_log.n_iter, "changes": h2_log.changes,
            "final_change": h2_log.final_change,
            "shifts_re": np.real(h2_log.shifts),
            "shifts_im": np.imag(h2_log.shifts)})
    log.info("reduce: method=%s r=%d passed=%s", cfg.method, bas.r, report.passed)
    return 0


def _timed_runs(fn, repeats):
    """Median wall time of `repeats` runs after one warm-up; returns
    (result, seconds)."""
    result = fn()
    times = []
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return result, float(np.median(times))


def cmd_evaluate(cfg, out_dir):
    sys_ = build_system(cfg)
    icfg = _integrator(cfg)
    snaps = _collect(cfg, sys_)
    red, bas, metric, _ = build_reduced(cfg, sys_, snaps)

    inputs = [(cfg.input_name, cfg.input_params)]
    inputs += [(ti["name"], {k: v for k, v in ti.items() if k != "name"})
               for ti in cfg.test_inputs]
    rows = []
    summary = {}
    for name, params in inputs:
        u = build_input(name, params, sys_.m_in)
        full, t_full = _timed_runs(
            lambda: simulate(sys_, u, cfg.t_span, icfg), cfg.timing_repeats)
        rtraj, t_red = _timed_runs(
            lambda: simulate_reduced(red, u, cfg.t_span, icfg),
            cfg.timing_repeats)
        em = error_metrics(full, rtraj, bas, metric)
        rows.append([cfg.method, bas.r, cfg.m if cfg.m is not None else 0,
                     name, em.avg_rel_output_error, em.avg_rel_state_error,
                     em.l2_output_error, em.l2_state_error_q,
                     t_full, t_red, t_full / t_red])
        summary[name] = {
            "avg_rel_output_error": em.avg_rel_output_error,
            "avg_rel_state_error": em.avg_rel_state_error,
            "l2_output_error": em.l2_output_error,
            "l2_state_error_q": em.l2_state_error_q,
            "wall_time_full_s": t_full, "wall_time_reduced_s": t_red,
            "speedup": t_full / t_red}
    _write_csv(os.path.join(out_dir, "errors.csv"),
               ["method", "r", "m", "input", "avg_rel_output_error",
                "avg_rel_state_error", "L2_output_err", "L2_state_err_Q",
                "wall_time_full_s", "wall_time_reduced_s", "speedup"], rows)
    _write_json(os.path.join(out_dir, "summary.json"),
                {"method": cfg.method, "r": bas.r, "m": cfg.m,
                 "inputs": summary})
    return 0


def cmd_bounds(cfg, out_dir):
    sys_ = build_system(cfg)
    icfg = _integrator(cfg)
    snaps = _collect(cfg, sys_)
    red, bas, metric, _ = build_reduced(cfg, sys_, snaps)
    u = build_input(cfg.input_name, cfg.input_params, sys_.m_in)

    if cfg.method.endswith("-deim"):
        exact = project_ph(sys_, red.basis)
        tr_exact = simulate_reduced(exact, u, cfg.t_span, icfg)
        tr_deim = simulate_reduced(red, u, cfg.t_span, icfg)
        rep = deim_reduction_bound(sys_, red, red.split, red.deim, tr_exact,
                                   tr_deim, seed=cfg.seed)
        payload = {
            "kind": "deim-reduction-bound", "eps_h": rep.eps_h,
            "alpha": rep.alpha, "beta": rep.beta, "gamma": rep.gamma,
            "delta": rep.delta, "rho_min": rep.rho_min,
            "methods": rep.methods,
            "state_bound_final": rep.state_bound[-1],
            "output_bound_final": rep.output_bound[-1],
            "measured_state_final": rep.measured_state[-1],
            "measured_output_final": rep.measured_output[-1],
            "state_violations": rep.state_violations,
            "output_violations": rep.output_violations,
            "times": rep.times, "state_bound": rep.state_bound,
            "output_bound": rep.output_bound,
            "measured_state": rep.measured_state,
            "measured_output": rep.measured_output}
    else:
        full = simulate(sys_, u, cfg.t_span, icfg)
        rtraj = simulate_reduced(red, u, cfg.t_span, icfg)
        rep = projection_bound_report(sys_, bas, metric, full, rtraj,
                                      seed=cfg.seed)
        payload = {"kind": "projection-bound"}
        for name in ("T", "eps_x_sq", "eps_f_sq", "ic_dev_sq", "alpha",
                     "beta", "gamma", "delta", "lip_f", "c_alpha_t",
                     "big_c_alpha_t", "c_x", "c_f", "c_0", "c_x_out",
                     "c_f_out", "c_0_out", "state_bound", "output_bound",
                     "measured_state_err_sq", "measured_output_err_sq"):
            payload[name] = getattr(rep, name)
        payload["methods"] = rep.methods
    _write_json(os.path.join(out_dir, "bounds.json"), payload)
    return 0


def _sweep_points(cfg):
    sweep = cfg.sweep or {}
    methods = sweep.get("methods", [cfg.method])
    rs = sweep.get("r", [cfg.r])
    m_factors = sweep.get("m_factor", [3])
    pod_fracs = sweep.get("pod_fraction", [0.5])
    points = []
    for method, r, mf, frac in itertools.product(methods, rs, m_factors,
                                                 pod_fracs):
        p = {"method": method, "r": int(r)}
        if method.endswith("-deim"):
            p["m"] = int(mf * r)
        if method == "hybrid":
            p["r_pod"] = max(1, int(round(frac * r)))
            p["r_h2"] = int(r) - p["r_pod"]
            if p["r_h2"] < 1:
                continue
        points.append(p)
    # drop duplicates from the cross product (m_factor only matters for deim
    # methods, pod_fraction only for hybrid)
    uniq = []
    for p in points:
        if p not in uniq:
            uniq.append(p)
    return uniq


def _sweep_one(cfg, point):
    sub = RunConfig(**{**cfg.__dict__})
    sub.method = point["method"]
    sub.r = point["r"]
    sub.m = point.get("m")
    sub.r_pod = point.get("r_pod")
    sub.r_h2 = point.get("r_h2")
    sub.validate()
    sys_ = build_system(sub)
    icfg = _integrator(sub)
    snaps = _collect(sub, sys_)
    red, bas, metric, _ = build_reduced(sub, sys_, snaps)
    u = build_input(sub.input_name, sub.input_params, sys_.m_in)
    full = simulate(sys_, u, sub.t_span, icfg)
    rtraj = simulate_reduced(red, u, sub.t_span, icfg)
    em = error_metrics(full, rtraj, bas, metric)
    rows = [[point["method"], bas.r, point.get("m", 0),
             point.get("r_pod", 0), point.get("r_h2", 0), sub.input_name,
             em.avg_rel_output_error, em.avg_rel_state_error,
             em.l2_output_error, em.l2_state_error_q]]
    for ti in sub.test_inputs:
        name = ti["name"]
        params = {k: v for k, v in ti.items() if k != "name"}
        u_t = build_input(name, params, sys_.m_in)
        full_t = simulate(sys_, u_t, sub.t_span, icfg)
        rtraj_t = simulate_reduced(red, u_t, sub.t_span, icfg)
        em_t = error_metrics(full_t, rtraj_t, bas, metric)
        rows.append([point["method"], bas.r, point.get("m", 0),
                     point.get("r_pod", 0), point.get("r_h2", 0), name,
                     em_t.avg_rel_output_error, em_t.avg_rel_state_error,
                     em_t.l2_output_error, em_t.l2_state_error_q])
    return rows


def cmd_sweep(cfg, out_dir, threads=1):
    points = _sweep_points(cfg)
    log.info("sweep over %d points", len(points))
    all_rows = []
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for rows in pool.map(_sweep_one, itertools.repeat(cfg), points):
                all_rows.extend(rows)
    else:
        for point in points:
            all_rows.extend(_sweep_one(cfg, point))
    _write_csv(os.path.join(out_dir, "sweep.csv"),
               ["method", "r", "m", "r_pod", "r_h2", "input",
                "avg_rel_output_error", "avg_rel_state_error",
                "L2_output_err", "L2_state_err_Q"], all_rows)
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="phred",
        description="Structure-preserving reduction of port-Hamiltonian models")
    parser.add_argument("command",
                        choices=["simulate", "reduce", "evaluate", "bounds",
                                 "sweep"])
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="parallel workers (sweep only)")
    args = parser.parse_args(argv)

    try:
        _setup_logging()
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        cfg = RunConfig.from_dict(raw)
        if args.seed is not None:
            cfg.seed = args.seed
        np.random.seed(cfg.seed)
        os.makedirs(args.out, exist_ok=True)
        handlers = {"simulate": cmd_simulate, "reduce": cmd_reduce,
                    "evaluate": cmd_evaluate, "bounds": cmd_bounds}
        if args.command == "sweep":
            return cmd_sweep(cfg, args.out, threads=args.threads)
        return handlers[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except PhredError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
