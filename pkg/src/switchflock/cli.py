"""Command-line front end: simulate / certify / sweep / validate.

Runs are described by a single JSON config (no environment configuration,
so a run is reproducible from one artifact).  Numeric CSV fields use the
shortest round-trip representation, which makes byte-identical reruns
achievable and expected.

Exit codes: 0 success, 2 blow-up during integration, 3 config or
validation error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics, pairwise
from .dynamics import CS, HK, ModelSpec, SystemState
from .errors import (
    GoodFloorViolated,
    NonFiniteState,
    RateNotContractive,
    SwitchflockError,
)
from .integrator import Trajectory, integrate
from .kernels import RADIAL, lower_bound_on_ball, make_kernel
from .schedule import (
    SwitchingSchedule,
    constant_lengths,
    exp_rate,
    explicit_schedule,
    geometric_bad,
    uniform_bound,
    validate,
)

_KERNEL_KEYS = ("sup_norm_K", "lipschitz_L", "nonincreasing", "analytic_floor")


def _fmt(x) -> str:
    return repr(float(x))


def build_kernel(cfg: dict):
    cfg = dict(cfg)
    family = cfg.pop("family")
    kw = {k: cfg.pop(k) for k in _KERNEL_KEYS if k in cfg}
    return make_kernel(family, **kw, **cfg)


def build_schedule(cfg: dict, horizon: float) -> SwitchingSchedule:
    family = cfg.get("family")
    if family == "explicit":
        return explicit_schedule(cfg["times"], horizon)
    if family == "constant":
        return constant_lengths(cfg["good_len"], cfg["bad_len"], horizon)
    if family == "geometric":
        return geometric_bad(cfg["good_len"], cfg["bad0"], cfg["ratio"], horizon)
    raise ValueError("unknown schedule family %r" % (family,))


def draw_initial_state(cfg: dict, model: str, N: int, d: int,
                       seed: int) -> SystemState:
    """Positions first, then velocities, from one seeded generator."""
    rng = np.random.default_rng(seed)
    init = cfg.get("init", {})
    if "positions" in init:
        x = np.asarray(init["positions"], dtype=float)
    else:
        lo, hi = init.get("positions_box", [-1.0, 1.0])
        x = rng.uniform(lo, hi, size=(N, d))
    v = None
    if model == CS:
        if "velocities" in init:
            v = np.asarray(init["velocities"], dtype=float)
        else:
            lo, hi = init.get("velocities_box", [-0.5, 0.5])
            v = rng.uniform(lo, hi, size=(N, d))
    return SystemState(positions=x, velocities=v)


class RunContext:
    """Parsed config plus the derived objects a run needs."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.model = cfg["model"]
        if self.model not in (HK, CS):
            raise ValueError("model must be 'HK' or 'CS'")
        self.N = int(cfg["N"])
        self.d = int(cfg["d"])
        self.horizon = float(cfg["horizon"])
        self.h_max = float(cfg.get("h_max", 1e-3))
        self.record_stride = int(cfg.get("record_stride", 1))
        self.seed = int(cfg.get("seed", 0))
        self.kernel = build_kernel(cfg["kernel"])
        self.schedule = build_schedule(cfg["schedule"], self.horizon)
        tols = cfg.get("tolerances", {})
        self.tol_cert = tols.get("tol_cert")
        self.tol_lyap = tols.get("tol_lyap", diagnostics.TOL_LYAP)
        self.eps_v = tols.get("eps_v", 1e-3)
        self.directions_seed = int(tols.get("directions_seed", 0))
        self.state0 = draw_initial_state(cfg, self.model, self.N, self.d,
                                         self.seed)
        if self.state0.positions.shape != (self.N, self.d):
            raise ValueError("initial positions have the wrong shape")
        self.spec = ModelSpec(self.model, self.kernel, self.schedule,
                              self.N, self.d)

    @property
    def K(self) -> float:
        return self.kernel.sup_norm


def _derive_constants(ctx: RunContext):
    """Validation -> uniform bound -> kernel floor -> full validation.

    The kernel floor needs the uniform bound, which needs the validated
    repulsion series; this is the one place the order matters.
    """
    validation = validate(ctx.schedule, ctx.K, psi0=None, model=ctx.model)
    if ctx.model == CS and validation.good_floor_ok is False:
        floor = 1.0 / ctx.K
        for iv in ctx.schedule.intervals():
            if iv.sign == 1 and math.isfinite(iv.end) and iv.length <= floor:
                raise GoodFloorViolated(iv.index, iv.start, iv.end, floor)
        raise GoodFloorViolated(0, 0.0,
                                ctx.schedule.meta.get("good_len", 0.0), floor)
    arr = ctx.state0.velocities if ctx.model == CS else ctx.state0.positions
    m0_initial = float(np.linalg.norm(arr, axis=1).max())
    M0 = psi0 = None
    if math.isfinite(validation.bad_total):
        M0 = uniform_bound(validation, ctx.K, m0_initial, variant="state")
    if ctx.model == HK:
        if ctx.kernel.analytic_floor is not None:
            psi0 = ctx.kernel.analytic_floor
        elif M0 is not None:
            radius = 2.0 * M0 if ctx.kernel.form == RADIAL else M0
            psi0 = lower_bound_on_ball(ctx.kernel, radius, dim=ctx.d).value
        validation = validate(ctx.schedule, ctx.K, psi0=psi0, model=ctx.model)
    return validation, M0, psi0, m0_initial


def run_simulate(cfg: dict, fault=None):
    """Validate, integrate, and summarize one run.

    ``fault`` is a test hook: {"sample": k, "agent": i, "coord": j,
    "delta": x} perturbs one recorded sample after integration.
    """
    ctx = RunContext(cfg)
    validation, M0, psi0, m0_initial = _derive_constants(ctx)
    traj = integrate(ctx.spec, ctx.state0, ctx.horizon, ctx.h_max,
                     ctx.record_stride)
    if fault:
        traj.positions[fault["sample"], fault["agent"], fault["coord"]] += \
            fault["delta"]
        traj._cache.clear()
    summary = {
        "model": ctx.model, "N": ctx.N, "d": ctx.d,
        "horizon": ctx.horizon, "h_max": ctx.h_max, "seed": ctx.seed,
        "backend": pairwise.backend(),
        "validation": validation.to_json(),
        "M0": M0, "psi0": psi0, "initial_max_norm": m0_initial,
    }
    if ctx.model == HK:
        d = diagnostics.position_diameters(traj)
        summary["d_initial"] = float(d[0])
        summary["d_final"] = float(d[-1])
    else:
        dX = diagnostics.position_diameters(traj)
        dV = diagnostics.velocity_diameters(traj)
        summary["dX_initial"] = float(dX[0])
        summary["dX_final"] = float(dX[-1])
        summary["dV_initial"] = float(dV[0])
        summary["dV_final"] = float(dV[-1])
    return ctx, traj, summary


def run_certify(cfg: dict, fault=None):
    """Run every certificate that applies to the model; returns the report."""
    ctx, traj, summary = run_simulate(cfg, fault=fault)
    validation = summary["validation"]
    M0, psi0 = summary["M0"], summary["psi0"]
    tol = ctx.tol_cert
    report = {"summary": summary, "certificates": {}}
    certs = report["certificates"]
    extra_cols = {}

    if ctx.model == HK:
        if psi0 is not None:
            certs["contraction"] = diagnostics.contraction_certificate(
                traj, ctx.schedule, ctx.K, psi0, tol=tol).to_json()
        certs["growth"] = diagnostics.growth_certificate(
            traj, ctx.schedule, ctx.K, tol=tol).to_json()
        certs["max_principle"] = diagnostics.max_principle_certificate(
            traj, ctx.schedule, seed=ctx.directions_seed, tol=tol).to_json()
        if M0 is not None:
            certs["bounds"] = diagnostics.bound_certificates(
                traj, M0, psi0, ctx.kernel, tol=tol).to_json()
        if psi0 is not None:
            try:
                rate = exp_rate(ctx.schedule, ctx.K, psi0)
            except RateNotContractive as exc:
                certs["envelope"] = {"ok": None, "available": False,
                                     "reason": str(exc)}
            else:
                env = diagnostics.envelope_certificate(traj, rate, ctx.K, tol=tol)
                certs["envelope"] = {"available": True, **env.to_json()}
                offset = math.log(2.0) / ctx.K + rate.T
                extra_cols["envelope"] = np.exp(
                    -rate.gamma * (traj.times - offset)
                ) * diagnostics.position_diameters(traj)[0]
    else:
        certs["growth"] = diagnostics.growth_certificate(
            traj, ctx.schedule, ctx.K, tol=tol).to_json()
        certs["max_principle"] = diagnostics.max_principle_certificate(
            traj, ctx.schedule, seed=ctx.directions_seed, tol=tol).to_json()
        if M0 is not None:
            certs["bounds"] = diagnostics.bound_certificates(
                traj, M0, None, ctx.kernel, tol=tol).to_json()
        T = max(s.t_end - s.t_start for s in traj.segments)
        lyap = diagnostics.lyapunov_series(traj, ctx.schedule, ctx.kernel, T,
                                           tol=ctx.tol_lyap)
        certs["lyapunov"] = lyap.to_json()
        verdict = diagnostics.flocking_detector(
            traj, ctx.kernel, ctx.schedule, ctx.eps_v, T=T, lyap=lyap,
            tol=ctx.tol_lyap)
        certs["flocking_verdict"] = verdict.to_json()
        extra_cols["D"] = lyap.D
        extra_cols["phi"] = lyap.phi
        extra_cols["L"] = lyap.L

    all_ok = all(
        c.get("ok", True) in (True, None) for c in certs.values()
    )
    report["all_ok"] = bool(all_ok)
    return ctx, traj, report, extra_cols


def write_trajectory_csv(path, traj: Trajectory, extra_cols=None) -> None:
    extra_cols = extra_cols or {}
    cols = ["t", "alpha"]
    series = [traj.times, traj.alphas]
    if traj.model == HK:
        cols.append("d")
        series.append(diagnostics.position_diameters(traj))
    else:
        cols += ["dX", "dV"]
        series.append(diagnostics.position_diameters(traj))
        series.append(diagnostics.velocity_diameters(traj))
    for name, values in extra_cols.items():
        cols.append(name)
        series.append(np.asarray(values))
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(len(traj.times)):
            row = [
                _fmt(s[i]) if c != "alpha" else str(int(s[i]))
                for c, s in zip(cols, series)
            ]
            fh.write(",".join(row) + "\n")


def _write_json(path, obj) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _load_config(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = Path(args.out)
    try:
        ctx, traj, summary = run_simulate(cfg)
    except NonFiniteState as exc:
        print("blow-up: %s" % exc, file=sys.stderr)
        return 2
    except (SwitchflockError, ValueError, KeyError) as exc:
        print("config/validation error: %s" % exc, file=sys.stderr)
        return 3
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(out / "trajectory.csv", traj)
    _write_json(out / "summary.json", summary)
    return 0


def cmd_certify(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = Path(args.out)
    try:
        ctx, traj, report, extra_cols = run_certify(cfg)
    except NonFiniteState as exc:
        print("blow-up: %s" % exc, file=sys.stderr)
        return 2
    except (SwitchflockError, ValueError, KeyError) as exc:
        print("config/validation error: %s" % exc, file=sys.stderr)
        return 3
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(out / "trajectory.csv", traj, extra_cols)
    _write_json(out / "summary.json", report["summary"])
    _write_json(out / "certificates.json",
                {"all_ok": report["all_ok"],
                 "certificates": report["certificates"]})
    print("all_ok:", report["all_ok"])
    return 0 if report["all_ok"] else 1


def _set_by_path(cfg: dict, dotted: str, value) -> None:
    node = cfg
    parts = dotted.split(".")
    for part in parts[:-1]:
        node = node[part]
    if parts[-1] not in node:
        raise KeyError("config has no field %r" % dotted)
    node[parts[-1]] = value


def _sweep_worker(payload):
    index, value, cfg, out_dir = payload
    out = Path(out_dir) / ("run_%03d" % index)
    out.mkdir(parents=True, exist_ok=True)
    row = {"index": index, "value": value, "d_final": math.nan,
           "dV_final": math.nan, "all_ok": False, "error": ""}
    try:
        ctx, traj, report, extra_cols = run_certify(cfg)
        write_trajectory_csv(out / "trajectory.csv", traj, extra_cols)
        _write_json(out / "summary.json", report["summary"])
        _write_json(out / "certificates.json",
                    {"all_ok": report["all_ok"],
                     "certificates": report["certificates"]})
        summary = report["summary"]
        row["d_final"] = summary.get("d_final", summary.get("dX_final", math.nan))
        row["dV_final"] = summary.get("dV_final", math.nan)
        row["all_ok"] = report["all_ok"]
    except Exception as exc:  # recorded, sweep continues
        row["error"] = "%s: %s" % (type(exc).__name__, exc)
    return row


def run_sweep(cfg: dict, axis: str, values, out_dir, max_workers=4):
    payloads = []
    for index, value in enumerate(values):
        sub = json.loads(json.dumps(cfg))
        _set_by_path(sub, axis, value)
        sub["seed"] = int(np.random.SeedSequence(
            (int(cfg.get("seed", 0)), index)).generate_state(1)[0])
        payloads.append((index, value, sub, str(out_dir)))
    if not payloads:
        return []
    if len(payloads) == 1:
        return [_sweep_worker(payloads[0])]
    with ProcessPoolExecutor(max_workers=min(max_workers, len(payloads))) as ex:
        rows = list(ex.map(_sweep_worker, payloads))
    return sorted(rows, key=lambda r: r["index"])


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()] \
            if args.values else []
    except ValueError:
        print("values must be a comma-separated list of numbers", file=sys.stderr)
        return 3
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_sweep(cfg, args.axis, values, out)
    with open(out / "aggregate.csv", "w", newline="\n") as fh:
        fh.write("value,d_final,dV_final,all_ok,error\n")
        for row in rows:
            fh.write("%s,%s,%s,%s,%s\n" % (
                _fmt(row["value"]), _fmt(row["d_final"]),
                _fmt(row["dV_final"]), str(row["all_ok"]).lower(),
                row["error"].replace(",", ";")))
    return 0


def cmd_validate(args) -> int:
    cfg = _load_config(args.config)
    try:
        kernel = build_kernel(cfg["kernel"])
        sch = build_schedule(cfg["schedule"], float(cfg["horizon"]))
        psi0 = kernel.analytic_floor
        report = validate(sch, kernel.sup_norm, psi0=psi0,
                          model=cfg.get("model", HK),
                          raise_on_violation=False)
    except (SwitchflockError, ValueError, KeyError) as exc:
        print("config/validation error: %s" % exc, file=sys.stderr)
        return 3
    print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    return 0 if report.bad_cap_ok and report.good_floor_ok is not False else 3


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="switchflock",
        description="Simulate and certify consensus/flocking dynamics whose "
                    "interaction sign alternates between attraction and "
                    "repulsion on a prescribed interval sequence.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_out=True):
        p.add_argument("--config", required=True, help="JSON run config")
        if with_out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")

    p_sim = sub.add_parser("simulate", help="integrate and write CSV/JSON")
    add_common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_cert = sub.add_parser("certify", help="simulate plus every certificate")
    add_common(p_cert)
    p_cert.set_defaults(func=cmd_certify)

    p_sweep = sub.add_parser("sweep", help="one certified run per axis value")
    add_common(p_sweep)
    p_sweep.add_argument("--axis", required=True,
                         help="dotted config path, e.g. schedule.bad0")
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated numeric values")
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="schedule admissibility only")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(func=cmd_validate)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
