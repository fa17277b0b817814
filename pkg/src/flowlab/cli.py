"""Command line entry point.

Subcommands:
  run      evolve one configured experiment and emit reports
  sweep    run a config over a grid of parameter overrides
  certify  structural certificate for a flow or norm id
  list     show catalog ids, initial-data kinds and check types

Outputs are deterministic: given the same config and seed the emitted
manifest, field CSVs and report JSONs are byte-identical.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys

import numpy as np

from . import barriers, finsler, flows, verify
from .config import CHECK_TYPES, INITIAL_KINDS, ConfigError, ExperimentConfig, load_config
from .solver import SolverError, evolve


def _build_check(cfg: ExperimentConfig, name: str, params: dict, traj, flow):
    ctype = params["type"]
    if ctype == "heat_zero_counting":
        return verify.heat_zero_counting_gradient(
            traj, M=params["M"], c=params["c"],
            rel_tol=params.get("rel_tol", 0.02),
            tail_floor=params.get("tail_floor", 0.0))
    if ctype == "double_coordinate":
        b = barriers.PsiBarrier(c=params["c"])
        t_window = None
        if "t_lo" in params or "t_hi" in params:
            t_window = (params.get("t_lo", 0.0), params.get("t_hi", np.inf))
        return verify.double_coordinate_defect(
            traj, b, params["M"], region=params.get("region", "full"),
            t_window=t_window)
    if ctype == "convergence":
        kind = params.get("modulus", "lipschitz")
        if kind == "lipschitz":
            omega = verify.lipschitz_modulus(params["L"])
        elif kind == "holder":
            omega = verify.holder_modulus(params["alpha"], params.get("C", 1.0))
        else:
            raise ConfigError(f"check:{name}.modulus", f"unknown modulus {kind!r}")
        return verify.convergence_to_initial_data(
            traj, omega, grid_tol=params.get("grid_tol", 0.0))
    if ctype == "eh_bound":
        return verify.eh_bound_check(
            traj, params["M"], kind=params.get("kind", "periodic"),
            c=params["c"], q=params.get("q", 2.0), R=params.get("R"),
            T_prime=params.get("T_prime", np.inf),
            t_min=params.get("t_min", 0.0),
            grid_tol=params.get("grid_tol", 0.0))
    if ctype == "gradient_bound":
        coeff = params["coeff"]
        power = params.get("power", -0.5)
        t_window = None
        if "t_lo" in params or "t_hi" in params:
            t_window = (params.get("t_lo", 0.0), params.get("t_hi", np.inf))
        return verify.gradient_bound_check(
            traj, lambda t: coeff * t ** power,
            grid_tol=params.get("grid_tol", 0.0), t_window=t_window)
    raise ConfigError(f"check:{name}.type", f"unknown check type {ctype!r}")


def run_experiment(cfg: ExperimentConfig, out_dir: str,
                   assert_checks: bool = True) -> int:
    """Evolve, check, and write manifest/fields/reports/summary.

    Returns a process exit code: 0 on success, 1 if an asserted check failed.
    """
    os.makedirs(out_dir, exist_ok=True)
    np.random.default_rng(cfg.seed)  # reserved for stochastic initial data

    flow = cfg.build_flow()
    u0 = cfg.build_initial()
    bc = cfg.build_bc()
    traj = evolve(flow, u0, bc, cfg.plan, cfg.output_times)

    traj.export(out_dir, flow_id=cfg.flow_id, bc=cfg.bc_kind,
                extra={"seed": cfg.seed,
                       "initial": {"kind": cfg.initial_kind, **cfg.initial_params},
                       "checks": sorted(cfg.checks)})

    reports_dir = os.path.join(out_dir, "reports")
    os.makedirs(reports_dir, exist_ok=True)
    lines = []
    failed_asserted = False
    for name in sorted(cfg.checks):
        params = cfg.checks[name]
        try:
            rep = _build_check(cfg, name, params, traj, flow)
        except (verify.PreconditionError, KeyError) as e:
            lines.append(f"ERROR {name}: {e}")
            failed_asserted = failed_asserted or params.get("assert", True)
            continue
        rep.to_json(os.path.join(reports_dir, f"{name}.json"))
        line = rep.summary_line()
        if not params.get("assert", True):
            line += "  (report-only)"
        elif not rep.passed:
            failed_asserted = True
        lines.append(f"{name}: {line}")

    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        fh.write(f"flow={cfg.flow_id} bc={cfg.bc_kind} seed={cfg.seed}\n")
        fh.write(f"steps={traj.dt_stats.get('n_steps')} "
                 f"snapshots={len(traj.snapshots)}\n")
        for line in lines:
            fh.write(line + "\n")

    for line in lines:
        print(line)
    return 1 if (assert_checks and failed_asserted) else 0


def _parse_overrides(spec: str) -> dict:
    """"flow.c=0.25,0.5;grid.n_cells=128,256" -> {path: [values]}."""
    out = {}
    for clause in spec.split(";"):
        clause = clause.strip()
        if not clause:
            continue
        key, _, vals = clause.partition("=")
        if not vals:
            raise ConfigError("sweep", f"override {clause!r} needs key=v1,v2,...")
        out[key.strip()] = [v.strip() for v in vals.split(",")]
    return out


def _apply_override(cfg_path: str, assignments: dict, tmp_path: str) -> None:
    import configparser

    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read(cfg_path)
    for path, value in assignments.items():
        section, _, key = path.rpartition(".")
        if not section:
            raise ConfigError("sweep", f"override key {path!r} needs section.key")
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key, value)
    with open(tmp_path, "w") as fh:
        cp.write(fh)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
    try:
        return run_experiment(cfg, args.out, assert_checks=not args.report_only)
    except SolverError as e:
        print(f"solver error: {e}", file=sys.stderr)
        return 1


def cmd_sweep(args) -> int:
    overrides = _parse_overrides(args.grid)
    keys = sorted(overrides)
    worst = 0
    rows = []
    for combo in itertools.product(*(overrides[k] for k in keys)):
        label = "_".join(f"{k.split('.')[-1]}={v}" for k, v in zip(keys, combo))
        sub = os.path.join(args.out, label)
        os.makedirs(sub, exist_ok=True)
        tmp = os.path.join(sub, "config.cfg")
        try:
            _apply_override(args.config, dict(zip(keys, combo)), tmp)
            cfg = load_config(tmp)
            if args.seed is not None:
                cfg.seed = args.seed
            code = run_experiment(cfg, sub, assert_checks=not args.report_only)
        except (ConfigError, SolverError) as e:
            print(f"{label}: error: {e}", file=sys.stderr)
            code = 2
        rows.append((label, code))
        worst = max(worst, code)
        print(f"{label}: exit={code}")
    with open(os.path.join(args.out, "sweep.csv"), "w") as fh:
        fh.write("label,exit_code\n")
        for label, code in rows:
            fh.write(f"{label},{code}\n")
    return worst


def cmd_certify(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    target = args.id
    path = os.path.join(args.out, f"certificate-{target.replace(':', '_')}.json")

    flow_ids = ("heat", "csf", "mcf2d", "mcf3d", "plaplace-reg")
    if target in flow_ids or target.split(":")[0] in flow_ids:
        flow = flows.get_flow(target)
        if isinstance(flow, flows.Quasilinear1D):
            profile = flows.DegeneracyProfile(
                lambda s: float(flow.a(np.asarray(s), 0.0, 0.0, 0.0)),
                A0=flow.A, P=flow.P)
        else:
            profile = flow.degeneracy
        if profile is None:
            print(f"flow {target!r} carries no degeneracy profile", file=sys.stderr)
            return 2
        rep = flows.check_degeneracy(profile, np.geomspace(profile.P, args.s_max, 400))
        rep.to_json(path)
        print(rep.summary_line())
        return 0 if rep.passed else 1

    try:
        nf = finsler.norm_by_id(target)
    except (KeyError, ValueError) as e:
        print(f"unknown certify id {target!r}: {e}", file=sys.stderr)
        return 2
    try:
        consts = finsler.certify(nf, s_max=args.s_max, path=path)
    except (RuntimeError, finsler.NormConstructionError) as e:
        print(f"certification failed for {target!r}: {e}", file=sys.stderr)
        return 1
    print(f"certified {consts.norm_id}: A={consts.A:.6g} P={consts.P:.6g} "
          f"k={consts.k:.6g} C1={consts.C1:.6g}")
    return 0


def cmd_list(args) -> int:
    print("flows:")
    for fid in flows.catalog_ids():
        print(f"  {fid}")
    print("norms:")
    for nf in finsler.builtin_norms(2):
        print(f"  {nf.id}")
    print("initial data kinds:")
    for kind in INITIAL_KINDS:
        print(f"  {kind}")
    print("check types:")
    for ctype in CHECK_TYPES:
        print(f"  {ctype}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="flowlab",
        description="numerical laboratory for parabolic flow estimates")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configured experiment")
    p_run.add_argument("config")
    p_run.add_argument("--out", default="out")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--threads", type=int, default=None)
    g = p_run.add_mutually_exclusive_group()
    g.add_argument("--assert", dest="report_only", action="store_false",
                   help="exit nonzero when an asserted check fails (default)")
    g.add_argument("--report-only", dest="report_only", action="store_true",
                   help="never fail the process on check defects")
    p_run.set_defaults(report_only=False, func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a config over parameter overrides")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--grid", required=True,
                         help='overrides, e.g. "flow.c=0.25,0.5;grid.n_cells=128,256"')
    p_sweep.add_argument("--out", default="sweep-out")
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--threads", type=int, default=None)
    p_sweep.add_argument("--report-only", dest="report_only", action="store_true")
    p_sweep.set_defaults(report_only=False, func=cmd_sweep)

    p_cert = sub.add_parser("certify", help="structural certificate for a flow or norm")
    p_cert.add_argument("id", help="flow id (heat, csf, ...) or norm id "
                                   "(euclid, elliptic:<spec>, quartic:<delta>)")
    p_cert.add_argument("--out", default="out")
    p_cert.add_argument("--s-max", type=float, default=1e3)
    p_cert.add_argument("--threads", type=int, default=None)
    p_cert.set_defaults(func=cmd_certify)

    p_list = sub.add_parser("list", help="show catalog and check ids")
    p_list.set_defaults(func=cmd_list)

    args = parser.parse_args(argv)
    if getattr(args, "threads", None):
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
