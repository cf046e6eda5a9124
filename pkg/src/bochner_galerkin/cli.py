"""Command-line interface: ``solve``, ``check``, ``demo`` and ``study``.

Exit codes::

    0  success
    2  configuration or usage error
    3  solve failure (partial output written)
    4  invariant violation (energy slack, a-priori audit, demo assertions)
    5  condition probe failure
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .apriori import audit_trajectory
from .conditions import (DegenerateDemo, PHI_NAMES, ProbeRefused, comp2_demo, default_comp2_pair,
                         oscillation_demo)
from .config import ConfigError, load_config, with_seed
from .function_space import divfree_fourier_2d, torus2d, v_norm
from .io import write_csv, write_manifest, write_xy
from .scenarios import build_scenario, run_study
from .solver import SolveError, energy_report

EXIT_OK, EXIT_CONFIG, EXIT_SOLVE, EXIT_INVARIANT, EXIT_PROBE = 0, 2, 3, 4, 5

log = logging.getLogger("bochner_galerkin")


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get("BG_OUT_DIR") or "bg_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def _load(args):
    cfg = with_seed(load_config(args.config), args.seed)
    return cfg, build_scenario(cfg)


def _base_manifest(command, cfg, sc):
    m = {"command": command, "version": __version__, "seed": cfg.seed}
    m.update({f"config.{k}": v for k, v in cfg.echo().items()})
    m.update({f"meta.{k}": v for k, v in sc.metadata.items()})
    if sc.bounds is not None:
        m.update({f"bounds.{k}": v for k, v in sc.bounds.as_dict().items()})
    return m


def _write_run(out, sc, traj, ledger):
    p = sc.config.p
    n = sc.basis.n
    slack = ledger.slack
    hn = traj.h_norms()
    rows = [[t, *a, hn[k], v_norm(a, sc.basis, p) ** p, slack[k]]
            for k, (t, a) in enumerate(zip(traj.times, traj.coeffs))]
    write_csv(out / "trajectory.csv",
              ["t", *[f"a{i + 1}" for i in range(n)], "H_norm", "V_norm_p", "energy_slack"], rows)
    parts = list(ledger.part_work)
    iters = np.concatenate([[0], traj.newton_iterations])
    rows = [[ledger.times[k], ledger.energy[k], ledger.operator_work[k], ledger.forcing_work[k], slack[k],
             *[ledger.part_work[name][k] for name in parts], iters[k]]
            for k in range(len(ledger.times))]
    write_csv(out / "ledger.csv", ["t", "energy", "operator_work", "forcing_work", "slack",
                                   *[f"work_{name}" for name in parts], "newton_iterations"], rows)


def cmd_solve(args) -> int:
    start = time.perf_counter()
    try:
        cfg, sc = _load(args)
    except (ConfigError, ValueError) as exc:
        _err(exc)
        return EXIT_CONFIG
    out = _out_dir(args)
    manifest = _base_manifest("solve", cfg, sc)
    status = EXIT_OK
    try:
        traj, ledger = sc.solve()
        manifest["status"] = "completed"
    except SolveError as exc:
        traj, ledger = exc.trajectory, exc.ledger
        manifest["status"] = f"failed: {exc}"
        manifest["t_fail"] = exc.t_fail
        _err(exc)
        status = EXIT_SOLVE
    _write_run(out, sc, traj, ledger)

    report = energy_report(ledger)
    y0_sq = 2.0 * ledger.data_energy
    tol = 1e-8 * (1.0 + y0_sq)
    manifest["energy.min_slack"] = report.min_slack
    manifest["energy.t_min_slack"] = report.t_min_slack
    manifest["energy.tolerance"] = tol
    manifest["energy.verdict"] = "pass" if report.ok(tol) else "fail"
    for name, work in ledger.part_work.items():
        manifest[f"energy.work.{name}"] = work[-1]
    audit = None
    if sc.bounds is not None:
        audit = audit_trajectory(traj, sc.bounds, sc.basis, cfg.p)
        manifest.update({"audit.lp_V": audit.lp_V, "audit.linf_H": audit.linf_H,
                         "audit.lp_bound": audit.lp_bound, "audit.linf_bound": audit.linf_bound,
                         "audit.verdict": "pass" if audit.passed else "fail"})
    else:
        manifest["audit.verdict"] = "skipped (no coercivity constants)"
    if status == EXIT_OK and (not report.ok(tol) or (audit is not None and not audit.passed)):
        status = EXIT_INVARIANT
    manifest["exit_code"] = status
    manifest["wall_clock_s"] = time.perf_counter() - start
    write_manifest(out / "manifest.txt", manifest)

    print(f"{cfg.scenario}: {len(traj.times) - 1} steps to t={traj.times[-1]:.6g}, "
          f"min energy slack {report.min_slack:.3e}")
    if audit is not None:
        print(audit.summary())
    if status == EXIT_INVARIANT:
        _err("invariant violated (see manifest.txt)")
    return status


def cmd_check(args) -> int:
    start = time.perf_counter()
    try:
        cfg, sc = _load(args)
        reports = sc.probes(samples=args.samples, jobs=args.jobs)
    except ProbeRefused as exc:
        _err(f"probe refused: {exc}")
        return EXIT_CONFIG
    except (ConfigError, ValueError) as exc:
        _err(exc)
        return EXIT_CONFIG
    out = _out_dir(args)
    manifest = _base_manifest("check", cfg, sc)
    if not reports:
        print("warning: no applicable probes for this scenario", file=sys.stderr)
    rows = [[r.condition, r.n_samples, r.margin, r.abs_margin, r.witness_norm, r.verdict, r.tolerance,
             np.nan if r.implied_constant is None else r.implied_constant, r.witness_t]
            for r in reports]
    write_csv(out / "probes.csv", ["condition", "n_samples", "margin", "abs_margin", "witness_norm",
                                   "verdict", "tolerance", "implied_constant", "witness_t"], rows)
    for r in reports:
        write_csv(out / f"witness_{r.condition}.csv", ["index", "coefficient"],
                  [[i, c] for i, c in enumerate(r.witness)])
    summary = "\n".join(r.summary() for r in reports) or "no applicable probes"
    (out / "probes.txt").write_text(summary + "\n")
    print(summary)
    failed = [r for r in reports if not r.passed]
    for r in reports:
        manifest[f"probe.{r.condition}"] = r.verdict
    manifest["exit_code"] = EXIT_PROBE if failed else EXIT_OK
    manifest["wall_clock_s"] = time.perf_counter() - start
    write_manifest(out / "manifest.txt", manifest)
    return EXIT_PROBE if failed else EXIT_OK


def cmd_demo(args) -> int:
    if args.n_max < 1:
        _err("--n-max must be at least 1")
        return EXIT_CONFIG
    out = _out_dir(args)
    manifest = {"command": f"demo {args.name}", "version": __version__, "n_max": args.n_max}
    if args.name == "comp2":
        try:
            basis = divfree_fourier_2d(torus2d(), args.basis_n)
            v, w = default_comp2_pair(basis)
            res = comp2_demo(v, w, basis, args.n_max)
        except (DegenerateDemo, ValueError) as exc:
            _err(exc)
            return EXIT_CONFIG
        write_csv(out / "comp2.csv", ["n", "q_n", "limit", "relative_error"],
                  [[n, q, res.limit, e] for n, q, e in zip(res.n, res.q, res.relative_errors)])
        write_xy(out / "comp2.dat", res.n, res.q, "n q_n")
        ok = res.skew_ok and (res.plateau_ok or args.n_max < 5)
        manifest.update({"bvw": res.bvw, "bvv": res.bvv, "limit": res.limit, "observed_sign": res.observed_sign,
                         "skew_ok": res.skew_ok, "plateau_ok": res.plateau_ok, "n_time": res.n_time})
        print(f"<Bv,w> = {res.bvw:.6g}; q_n -> {res.q[-1]:.10g} (pi|<Bv,w>| = {res.limit:.10g}, "
              f"sign {res.observed_sign:+d})")
    else:
        try:
            res = oscillation_demo(args.phi, args.n_max)
        except ValueError as exc:
            _err(exc)
            return EXIT_CONFIG
        write_csv(out / "oscillation.csv", ["n", "s_n", "n_times_s_n", "sin2_integral"],
                  [[n, s, n * s, q] for n, s, q in zip(res.n, res.s, res.sin2)])
        write_xy(out / "oscillation.dat", res.n, res.s, f"n s_n for phi={args.phi}")
        ok = res.decay_ok and res.sin2_ok
        manifest.update({"phi": args.phi, "C": res.C, "fitted_C": res.fitted_C,
                         "decay_ok": res.decay_ok, "sin2_ok": res.sin2_ok})
        print(f"phi={args.phi}: |s_n| <= C/n with C = {res.C:.6g} (fitted {res.fitted_C:.6g})")
    manifest["exit_code"] = EXIT_OK if ok else EXIT_INVARIANT
    write_manifest(out / "manifest.txt", manifest)
    return EXIT_OK if ok else EXIT_INVARIANT


def _float_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def cmd_study(args) -> int:
    start = time.perf_counter()
    try:
        cfg = with_seed(load_config(args.config), args.seed)
        n_list = sorted(_int_list(args.n_list)) if args.n_list else [cfg.n]
        dt_list = sorted(_float_list(args.dt_list), reverse=True) if args.dt_list else [cfg.dt]
        study = run_study(cfg, n_list, dt_list, jobs=args.jobs)
    except (ConfigError, ValueError) as exc:
        _err(exc)
        return EXIT_CONFIG
    out = _out_dir(args)
    write_csv(out / "study.csv", ["n", "dt", "linf_H_error", "lp_V_error", "status"],
              [[c.n, c.dt, c.linf_H, c.lp_V, c.status] for c in study.cells])
    status = EXIT_OK if study.all_solved else EXIT_SOLVE
    manifest = {"command": "study", "version": __version__, "seed": cfg.seed,
                **{f"config.{k}": v for k, v in cfg.echo().items()},
                "n_list": ",".join(map(str, n_list)), "dt_list": ",".join("%.17g" % d for d in dt_list),
                "reference": study.reference, "temporal_order": study.temporal_order,
                "spatial_monotone": study.spatial_monotone, "exit_code": status,
                "wall_clock_s": time.perf_counter() - start}
    write_manifest(out / "manifest.txt", manifest)
    print(f"reference: {study.reference}; fitted temporal order {study.temporal_order:.4f}")
    for c in study.cells:
        print(f"  n={c.n:3d} dt={c.dt:.4g}  L^inf(H) {c.linf_H:.4e}  L^p(V) {c.lp_V:.4e}  {c.status}")
    return status


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (default: $BG_OUT_DIR or ./bg_out)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--jobs", type=int, default=1, help="worker threads for probes and studies")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="bochner-galerkin",
                                     description="Galerkin solver and condition probes for nonlinear evolution equations")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="integrate a scenario")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("check", parents=[common], help="run condition probes")
    p.add_argument("--config", required=True)
    p.add_argument("--samples", type=int, help="samples per probe")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("demo", parents=[common], help="oscillation counterexamples")
    p.add_argument("name", choices=("comp2", "oscillation"))
    p.add_argument("--n-max", type=int, default=20)
    p.add_argument("--phi", default="t", choices=PHI_NAMES)
    p.add_argument("--basis-n", type=int, default=12, help="divergence-free basis size for comp2")
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("study", parents=[common], help="convergence study over (n, dt)")
    p.add_argument("--config", required=True)
    p.add_argument("--n-list")
    p.add_argument("--dt-list")
    p.set_defaults(func=cmd_study)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        _err("--jobs must be at least 1")
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
