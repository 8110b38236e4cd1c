"""Command line entry point.

    uavmfg run --algo mfgfl-hf --seed 0 --out-dir out/
    uavmfg sweep --axis N --values 16,25,36 --seeds 0,1 --out-dir sweep/
    uavmfg diag basis|density|spectral|msd
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import diagnostics as _diag
from . import fpk as _fpk
from . import orchestrator as _orch
from .config import ConfigError, load


def _config(args):
    return load(args.config, args.set or [])


def _add_common(p):
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config field, e.g. dynamics.sigma_wind=0.2")


def cmd_run(args):
    cfg = _config(args)
    rep = _orch.simulate(cfg, args.algo, args.seed, args.steps)
    summary = _orch.write_outputs(rep, cfg, args.out_dir)
    if args.plots:
        from . import plots
        plots.render_run(rep, cfg, args.out_dir)
    keys = ("algo", "seed", "steps", "arrived", "T_avg", "energy_mean",
            "phi_A", "phi_C", "collisions", "max_speed", "bits_total")
    print(" ".join(f"{k}={summary[k]}" for k in keys))
    return 0


def cmd_sweep(args):
    cfg = _config(args)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    seeds = [int(s) for s in args.seeds.split(",")]
    algos = [a.strip() for a in args.algos.split(",")]
    for a in algos:
        if a not in _orch.ALGOS:
            raise ConfigError(f"unknown algorithm {a!r}")
    rows = _orch.sweep(cfg, args.axis, values, algos, seeds, args.steps,
                       out_dir=os.path.join(args.out_dir, "cells"))
    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, "sweep.csv")
    keys = ["axis", "value", "algo", "seed", "status", "steps", "arrived", "T_avg",
            "T_max", "energy_mean", "energy_var", "phi_A", "phi_C", "collisions",
            "max_speed", "mean_speed", "min_speed", "bits_total", "max_abs_H",
            "max_abs_F", "error"]
    _write_csv(path, keys, rows)
    table = _orch.aggregate_sweep(rows)
    _write_csv(os.path.join(args.out_dir, "sweep_cells.csv"), list(table[0]), table)
    if args.plots:
        from . import plots
        plots.render_sweep([r for r in rows if r["status"] == "ok"], args.out_dir)
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"wrote {len(rows)} rows to {path} ({failed} failed)")
    return 0


def _write_csv(path, keys, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, extrasaction="ignore", restval="")
        w.writeheader()
        w.writerows(rows)


def cmd_diag(args):
    cfg = _config(args)
    out = {}
    if args.what == "basis":
        spec = cfg.basis_h if args.learner == "h" else cfg.basis_f
        out = {"size": spec.size, "grouping": spec.grouping, "degree": spec.degree,
               "scale": list(spec.scale), "fingerprint": spec.fingerprint(),
               "terms": spec.term_names()}
    elif args.what == "density":
        s0 = _orch.initial_states(cfg)
        w = _fpk.init_from_swarm(s0, cfg.basis_f, cfg.quadrature,
                                 cfg.fpk.bandwidth, cfg.fpk.ridge)
        m = _fpk.density_grid(cfg.basis_f, w, cfg.quadrature)
        grid = cfg.quadrature.grid_states()
        path = args.output or "density.csv"
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "y", "v_x", "v_y", "m"])
            for s, val in zip(grid, m.ravel()):
                wr.writerow([*(repr(float(v)) for v in s), repr(float(val))])
        out = {"path": path, "nodes": int(grid.shape[0]),
               "mass": float(m.sum() * cfg.quadrature.cell_volume)}
    elif args.what in ("spectral", "msd"):
        samples = collect_fpk_gradients(cfg, args.algo, args.seed, args.steps, args.degree)
        rep = _diag.spectral_report(samples)
        out = rep.as_dict()
        out["mu_F"] = cfg.fpk.mu
        out["mu_F_within_bound"] = bool(cfg.fpk.mu < rep.mu_bound)
        if args.what == "msd":
            try:
                out["msd"] = _diag.msd_closed_form(rep.R_hat, cfg.fpk.mu, args.eps_sq)
            except _diag.DivergenceError as exc:
                out["msd"] = None
                out["error"] = str(exc)
    print(json.dumps(out, indent=2))
    return 0


def collect_fpk_gradients(cfg, algo, seed, steps, degree=None):
    """Density-learner gradient samples [g0, g1] gathered along a short run."""
    from dataclasses import replace
    if degree is not None:
        cfg = replace(cfg, basis_f=replace(cfg.basis_f, degree=degree))
    if not algo.startswith("mfg"):
        algo = "mfgfl-hf"
    samples = []
    _orch.simulate(cfg, algo, seed, steps, fpk_tap=lambda n, agents, g: samples.append(g))
    return np.concatenate(samples, axis=0)


def build_parser():
    p = argparse.ArgumentParser(prog="uavmfg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run one seeded episode")
    _add_common(r)
    r.add_argument("--algo", choices=_orch.ALGOS, default="mfgfl-hf")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--steps", type=int, default=None)
    r.add_argument("--out-dir", default="out")
    r.add_argument("--plots", action="store_true", help="also render PNG figures")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="sweep one axis over algorithms and seeds")
    _add_common(s)
    s.add_argument("--axis", choices=("N", "n0", "sigma_wind"), required=True)
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--seeds", default="0")
    s.add_argument("--algos", default=",".join(_orch.ALGOS))
    s.add_argument("--steps", type=int, default=None)
    s.add_argument("--out-dir", default="sweep")
    s.add_argument("--plots", action="store_true")
    s.set_defaults(func=cmd_sweep)

    d = sub.add_parser("diag", help="basis, density and convergence diagnostics")
    _add_common(d)
    d.add_argument("what", choices=("basis", "density", "spectral", "msd"))
    d.add_argument("--learner", choices=("h", "f"), default="h")
    d.add_argument("--algo", choices=_orch.ALGOS, default="mfgfl-hf")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--steps", type=int, default=200)
    d.add_argument("--degree", type=int, default=None,
                   help="density basis degree for spectral/msd")
    d.add_argument("--eps-sq", type=float, default=1e-4,
                   help="residual noise power for the steady-state deviation")
    d.add_argument("--output", help="CSV path for the density dump")
    d.set_defaults(func=cmd_diag)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _orch.SimulationDiverged as exc:
        print(f"simulation diverged: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
