"""Command-line entry point: nlslab <subcommand> [options].

Exit codes: 0 success, 2 invalid input or failed precondition, 3 numerical
failure, 64 unknown or malformed flags.  Every output directory holds one
manifest.json listing the runs written there.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NumericalError, ValidationError

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_USAGE = 0, 2, 3, 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ValidationError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from None


def _grid(args):
    from .grid import RadialGrid
    return RadialGrid(args.r_max, args.n)


def _potential(args):
    from .potentials import ZeroPotential, potential_from_dict
    return potential_from_dict(_read_json(args.potential)) if args.potential else ZeroPotential()


def _ground_state(p, grid):
    from .grid import RadialGrid
    from .groundstate import solve_ground_state
    # the ground state is always solved on a grid wide enough for its tail
    return solve_ground_state(p, grid=grid if grid.r_max >= 24 else RadialGrid())


def _data(args, grid, gs):
    from .data import initial_data
    return initial_data(_read_json(args.data), args.p, grid=grid, ground_state=gs)


def _record(out_dir, command, args, outputs, started, extra=None):
    from .serialize import sha256, update_manifest
    entry = {
        "tool": "nlslab", "version": __version__, "command": command,
        "parameters": {k: v for k, v in vars(args).items() if k != "func"},
        "wall_clock_s": time.time() - started,
        "outputs": {Path(f).name: sha256(f) for f in outputs},
    }
    if extra:
        entry.update(extra)
    update_manifest(out_dir, entry)


def _emit(obj, out=None):
    from .serialize import dumps, write_json
    text = dumps(obj)
    if out:
        write_json(out, obj)
    print(text)


def cmd_groundstate(args):
    from .serialize import write_csv, write_json
    started = time.time()
    from .groundstate import solve_ground_state
    gs = solve_ground_state(args.p, tol=args.tol, grid=_grid(args))
    out = Path(args.out)
    rows = zip(gs.profile.grid.r, gs.profile.values.real)
    write_csv(out, ("r", "Q"), rows)
    side = out.with_suffix(".json")
    summary = gs.summary()
    write_json(side, summary)
    _record(out.parent, "groundstate", args, [out, side], started, {"grid": gs.grid.to_dict()})
    print(json.dumps({k: summary[k] for k in ("p", "mass", "grad_sq", "energy0", "cgn")}))
    return EXIT_OK


def cmd_kato(args):
    from .potentials import analyze
    started = time.time()
    rep = analyze(_potential(args), args.sigma, _grid(args))
    _emit(rep, args.out)
    if args.out:
        _record(Path(args.out).parent, "kato", args, [args.out], started)
    return EXIT_OK


def cmd_classify(args):
    from .classifier import classify
    started = time.time()
    grid = _grid(args)
    gs = _ground_state(args.p, grid)
    u0 = _data(args, grid, gs)
    rep = classify(u0, _potential(args), args.p, gs, sigma=args.sigma)
    _emit(rep, args.out)
    if args.out:
        _record(Path(args.out).parent, "classify", args, [args.out], started,
                {"grid": grid.to_dict()})
    return EXIT_OK


def cmd_evolve(args):
    from .evolution import EvolveConfig, evolve, save_fields
    from .serialize import write_csv, write_json
    started = time.time()
    cfg = EvolveConfig(dt0=args.dt0, t_end=args.t_end, store_every=args.store_every,
                       blowup_factor=args.blowup_factor, dt_floor=args.dt_floor,
                       R_probe=args.r_probe, scheme=args.scheme,
                       max_phase=None if args.max_phase <= 0 else args.max_phase,
                       store_fields=not args.no_fields)
    grid = _grid(args)
    V = _potential(args)
    gs = _ground_state(args.p, grid) if _read_json(args.data).get("kind") == "lambdaQ" else None
    u0 = _data(args, grid, gs)
    trace = evolve(u0, V, args.p, cfg)
    out = Path(args.out)
    write_csv(out, trace.CSV_HEADER, trace.rows())
    outputs = [out]
    if cfg.store_fields:
        npz = out.with_suffix(".npz")
        save_fields(trace, npz)
        outputs.append(npz)
    side = out.with_suffix(".json")
    write_json(side, trace.summary())
    outputs.append(side)
    _record(out.parent, "evolve", args, outputs, started, {"grid": grid.to_dict()})
    print(json.dumps({"terminal": trace.terminal.kind, "t": trace.terminal.t,
                      "steps": trace.steps, "mass_drift": trace.mass_drift}))
    return EXIT_OK


def cmd_virial(args):
    from .evolution import load_fields
    from .serialize import write_csv
    from .virial import make_weight, virial_consistency, virial_series
    started = time.time()
    trace_csv = Path(args.trace)
    npz = trace_csv.with_suffix(".npz")
    if not npz.exists():
        raise ValidationError(f"{npz} not found: the virial series needs the stored fields of the run")
    stored = load_fields(npz)
    if not stored.fields:
        raise ValidationError(f"{npz} holds no fields (run evolve without --no-fields)")
    w = make_weight(args.weight, args.R, stored.grid)
    s = virial_series(stored, w)
    resid = np.full(len(s), np.nan)
    cons = None
    if len(s) >= 3:
        cons = virial_consistency(stored, w, min_snapshots=3)
        resid = cons.fd_resid
    out = Path(args.out) if args.out else trace_csv.with_name(
        f"{trace_csv.stem}_virial_{args.weight}.csv")
    write_csv(out, ("t", "I", "I1", "I2", "fd_resid"),
              zip(s.times, s.I, s.I1, s.I2, resid))
    _record(out.parent, "virial", args, [out], started)
    print(json.dumps({"weight": w.key, "snapshots": len(s),
                      "max_rel_err": None if cons is None else cons.max_rel_err}))
    return EXIT_OK


def cmd_sweep(args):
    from .sweep import SweepPlan, run_sweep
    plan_dict = _read_json(args.plan)
    plan_dict["out_dir"] = args.out
    if args.workers is not None:
        plan_dict["workers"] = args.workers
    plan = SweepPlan.from_dict(plan_dict)
    rows = run_sweep(plan)
    print(json.dumps({"cells": len(rows), "errors": sum(1 for r in rows if r["error"]),
                      "table": str(Path(args.out) / "agreement.csv")}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nlslab", description="Radial focusing NLS with potential: "
                     "ground states, potential analysis, threshold classification, evolution.")
    parser.add_argument("--version", action="version", version=f"nlslab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def grid_flags(sp, r_max=32.0):
        sp.add_argument("--r-max", type=float, default=r_max)
        sp.add_argument("--n", type=int, default=4095)

    sp = sub.add_parser("groundstate", help="solve for the ground state Q")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--out", default="q.csv")
    grid_flags(sp)
    sp.set_defaults(func=cmd_groundstate)

    sp = sub.add_parser("kato", help="analyze a potential")
    sp.add_argument("--potential", required=True)
    sp.add_argument("--sigma", type=float, default=2.0)
    sp.add_argument("--out")
    grid_flags(sp)
    sp.set_defaults(func=cmd_kato)

    sp = sub.add_parser("classify", help="threshold classification of initial data")
    sp.add_argument("--data", required=True)
    sp.add_argument("--potential")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--sigma", type=float, default=2.0)
    sp.add_argument("--out")
    grid_flags(sp)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("evolve", help="evolve radial data")
    sp.add_argument("--data", required=True)
    sp.add_argument("--potential")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--t-end", type=float, required=True)
    sp.add_argument("--dt0", type=float, default=1e-3)
    sp.add_argument("--store-every", type=int, default=10)
    sp.add_argument("--blowup-factor", type=float, default=1e3)
    sp.add_argument("--dt-floor", type=float, default=1e-10)
    sp.add_argument("--r-probe", type=float, default=10.0)
    sp.add_argument("--scheme", choices=("strang", "yoshida4", "yoshida6"), default="strang")
    sp.add_argument("--max-phase", type=float, default=0.05,
                    help="cap on the nonlinear phase per step; <= 0 disables")
    sp.add_argument("--no-fields", action="store_true", help="do not store snapshot fields")
    sp.add_argument("--out", default="trace.csv")
    grid_flags(sp)
    sp.set_defaults(func=cmd_evolve)

    sp = sub.add_parser("virial", help="virial series of a stored run")
    sp.add_argument("--trace", required=True)
    sp.add_argument("--weight", choices=("unweighted", "chi", "w", "psi", "f"), required=True)
    sp.add_argument("--R", type=float, default=1.0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_virial)

    sp = sub.add_parser("sweep", help="run a parameter sweep")
    sp.add_argument("--plan", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--workers", type=int)
    sp.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValidationError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"nlslab {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"nlslab {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
