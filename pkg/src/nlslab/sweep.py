"""Batch runs over the lam*Q family and potential specs, with a verdict-vs-simulation table.

Each cell classifies its initial data, evolves it and compares the two.
Agreement is reported, never enforced.  Cells are independent and run in
separate processes; the table is assembled in plan order afterwards, so
identical plans give identical tables.
"""
from __future__ import annotations

import json
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

from .classifier import Verdict, classify
from .errors import ValidationError
from .evolution import BLOWUP, COMPLETED, EvolveConfig, evolve, scattering_diagnostic
from .grid import RadialGrid, resample
from .groundstate import solve_ground_state
from .potentials import PotentialSpec, ZeroPotential, potential_from_dict
from .serialize import sha256, update_manifest, write_csv, write_json

TABLE_HEADER = ("p", "lambda", "potential_id", "me_ratio", "grad_ratio", "h_ratio", "verdict",
                "terminal", "evac_pass", "t_terminal", "near_threshold", "agreement", "error")
NEAR_THRESHOLD = 0.05
THREADS_ENV = "NLS_LAB_THREADS"


@dataclass(frozen=True)
class SweepPlan:
    p_values: tuple
    lambdas: tuple
    potentials: tuple = ()
    config: EvolveConfig = field(default_factory=EvolveConfig)
    out_dir: str | None = None
    r_max: float = 32.0
    n: int = 4095
    evac_fraction: float = 0.1
    workers: int | None = None

    def __post_init__(self):
        if not self.p_values:
            raise ValidationError("plan needs at least one exponent")
        if not self.lambdas:
            raise ValidationError("plan needs at least one lambda")
        if any(not lam > 0 for lam in self.lambdas):
            raise ValidationError("lambda values must be positive")
        pots = tuple(potential_from_dict(v) if isinstance(v, dict) else v for v in self.potentials)
        object.__setattr__(self, "potentials", pots or (ZeroPotential(),))
        object.__setattr__(self, "p_values", tuple(float(p) for p in self.p_values))
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))

    def cells(self):
        for p in self.p_values:
            for V in self.potentials:
                for lam in self.lambdas:
                    yield p, lam, V

    @classmethod
    def from_dict(cls, d: dict) -> "SweepPlan":
        d = dict(d)
        cfg = EvolveConfig(**d.pop("config", {}))
        p_values = d.pop("p", None) or d.pop("p_values", None)
        lambdas = d.pop("lambda", None) or d.pop("lambdas", None)
        if p_values is None or lambdas is None:
            raise ValidationError("plan needs 'p' and 'lambda' lists")
        if not isinstance(p_values, (list, tuple)):
            p_values = [p_values]
        return cls(p_values=tuple(p_values), lambdas=tuple(lambdas),
                   potentials=tuple(d.pop("potentials", ())), config=cfg, **d)

    def to_dict(self):
        return {"p": list(self.p_values), "lambda": list(self.lambdas),
                "potentials": [V.to_dict() for V in self.potentials],
                "config": self.config.to_dict(), "r_max": self.r_max, "n": self.n,
                "evac_fraction": self.evac_fraction}


def potential_id(V: PotentialSpec) -> str:
    return json.dumps(V.to_dict(), sort_keys=True, separators=(",", ":"))


@lru_cache(maxsize=8)
def _ground_state(p: float):
    return solve_ground_state(p)


def _agreement(verdict: str, terminal: str, evac) -> str:
    if verdict == Verdict.SCATTERS.value:
        return "agree" if terminal == COMPLETED and evac else "disagree"
    if verdict == Verdict.GLOBAL_BOUNDED.value:
        return "agree" if terminal == COMPLETED else "disagree"
    if verdict in (Verdict.BLOWUP.value, Verdict.BLOWUP_OR_GROWUP.value,
                   Verdict.NEGATIVE_ENERGY_BLOWUP.value):
        return "agree" if terminal == BLOWUP else "disagree"
    return "n/a"


def run_cell(p: float, lam: float, V: PotentialSpec, cfg: EvolveConfig, r_max: float, n: int,
             evac_fraction: float) -> dict:
    """Classify and evolve one cell; failures are recorded in the row."""
    row = dict.fromkeys(TABLE_HEADER, "")
    row.update(p=p, **{"lambda": lam}, potential_id=potential_id(V))
    try:
        gs = _ground_state(p)
        u0 = gs.profile * lam
        grid = RadialGrid(r_max, n)
        if grid != u0.grid:
            u0 = resample(u0, grid)
        rep = classify(u0, V, p, gs)
        ratios = rep.ratios
        row.update(me_ratio=float(ratios.me_ratio), grad_ratio=float(ratios.grad_ratio),
                   h_ratio=float(ratios.h_ratio), verdict=rep.verdict.value,
                   near_threshold=bool(abs(ratios.me_ratio - 1) < NEAR_THRESHOLD))
        trace = evolve(u0, V, p, cfg)
        row.update(terminal=trace.terminal.kind, t_terminal=float(trace.terminal.t))
        evac = None
        if trace.terminal.kind == COMPLETED:
            diag = scattering_diagnostic(trace, mass_fraction=evac_fraction)
            evac = diag.status if diag.status == "inconclusive" else diag.passed
        row["evac_pass"] = evac
        row["agreement"] = _agreement(row["verdict"], row["terminal"], evac is True)
    except Exception as exc:  # per-cell failures never abort the sweep
        row["error"] = f"{type(exc).__name__}: {exc}"
        row["agreement"] = "error"
        row["trace"] = traceback.format_exc(limit=3)
    return row


def _workers(plan: SweepPlan) -> int:
    if plan.workers is not None:
        return max(1, int(plan.workers))
    env = os.environ.get(THREADS_ENV)
    return max(1, int(env)) if env else max(1, os.cpu_count() or 1)


def run_sweep(plan: SweepPlan) -> list:
    """Run every cell of the plan and return the agreement rows in plan order."""
    cells = list(plan.cells())
    args = [(p, lam, V, plan.config, plan.r_max, plan.n, plan.evac_fraction) for p, lam, V in cells]
    nw = min(_workers(plan), len(cells))
    if nw == 1:
        rows = [run_cell(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=nw) as pool:
            futures = [pool.submit(run_cell, *a) for a in args]
            rows = [f.result() for f in futures]
    if plan.out_dir:
        write_table(rows, plan)
    return rows


def table_rows(rows):
    return [tuple(row[h] for h in TABLE_HEADER) for row in rows]


def write_table(rows, plan: SweepPlan) -> Path:
    out = Path(plan.out_dir)
    path = write_csv(out / "agreement.csv", TABLE_HEADER, table_rows(rows))
    write_json(out / "plan.json", plan.to_dict())
    update_manifest(out, {"command": "sweep", "plan": plan.to_dict(),
                          "outputs": {"agreement.csv": sha256(path)},
                          "cells": len(rows),
                          "errors": sum(1 for r in rows if r["error"])})
    return path
