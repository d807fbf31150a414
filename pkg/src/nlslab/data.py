"""Initial data from JSON descriptions.

Schemas:
    {"kind": "lambdaQ", "lambda": 1.1}
    {"kind": "gaussian", "amp": A, "width": w}        # A exp(-r^2 / w^2)
    {"kind": "table", "r": [...], "re": [...], "im": [...]}

An optional "grid": {"r_max": ..., "n": ...} selects the grid.
"""
from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ValidationError
from .grid import RadialField, RadialGrid, resample

KINDS = ("lambdaQ", "gaussian", "table")


def grid_from_dict(d: dict | None, default: RadialGrid | None = None) -> RadialGrid:
    if not d:
        return default or RadialGrid()
    return RadialGrid(float(d.get("r_max", 32.0)), int(d.get("n", 4095)))


def _need(d, *keys):
    missing = [k for k in keys if k not in d]
    if missing:
        raise ValidationError(f"initial data of kind {d.get('kind')!r} needs {', '.join(missing)}")


def initial_data(d: dict, p: float, grid: RadialGrid | None = None, ground_state=None) -> RadialField:
    """Build the initial field described by d on the grid (or the one it names)."""
    if not isinstance(d, dict) or "kind" not in d:
        raise ValidationError("initial data must be an object with a 'kind' key")
    kind = d["kind"]
    grid = grid or grid_from_dict(d.get("grid"))
    if kind == "lambdaQ":
        _need(d, "lambda")
        lam = float(d["lambda"])
        if not lam > 0:
            raise ValidationError(f"lambda must be positive, got {lam}")
        if ground_state is None:
            from .groundstate import solve_ground_state
            ground_state = solve_ground_state(p)
        u = ground_state.profile * lam
        return u if u.grid == grid else resample(u, grid)
    if kind == "gaussian":
        _need(d, "amp", "width")
        amp, width = complex(d["amp"]), float(d["width"])
        if not width > 0:
            raise ValidationError(f"width must be positive, got {width}")
        return RadialField.from_function(grid, lambda r: amp * np.exp(-(r / width) ** 2))
    if kind == "table":
        _need(d, "r", "re")
        r = np.asarray(d["r"], dtype=float)
        re = np.asarray(d["re"], dtype=float)
        im = np.asarray(d.get("im", np.zeros_like(re)), dtype=float)
        if not (len(r) == len(re) == len(im)) or len(r) < 4:
            raise ValidationError("table data needs equal-length r, re, im with at least 4 points")
        if np.any(np.diff(r) <= 0) or r[0] < 0:
            raise ValidationError("table radii must be nonnegative and strictly increasing")
        if r[0] > 0:
            # w = r u vanishes at the origin whatever u(0) is
            r, re, im = (np.concatenate([[0.0], v]) for v in (r, re, im))
        spline_re, spline_im = CubicSpline(r, r * re), CubicSpline(r, r * im)
        x = grid.r
        inside = x <= r[-1]
        vals = np.zeros(grid.n, dtype=complex)
        vals[inside] = (spline_re(x[inside]) + 1j * spline_im(x[inside])) / x[inside]
        return RadialField(grid, vals)
    raise ValidationError(f"unknown initial data kind {kind!r}; choose from {KINDS}")
