"""Radial potentials V(r): evaluation, Kato and Lebesgue norms, sign conditions.

Every family provides V(r) and x.grad V = r V'(r) (analytic where possible),
plus breakpoints where it is not smooth.  Integrals over (0, inf) are split
into dyadic shells 2^k <= r < 2^(k+1) for k up to 40; a norm is flagged
divergent when the shells far out still carry a non-negligible share, which
catches the logarithmic divergences of 1/r^2-type tails.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .grid import RadialGrid

FOUR_PI = 4.0 * np.pi
SIGN_TOL = 1e-12
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_K_MIN, _K_MAX, _K_TAIL = -30, 40, 20


class PotentialSpec:
    """Base class.  Subclasses implement ``value`` and ``r_dv``."""

    family = "abstract"

    def value(self, r):
        raise NotImplementedError

    def r_dv(self, r):
        raise NotImplementedError

    def breakpoints(self):
        return ()

    def to_dict(self) -> dict:
        raise NotImplementedError

    def is_zero(self) -> bool:
        return False

    def notes(self):
        return []

    def __call__(self, r):
        return self.value(np.asarray(r, dtype=float))

    def __add__(self, other):
        return SumPotential(((1.0, self), (1.0, other)))

    def scaled(self, lam: float) -> "PotentialSpec":
        """The dilation lam^2 V(lam r), under which the Kato norm is invariant."""
        return Dilation(lam, self)


@dataclass(frozen=True)
class ZeroPotential(PotentialSpec):
    family = "zero"

    def value(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def r_dv(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def is_zero(self):
        return True

    def to_dict(self):
        return {"family": self.family, "params": {}}


@dataclass(frozen=True)
class GaussianBump(PotentialSpec):
    A: float
    sigma: float
    family = "gaussian-bump"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValidationError("gaussian-bump needs sigma > 0")

    def value(self, r):
        return self.A * np.exp(-(r / self.sigma) ** 2)

    def r_dv(self, r):
        return -2.0 * (r / self.sigma) ** 2 * self.value(r)

    def to_dict(self):
        return {"family": self.family, "params": {"A": self.A, "sigma": self.sigma}}


def _smoothstep(x):
    """C-infinity step from 0 (x <= 0) to 1 (x >= 1) and its derivative."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        f = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        y = 1.0 - x
        g = np.where(y > 0, np.exp(-1.0 / np.where(y > 0, y, 1.0)), 0.0)
        df = np.where(x > 0, f / np.where(x > 0, x, 1.0) ** 2, 0.0)
        dg = np.where(y > 0, g / np.where(y > 0, y, 1.0) ** 2, 0.0)
    s = f / (f + g)
    ds = (df * g + f * dg) / (f + g) ** 2
    return s, ds


@dataclass(frozen=True)
class InverseSquare(PotentialSpec):
    """A/(r^2 + r0^2), optionally switched off smoothly on [r_cut, 2 r_cut]."""

    A: float
    r0: float
    r_cut: float | None = None
    family = "truncated-inverse-square"

    def __post_init__(self):
        if not self.r0 > 0:
            raise ValidationError("truncated-inverse-square needs r0 > 0")
        if self.r_cut is not None and not self.r_cut > 0:
            raise ValidationError("r_cut must be positive")

    def _cut(self, r):
        if self.r_cut is None:
            return np.ones_like(r), np.zeros_like(r)
        s, ds = _smoothstep((r - self.r_cut) / self.r_cut)
        return 1.0 - s, -ds / self.r_cut

    def value(self, r):
        r = np.asarray(r, dtype=float)
        return self.A / (r * r + self.r0 ** 2) * self._cut(r)[0]

    def r_dv(self, r):
        r = np.asarray(r, dtype=float)
        base = self.A / (r * r + self.r0 ** 2)
        c, dc = self._cut(r)
        return -2.0 * r * r * base / (r * r + self.r0 ** 2) * c + r * base * dc

    def breakpoints(self):
        return () if self.r_cut is None else (self.r_cut, 2 * self.r_cut)

    def to_dict(self):
        params = {"A": self.A, "r0": self.r0}
        if self.r_cut is not None:
            params["r_cut"] = self.r_cut
        return {"family": self.family, "params": params}


@dataclass(frozen=True)
class Saturating(PotentialSpec):
    """A (1 - exp(-r^2/sigma^2)): nondecreasing, tends to the constant A."""

    A: float
    sigma: float
    family = "saturating"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValidationError("saturating needs sigma > 0")

    def value(self, r):
        return self.A * -np.expm1(-(np.asarray(r, dtype=float) / self.sigma) ** 2)

    def r_dv(self, r):
        x2 = (np.asarray(r, dtype=float) / self.sigma) ** 2
        return 2.0 * self.A * x2 * np.exp(-x2)

    def to_dict(self):
        return {"family": self.family, "params": {"A": self.A, "sigma": self.sigma}}


@dataclass(frozen=True)
class TablePotential(PotentialSpec):
    """Piecewise-linear V through (r_k, V_k); constant before r_0, zero after r_last."""

    r_k: tuple
    v_k: tuple
    family = "table"

    def __post_init__(self):
        r = np.asarray(self.r_k, dtype=float)
        v = np.asarray(self.v_k, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or len(r) < 2:
            raise ValidationError("table needs matching r and v lists of length >= 2")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v))):
            raise ValidationError("table entries must be finite")
        if r[0] < 0 or np.any(np.diff(r) <= 0):
            raise ValidationError("table radii must be nonnegative and strictly increasing")
        object.__setattr__(self, "r_k", tuple(r.tolist()))
        object.__setattr__(self, "v_k", tuple(v.tolist()))

    @property
    def r_last(self):
        return self.r_k[-1]

    def value(self, r):
        r = np.asarray(r, dtype=float)
        v = np.interp(r, self.r_k, self.v_k)
        return np.where(r <= self.r_last, v, 0.0)

    def r_dv(self, r):
        r = np.asarray(r, dtype=float)
        rk = np.asarray(self.r_k)
        slopes = np.diff(self.v_k) / np.diff(rk)
        idx = np.clip(np.searchsorted(rk, r, side="right") - 1, 0, len(slopes) - 1)
        inside = (r >= rk[0]) & (r < self.r_last)
        return np.where(inside, r * slopes[idx], 0.0)

    def breakpoints(self):
        return self.r_k

    def notes(self):
        msg = f"table extended by 0 beyond r = {self.r_last:g}"
        if self.v_k[-1] != 0.0:
            msg += f"; the jump of {self.v_k[-1]:g} there is excluded from x.grad V"
        return [msg]

    def to_dict(self):
        return {"family": self.family, "r": list(self.r_k), "v": list(self.v_k)}


@dataclass(frozen=True)
class SumPotential(PotentialSpec):
    terms: tuple
    family = "sum"

    def value(self, r):
        return sum(c * t.value(r) for c, t in self.terms)

    def r_dv(self, r):
        return sum(c * t.r_dv(r) for c, t in self.terms)

    def breakpoints(self):
        return tuple(b for _, t in self.terms for b in t.breakpoints())

    def is_zero(self):
        return all(c == 0 or t.is_zero() for c, t in self.terms)

    def notes(self):
        return [n for _, t in self.terms for n in t.notes()]

    def to_dict(self):
        return {"family": self.family,
                "terms": [{"coef": c, "potential": t.to_dict()} for c, t in self.terms]}


@dataclass(frozen=True)
class Dilation(PotentialSpec):
    lam: float
    inner: PotentialSpec
    family = "dilation"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValidationError("dilation factor must be positive")

    def value(self, r):
        return self.lam ** 2 * self.inner.value(self.lam * np.asarray(r, dtype=float))

    def r_dv(self, r):
        return self.lam ** 2 * self.inner.r_dv(self.lam * np.asarray(r, dtype=float))

    def breakpoints(self):
        return tuple(b / self.lam for b in self.inner.breakpoints())

    def is_zero(self):
        return self.inner.is_zero()

    def notes(self):
        return self.inner.notes()

    def to_dict(self):
        return {"family": self.family, "lam": self.lam, "inner": self.inner.to_dict()}


_ALIASES = {"gaussian": "gaussian-bump", "inverse-square": "truncated-inverse-square"}


def potential_from_dict(d: dict) -> PotentialSpec:
    """Build a potential from its JSON form."""
    if not isinstance(d, dict) or "family" not in d:
        raise ValidationError("potential spec must be an object with a 'family' key")
    fam = _ALIASES.get(d["family"], d["family"])
    params = d.get("params", {}) or {}
    try:
        if fam == "zero":
            return ZeroPotential()
        if fam == "gaussian-bump":
            return GaussianBump(float(params["A"]), float(params["sigma"]))
        if fam == "truncated-inverse-square":
            cut = params.get("r_cut")
            return InverseSquare(float(params["A"]), float(params["r0"]),
                                 None if cut is None else float(cut))
        if fam == "saturating":
            return Saturating(float(params["A"]), float(params["sigma"]))
        if fam == "table":
            return TablePotential(tuple(d["r"]), tuple(d["v"]))
        if fam == "sum":
            return SumPotential(tuple((float(t.get("coef", 1.0)), potential_from_dict(t["potential"]))
                                      for t in d["terms"]))
        if fam == "dilation":
            return Dilation(float(d["lam"]), potential_from_dict(d["inner"]))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed {fam} potential spec: {exc!r}") from None
    raise ValidationError(f"unknown potential family {d['family']!r}")


# ---------------------------------------------------------------- integrals

def _segments(extra=(), window=None):
    pts = {0.0}
    for k in range(_K_MIN, _K_MAX + 1):
        a = 2.0 ** k
        pts.update(a * (1 + np.arange(8) / 8.0))
    pts.update(float(b) for b in extra if 0 < b < 2.0 ** (_K_MAX + 1))
    if window is not None:
        pts.add(float(window))
    edges = np.array(sorted(pts))
    return edges[:-1], edges[1:]


def _segment_integrals(g, a, b):
    """int_a^b g(t) dt on each segment by 16-point Gauss-Legendre."""
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    t = mid[:, None] + half[:, None] * _GL_X[None, :]
    return half * (g(t) @ _GL_W)


@dataclass(frozen=True)
class HalfLineIntegral:
    value: float
    window: float
    divergent: bool


def _shell_sum(parts, a, k):
    return parts[(a >= 2.0 ** k) & (a < 2.0 ** (k + 1))].sum()


def _tail_diverges(parts, a, b):
    """Far dyadic shells that fail to decay signal divergence.

    An integrand ~ t^(-1-eps) has shell sums shrinking by 2^(-eps) per shell;
    the test calls the tail divergent when 20 shells shrink by less than 100x
    while still carrying weight.
    """
    first = _shell_sum(parts, a, _K_TAIL)
    last = _shell_sum(parts, a, _K_MAX)
    near = parts[b <= 2.0 ** _K_TAIL].sum()
    if not np.isfinite(parts.sum()):
        return True
    if first <= 1e-14 * max(near, 1e-300):
        return False
    return bool(last > 1e-2 * first)


def half_line_integral(g, breakpoints=(), window=None) -> HalfLineIntegral:
    """int_0^inf g(t) dt for g >= 0, with dyadic-shell divergence detection."""
    a, b = _segments(breakpoints, window)
    parts = _segment_integrals(g, a, b)
    total = float(parts.sum())
    win = float(parts[b <= window].sum()) if window is not None else total
    divergent = _tail_diverges(parts, a, b)
    return HalfLineIntegral(math.inf if divergent else total, win, divergent)


def lebesgue_norm(f, q: float, breakpoints=(), window=None):
    """(||f||_{L^q(R^3)}, ||f||_{L^q(|x| <= window)}) for radial f."""
    res = half_line_integral(lambda t: FOUR_PI * np.abs(f(t)) ** q * t * t, breakpoints, window)
    glob = math.inf if res.divergent else res.value ** (1.0 / q)
    return glob, res.window ** (1.0 / q)


def kato_profile(f, s, breakpoints=()):
    """4 pi [ (1/s) int_0^s |f| t^2 dt + int_s^inf |f| t dt ] at the radii s > 0."""
    s = np.asarray(s, dtype=float)
    a, b = _segments(tuple(breakpoints) + tuple(s))
    inner = np.cumsum(_segment_integrals(lambda t: np.abs(f(t)) * t * t, a, b))
    outer_parts = _segment_integrals(lambda t: np.abs(f(t)) * t, a, b)
    outer = np.cumsum(outer_parts[::-1])[::-1]
    idx = np.searchsorted(b, s)
    if _tail_diverges(outer_parts, a, b):
        return np.full_like(s, math.inf)
    return FOUR_PI * (inner[idx] / s + np.where(idx + 1 < len(outer), outer[np.minimum(idx + 1, len(outer) - 1)], 0.0))


def _kato(f, breakpoints, grid):
    at_zero = half_line_integral(lambda t: np.abs(f(t)) * t, breakpoints)
    if at_zero.divergent:
        return math.inf
    k0 = FOUR_PI * at_zero.value
    prof = kato_profile(f, grid.r, breakpoints)
    return float(max(k0, np.max(prof)))


def kato_norm(V: PotentialSpec, grid: RadialGrid | None = None) -> float:
    """Global Kato norm sup_x int |V(y)|/|x-y| dy of a radial potential.

    For radial V the Newton potential at |x| = s reduces to
    4 pi [ (1/s) int_0^s |V| t^2 dt + int_s^inf |V| t dt ]; the supremum is
    taken over s = 0 and the grid nodes.  Returns inf when the tail diverges.
    """
    if V.is_zero():
        return 0.0
    return _kato(V.value, V.breakpoints(), grid or RadialGrid())


# ---------------------------------------------------------------- analysis

@dataclass(frozen=True)
class PotentialReport:
    kato_norm: float
    kato_neg: float
    l32_norm: float
    lsigma: tuple
    nonneg: bool
    xgradV_nonpos: bool
    xgradV_nonneg: bool
    condition_2V: bool
    xgradV_l32: float
    xgradV_l32_window: float
    kato_small: bool
    window: float
    sampled_to: float
    in_K0: bool
    l32_window: float
    lsigma_window: float
    warnings: tuple = field(default_factory=tuple)

    @property
    def in_L32(self) -> bool:
        return math.isfinite(self.l32_norm)

    @property
    def in_Lsigma(self) -> bool:
        return math.isfinite(self.lsigma[1])

    @property
    def xgradV_in_L32(self) -> bool:
        return math.isfinite(self.xgradV_l32)

    def to_dict(self) -> dict:
        def num(x):
            return x if math.isfinite(x) else "inf"
        return {
            "kato_norm": num(self.kato_norm), "kato_neg": num(self.kato_neg),
            "l32_norm": num(self.l32_norm), "l32_norm_window": self.l32_window,
            "lsigma": {"sigma": self.lsigma[0], "norm": num(self.lsigma[1]),
                       "norm_window": self.lsigma_window},
            "nonneg": self.nonneg, "xgradV_nonpos": self.xgradV_nonpos,
            "xgradV_nonneg": self.xgradV_nonneg, "condition_2V": self.condition_2V,
            "xgradV_l32": num(self.xgradV_l32), "xgradV_l32_window": self.xgradV_l32_window,
            "kato_small": self.kato_small, "in_K0": self.in_K0,
            "window": self.window, "signs_sampled_to": self.sampled_to,
            "warnings": list(self.warnings),
        }


def sign_samples(grid: RadialGrid) -> np.ndarray:
    """Grid nodes with 10x refinement on [0, r_max], plus far dyadic probes."""
    fine = np.linspace(0.0, grid.r_max, 10 * (grid.n + 1) + 1)
    far = grid.r_max * 2.0 ** np.arange(1, 31)
    return np.concatenate([fine, far])


def _holds(x, scale, sign):
    tol = SIGN_TOL * (1.0 + np.abs(scale))
    return bool(np.all(x >= -tol)) if sign > 0 else bool(np.all(x <= tol))


def analyze(V: PotentialSpec, sigma: float = 2.0, grid: RadialGrid | None = None) -> PotentialReport:
    """Every admissibility quantity for V: norms, sign flags, tail diagnostics."""
    if not sigma > 1.5:
        raise ValidationError(f"sigma must exceed 3/2, got {sigma}")
    grid = grid or RadialGrid()
    bps = V.breakpoints()
    win = grid.r_max
    warnings = list(V.notes())

    rs = sign_samples(grid)
    v = V.value(rs)
    xg = V.r_dv(rs)
    nonneg = _holds(v, v, +1)
    neg_part = lambda t: np.maximum(-V.value(t), 0.0)

    if V.is_zero():
        k = kneg = 0.0
    else:
        k = _kato(V.value, bps, grid)
        kneg = 0.0 if nonneg else _kato(neg_part, bps, grid)
    l32, l32w = lebesgue_norm(V.value, 1.5, bps, win)
    ls, lsw = lebesgue_norm(V.value, sigma, bps, win)
    xl32, xl32w = lebesgue_norm(V.r_dv, 1.5, bps, win)
    for name, val in (("V in L^3/2", l32), (f"V in L^{sigma:g}", ls),
                      ("x.grad V in L^3/2", xl32), ("Kato norm", k)):
        if not math.isfinite(val):
            warnings.append(f"{name}: dyadic tail diverges; finite on [0, {win:g}] only")
    return PotentialReport(
        kato_norm=k, kato_neg=kneg, l32_norm=l32, lsigma=(sigma, ls),
        nonneg=nonneg,
        xgradV_nonpos=_holds(xg, v, -1), xgradV_nonneg=_holds(xg, v, +1),
        condition_2V=_holds(2 * v + xg, v, +1),
        xgradV_l32=xl32, xgradV_l32_window=xl32w,
        kato_small=bool(kneg < FOUR_PI), window=win, sampled_to=float(rs[-1]),
        in_K0=math.isfinite(k), l32_window=l32w, lsigma_window=lsw,
        warnings=tuple(warnings),
    )


@dataclass(frozen=True)
class InverseSquareBound:
    passed: bool
    v1: float
    first_violation: float | None = None


def inverse_square_bound_check(V: PotentialSpec, grid: RadialGrid | None = None,
                               report: PotentialReport | None = None) -> InverseSquareBound:
    """Check V(r) >= V(1)/r^2 at every node r >= 1.

    This lower bound follows from 2V + r V' >= 0 with V >= 0, so the check
    is only meaningful (and only accepted) for such potentials.
    """
    grid = grid or RadialGrid()
    report = report or analyze(V, grid=grid)
    if not (report.condition_2V and report.nonneg):
        raise ValidationError("inverse-square bound check needs V >= 0 and 2V + x.grad V >= 0")
    v1 = float(V.value(np.array([1.0]))[0])
    if not np.isfinite(v1):
        raise ValidationError("V(1) is not finite")
    r = grid.r[grid.r >= 1.0]
    bad = np.nonzero(V.value(r) < v1 / r ** 2 - 1e-10)[0]
    if len(bad):
        return InverseSquareBound(False, v1, float(r[bad[0]]))
    return InverseSquareBound(True, v1)
