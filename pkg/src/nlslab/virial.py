"""Virial weights, the radial virial identities and their trajectory checks.

Every weight is radial, omega(r) = R^2 phi(r/R) (the cutoff chi is not
rescaled in amplitude), with phi built from its second derivative.  On a
transition annulus phi'' is a C^7 smoothstep (and for the compactly
supported weight an extra polynomial bump), so omega^(3) and omega^(4)
are smooth enough for second-order finite-difference checks.  Integrating phi'' fixes the far-field offsets:

    w:   phi = x^2 (x <= 1),  3x - c_w (x >= 2),  phi', phi'' >= 0
    F:   phi = x^2/2 (x <= 1), 3x/2 - c_F (x >= 2), phi'' <= 1
    psi: phi = x^2 (x <= 1),  0 (x >= 3),          phi'' <= 2
    chi: phi = 1 (x <= 1/2),  0 (x >= 1)

The offsets c_w and c_F are forced: no convex bridge joins x^2 to 3x - 4,
and no bridge with phi'' <= 1 joins x^2/2 to 3x/2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial as P
from scipy.interpolate import PPoly
from scipy.optimize import brentq

from .errors import NumericalError, ValidationError
from .functionals import potential_samples
from .grid import RadialField, RadialGrid, gradient_sq_norm, integrate3d, radial_derivative
from .potentials import PotentialSpec

KINDS = ("unweighted", "chi", "w", "psi", "f")
_X = P([0.0, 1.0])
# C^7 smoothstep 0 -> 1 and a C^5 bump keep omega^(4) three times differentiable
_SMOOTH = _X ** 8 * P([math.comb(7 + k, k) * math.comb(15, 7 - k) * (-1) ** k for k in range(8)])
_BUMP = _X ** 6 * (1 - _X) ** 6
_PSI_STEP_START = 0.7


def _on(poly: P, width: float) -> P:
    """poly(s / width) as a polynomial in the local coordinate s."""
    return poly(P([0.0, 1.0 / width]))


def _ppoly(breaks, pieces) -> PPoly:
    """PPoly from polynomials in the local coordinate x - breaks[i].

    The last piece extends to infinity by extrapolation.
    """
    deg = max(p.degree() for p in pieces)
    c = np.zeros((deg + 1, len(pieces)))
    for i, poly in enumerate(pieces):
        local = poly.coef
        c[deg + 1 - len(local):, i] = local[::-1]
    x = np.append(np.asarray(breaks, dtype=float), breaks[-1] + 1.0)
    return PPoly(c, x, extrapolate=True)


def _from_second(breaks, second, v0=0.0, d0=0.0) -> PPoly:
    """Integrate a piecewise second derivative twice from value v0, slope d0."""
    pp = _ppoly(breaks, second).antiderivative(2)
    c = pp.c.copy()
    c[-1, :] += v0 + d0 * (pp.x[:-1] - pp.x[0])
    c[-2, :] += d0
    return PPoly(c, pp.x, extrapolate=True)


def _integral(poly: P, width):
    F = poly.integ()
    return F(width) - F(0.0)


@lru_cache(maxsize=None)
def _psi_bump():
    """Width and height of the dip in psi'' that brings psi and psi' to 0 at x = 3."""
    tau = _PSI_STEP_START
    lw = 2 - 2 * tau
    step = 2 * _on(_SMOOTH, lw)
    i_step = _integral(step, lw)
    iw_step = _integral(step * P([lw, -1.0]), lw)

    # phi'' = 2 - D on [1, 3] with D = step + c * bump; need int D = 6, int (3-x) D = 9
    def parts(width):
        bump = _on(_BUMP, 2 * width)
        c = (6.0 - i_step) / _integral(bump, 2 * width)
        return c, iw_step + c * _integral(bump * P([2.0, -1.0]), 2 * width) - 9.0

    width = brentq(lambda s: parts(s)[1], 0.01, tau, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return width, parts(width)[0]


@lru_cache(maxsize=None)
def _profile(kind: str) -> PPoly:
    two, one, zero = P([2.0]), P([1.0]), P([0.0])
    if kind == "unweighted":
        return _from_second([0.0], [two])
    if kind == "w":
        return _from_second([0.0, 1.0, 2.0], [two, 2 * (1 - _on(_SMOOTH, 1.0)), zero])
    if kind == "f":
        return _from_second([0.0, 1.0, 2.0], [one, 1 - _on(_SMOOTH, 1.0), zero])
    if kind == "psi":
        width, c = _psi_bump()
        a, b = 1 + 2 * width, 1 + 2 * _PSI_STEP_START
        pp = _from_second([0.0, 1.0, a, b, 3.0],
                          [two, two - c * _on(_BUMP, a - 1), two, two - 2 * _on(_SMOOTH, 3 - b), zero])
        # remove the round-off residue on the flat exterior piece
        pp.c[:, -1] = 0.0
        return pp
    if kind == "chi":
        return _ppoly([0.0, 0.5, 1.0], [one, 1 - _on(_SMOOTH, 0.5), zero])
    raise ValidationError(f"unknown weight kind {kind!r}; choose from {KINDS}")


def far_field_offset(kind: str) -> float:
    """c in phi(x) = slope * x - c beyond x = 2 for the w and F weights."""
    if kind not in ("w", "f"):
        raise ValidationError("only the w and f weights have a linear far field")
    pp = _profile(kind)
    slope = float(pp.derivative()(3.0))
    return slope * 3.0 - float(pp(3.0))


@dataclass(frozen=True)
class Weight:
    """Radial weight omega(r) = R^2 phi(r/R) (amplitude not rescaled for chi)."""

    kind: str
    R: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown weight kind {self.kind!r}; choose from {KINDS}")
        if not self.R > 0:
            raise ValidationError(f"R must be positive, got {self.R}")

    @property
    def key(self) -> str:
        return self.kind if self.kind == "unweighted" else f"{self.kind}:R={self.R:g}"

    @property
    def amplitude_power(self) -> int:
        return 0 if self.kind == "chi" else 2

    def derivative(self, r, order: int = 0) -> np.ndarray:
        """omega^(order)(r), order 0..4."""
        if not 0 <= order <= 4:
            raise ValidationError(f"derivative order must be 0..4, got {order}")
        return self._derivative(r, order)

    def _derivative(self, r, order):
        pp = _profile(self.kind)
        if order:
            pp = pp.derivative(order)
        R = 1.0 if self.kind == "unweighted" else self.R
        x = np.asarray(r, dtype=float) / R
        return R ** (self.amplitude_power - order) * pp(x)

    def samples(self, grid: RadialGrid) -> np.ndarray:
        """Array (5, n) of omega, omega', ..., omega'''' at the grid nodes."""
        return np.stack([self.derivative(grid.r, k) for k in range(5)])

    def laplacian(self, r) -> np.ndarray:
        return self.derivative(r, 2) + 2 * self.derivative(r, 1) / np.asarray(r, dtype=float)

    def to_dict(self):
        return {"kind": self.kind, "R": self.R}


def weight_violations(w: Weight, grid: RadialGrid, tol: float = 1e-10) -> list:
    """Check the defining properties of a weight on the grid; returns messages."""
    r = grid.r
    d = w.samples(grid)
    R = w.R
    out = []

    def need(mask, cond, what):
        if np.any(mask) and not np.all(cond[mask]):
            i = int(np.flatnonzero(mask & ~cond)[0])
            out.append(f"{what} fails at r = {r[i]:.6g}")

    scale = R ** w.amplitude_power
    if w.kind == "unweighted":
        need(r > 0, np.abs(d[0] - r ** 2) <= tol * (1 + r ** 2), "omega = r^2")
    elif w.kind == "chi":
        need(r <= R / 2, np.abs(d[0] - 1) <= tol, "chi = 1 inside R/2")
        need(r >= R, np.abs(d[0]) <= tol, "chi = 0 outside R")
        need(r > 0, (d[0] >= -tol) & (d[0] <= 1 + tol), "0 <= chi <= 1")
    elif w.kind == "w":
        need(r <= R, np.abs(d[0] - r ** 2) <= tol * (1 + r ** 2), "w = r^2 inside R")
        c = far_field_offset("w")
        need(r >= 2 * R, np.abs(d[0] - (3 * R * r - c * R ** 2)) <= tol * (1 + r * R), "w linear beyond 2R")
        need(r > 0, d[1] >= -tol * R, "w' >= 0")
        need(r > 0, d[2] >= -tol, "w'' >= 0")
    elif w.kind == "psi":
        need(r <= R, np.abs(d[0] - r ** 2) <= tol * (1 + r ** 2), "psi = r^2 inside R")
        need(r >= 3 * R, np.abs(d[0]) <= tol * scale, "psi = 0 beyond 3R")
        need(r > 0, d[2] <= 2 + 100 * tol, "psi'' <= 2")
    elif w.kind == "f":
        need(r <= R, np.abs(d[0] - 0.5 * r ** 2) <= tol * (1 + r ** 2), "F = r^2/2 inside R")
        need(r > 0, 1 - d[2] >= -tol, "1 - F'' >= 0")
    # derivative samples against centered differences of the next-lower order,
    # allowing the leading truncation term h^2/6 |omega^(k+3)|
    h = grid.h
    for k in range(4):
        fd = (d[k][2:] - d[k][:-2]) / (2 * h)
        err = np.abs(fd - d[k + 1][1:-1])
        high = np.abs(w._derivative(r, k + 3))
        high = np.maximum(np.maximum(high[2:], high[:-2]), high[1:-1])
        roundoff = 1e-10 * np.max(np.abs(d[k])) / h + 1e-8 * np.max(np.abs(d[k + 1]))
        bound = h ** 2 * high + roundoff + 1e-9 * (1 + np.abs(d[k + 1][1:-1]))
        if np.any(err > bound):
            out.append(f"derivative {k + 1} inconsistent with finite differences "
                       f"({float(np.max(err)):.3g})")
    return out


def make_weight(kind: str, R: float = 1.0, grid: RadialGrid | None = None) -> Weight:
    """Construct a weight and verify its defining properties on the grid."""
    w = Weight(kind, R)
    bad = weight_violations(w, grid or RadialGrid())
    if bad:
        raise NumericalError(f"weight {w.key} violates: " + "; ".join(bad))
    return w


@dataclass(frozen=True)
class VirialValues:
    I: float
    I1: float
    I2: float
    I1_scale: float
    I2_scale: float
    I2_unweighted: float | None = None

    def to_dict(self):
        return {"I": self.I, "I1": self.I1, "I2": self.I2, "I1_scale": self.I1_scale,
                "I2_scale": self.I2_scale, "I2_unweighted": self.I2_unweighted}


def virial_eval(u: RadialField, V: PotentialSpec | None, p: float, w: Weight,
                nonlinearity: float = 1.0) -> VirialValues:
    """I = int omega |u|^2 and its first two time derivatives from the radial formulas.

    ``nonlinearity`` scales the |u|^{p-1} u term of the equation (0 for the
    free flow), and with it the L^{p+1} terms of I''.

    For radial u the Hessian term sum omega_ij u_i conj(u_j) reduces to
    omega'' |u'|^2, and the angular exterior terms of the general identity
    vanish identically, so they are not evaluated.
    """
    grid = u.grid
    r = grid.r
    v = u.values
    a2 = u.abs2()
    du = radial_derivative(u)
    d = w.samples(grid)
    vr = potential_samples(V, grid)
    xdv = np.asarray(V.r_dv(r), dtype=float) if V is not None and not V.is_zero() else np.zeros_like(r)

    I = integrate3d(d[0] * a2, grid)
    cur = np.imag(np.conj(v) * du)
    I1 = 2 * integrate3d(d[1] * cur, grid)
    I1_scale = 2 * integrate3d(np.abs(d[1]) * np.sqrt(a2) * np.abs(du), grid)

    lp = a2 ** ((p + 1) / 2)
    kin = 4 * integrate3d(d[2] * np.abs(du) ** 2, grid)
    nl = -2 * nonlinearity * (p - 1) / (p + 1) * integrate3d((d[2] + 2 * d[1] / r) * lp, grid)
    bih = -integrate3d((d[4] + 4 * d[3] / r) * a2, grid)
    pot = -2 * integrate3d(d[1] / r * xdv * a2, grid)
    I2 = kin + nl + bih + pot
    I2_scale = abs(kin) + abs(nl) + abs(bih) + abs(pot)

    unweighted = None
    if w.kind == "unweighted":
        # the same identity with the Parseval gradient, so it is exact in quadrature
        G = gradient_sq_norm(u)
        lp1 = integrate3d(lp, grid)
        unweighted = 8 * G - 12 * nonlinearity * (p - 1) / (p + 1) * lp1 - 4 * integrate3d(xdv * a2, grid)
        I2 = unweighted
    return VirialValues(I, I1, I2, I1_scale, I2_scale, unweighted)


def hessian_term_tensor(u_r, omega1, omega2, x, r):
    """4 Re sum_ij omega_ij u_i conj(u_j) at Cartesian sample points x of shape (3, ...).

    ``u_r``, ``omega1``, ``omega2`` are the radial derivative of u and the
    first two derivatives of omega at the radii r = |x|.
    """
    n = x / r
    total = np.zeros(np.shape(r))
    for i in range(3):
        for j in range(3):
            hij = (omega2 - omega1 / r) * n[i] * n[j] + (omega1 / r if i == j else 0.0)
            total = total + hij * np.real(u_r * n[i] * np.conj(u_r * n[j]))
    return 4 * total


def annulus_identity(u: RadialField, R: float) -> tuple:
    """Both sides of ||grad(chi_R u)||^2 = ||chi_R grad u||^2 - int chi_R (Lap chi_R) |u|^2."""
    grid = u.grid
    chi = Weight("chi", R)
    c0, c1 = chi.derivative(grid.r, 0), chi.derivative(grid.r, 1)
    lap = chi.laplacian(grid.r)
    du = radial_derivative(u)
    lhs = gradient_sq_norm(RadialField(grid, c0 * u.values))
    rhs = integrate3d(c0 ** 2 * np.abs(du) ** 2, grid) - integrate3d(c0 * lap * u.abs2(), grid)
    return lhs, rhs


@dataclass(frozen=True)
class VirialSeries:
    weight: Weight
    times: np.ndarray
    I: np.ndarray
    I1: np.ndarray
    I2: np.ndarray
    I1_scale: np.ndarray
    I2_scale: np.ndarray
    I2_unweighted: np.ndarray | None = None

    def __len__(self):
        return len(self.times)


def virial_series(trace, w: Weight, V: PotentialSpec | None = None) -> VirialSeries:
    """Series for weight w from a trace that recorded it or stored its fields."""
    vals = trace.virial_series.get(w.key)
    if vals is None:
        if not trace.fields:
            raise ValidationError(
                f"trace has neither a virial series for {w.key} nor stored fields")
        if V is None and trace.potential is not None:
            from .potentials import potential_from_dict
            V = potential_from_dict(trace.potential)
        vals = [virial_eval(RadialField(trace.grid, f), V, trace.p, w, trace.nonlinearity)
                for f in trace.fields]
    arr = lambda name: np.array([getattr(v, name) for v in vals])
    un = arr("I2_unweighted") if w.kind == "unweighted" else None
    return VirialSeries(w, trace.times, arr("I"), arr("I1"), arr("I2"), arr("I1_scale"),
                        arr("I2_scale"), un)


@dataclass(frozen=True)
class VirialConsistency:
    status: str
    max_rel_err: float
    err_I: float
    err_I1: float
    fd_resid: np.ndarray = field(repr=False, default=None)


def virial_consistency(trace, w: Weight, V: PotentialSpec | None = None,
                       min_snapshots: int = 64) -> VirialConsistency:
    """Compare centered differences of I and I1 with the identities for I1 and I2.

    Errors are taken relative to the largest term magnitude of the identity
    along the series, so a series that should vanish identically is
    measured against the size of the terms that cancel.
    """
    s = virial_series(trace, w, V)
    if len(s) < min_snapshots:
        return VirialConsistency("inconclusive", math.nan, math.nan, math.nan)
    t = s.times
    dI = np.gradient(s.I, t)[1:-1]
    dI1 = np.gradient(s.I1, t)[1:-1]
    r1 = dI - s.I1[1:-1]
    r2 = dI1 - s.I2[1:-1]
    e1 = float(np.max(np.abs(r1)) / max(np.max(s.I1_scale), 1e-300))
    e2 = float(np.max(np.abs(r2)) / max(np.max(s.I2_scale), 1e-300))
    resid = np.concatenate([[np.nan], r2, [np.nan]])
    return VirialConsistency("measured", max(e1, e2), e1, e2, resid)


def morawetz_average(trace, R: float, T: float) -> float:
    """(1/T) int_0^T int_{|x| <= R/2} |u|^{p+1} dx dt by the trapezoid rule over snapshots."""
    times = trace.times
    if T <= 0:
        raise ValidationError(f"T must be positive, got {T}")
    if T > times[-1] * (1 + 1e-12):
        raise ValidationError(f"T = {T} is beyond the trace horizon {times[-1]}")
    key = float(R)
    if key in trace.interior_lp1:
        vals = np.asarray(trace.interior_lp1[key])
    elif trace.fields:
        r = trace.grid.r
        vals = np.array([integrate3d(np.where(r <= R / 2, np.abs(f) ** (trace.p + 1), 0.0),
                                     trace.grid) for f in trace.fields])
    else:
        raise ValidationError(f"trace has no interior L^(p+1) series for R = {R} and no fields")
    sel = times <= T
    tt, vv = times[sel], vals[sel]
    if tt[-1] < T:
        # close the last interval by linear interpolation
        j = int(np.searchsorted(times, T))
        f = (T - times[j - 1]) / (times[j] - times[j - 1])
        tt = np.append(tt, T)
        vv = np.append(vv, (1 - f) * vals[j - 1] + f * vals[j])
    if len(tt) < 2:
        raise ValidationError("need at least two snapshots inside [0, T]")
    return float(np.trapezoid(vv, tt) / T) if hasattr(np, "trapezoid") else float(np.trapz(vv, tt) / T)


def theta_q(q: float, p: float) -> float:
    """Interpolation exponent 2(q - (p+1)) / ((p+1)(q - 2)) for q > p + 1."""
    if not q > p + 1:
        raise ValidationError(f"need q > p + 1, got q = {q}, p = {p}")
    return 2 * (q - (p + 1)) / ((p + 1) * (q - 2))
