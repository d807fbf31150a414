"""Conserved and monitored functionals, threshold ratios and explicit inequalities.

Threshold ratios are reported in the normalization used by the coercivity
argument: each product of norms is divided by its ground-state value and
raised to the power 1/s_c.  With this choice

    grad_ratio = y = (M^{(1-s_c)/s_c} ||grad u||^2)^{1/2} / (same for Q),
    me_ratio   = (M^{(1-s_c)/s_c} E_V) / (same for Q with E_0),

so that g(grad_ratio) <= me_ratio is the Gagliardo-Nirenberg bound and for
data lam*Q at p = 3 one gets grad_ratio = lam^2, me_ratio = 3 lam^4 - 2 lam^6.
Every ratio is < 1 exactly when the raw product is below threshold.
In the mass-critical case s_c = 0 the ratios degenerate to M/M[Q].
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import NumericalError, ValidationError
from .grid import (RadialField, RadialGrid, gradient_sq_norm, integrate3d, radial_derivative,
                   radial_integral)
from .groundstate import GroundState
from .potentials import PotentialSpec


@dataclass(frozen=True)
class FunctionalSnapshot:
    t: float
    mass: float
    grad_sq: float
    pot_term: float
    h_half_sq: float
    lp1: float
    energy_v: float
    k_functional: float
    p: float

    def to_dict(self) -> dict:
        return asdict(self)


def potential_samples(V: PotentialSpec | None, grid: RadialGrid) -> np.ndarray:
    if V is None:
        return np.zeros(grid.n)
    return np.asarray(V.value(grid.r), dtype=float)


def snapshot_values(values, grid: RadialGrid, vr, p: float, t: float = 0.0,
                    grad_sq: float | None = None) -> FunctionalSnapshot:
    """Snapshot from raw samples; ``vr`` holds V at the nodes."""
    a2 = values.real ** 2 + values.imag ** 2
    mass = integrate3d(a2, grid)
    if grad_sq is None:
        grad_sq = gradient_sq_norm(RadialField(grid, values))
    pot = integrate3d(vr * a2, grid) if np.any(vr) else 0.0
    lp1 = integrate3d(a2 ** ((p + 1) / 2), grid)
    h_half = grad_sq + pot
    return FunctionalSnapshot(
        t=float(t), mass=mass, grad_sq=grad_sq, pot_term=pot, h_half_sq=h_half, lp1=lp1,
        energy_v=0.5 * h_half - lp1 / (p + 1),
        k_functional=grad_sq - 3 * (p - 1) / (2 * (p + 1)) * lp1 + pot, p=float(p),
    )


def snapshot(u: RadialField, V: PotentialSpec | None, p: float, t: float = 0.0) -> FunctionalSnapshot:
    """Mass, energy and the other monitored functionals of u at time t."""
    return snapshot_values(u.values, u.grid, potential_samples(V, u.grid), p, t)


@dataclass(frozen=True)
class ThresholdRatios:
    me_ratio: float
    grad_ratio: float
    h_ratio: float
    negative_energy: bool = False

    def as_tuple(self):
        return (self.me_ratio, self.grad_ratio, self.h_ratio)

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.negative_energy:
            d["me_ratio"] = "below (negative energy)"
        return d


def threshold_products(s: FunctionalSnapshot, gs: GroundState) -> ThresholdRatios:
    """Ratios of the threshold products of a snapshot to those of Q."""
    if not math.isclose(s.p, gs.p, rel_tol=0, abs_tol=1e-12):
        raise ValidationError(f"snapshot exponent {s.p} differs from ground state {gs.p}")
    s_c = gs.s_c
    if s.mass <= 0:
        return ThresholdRatios(0.0, 0.0, 0.0, s.energy_v < 0)
    m = s.mass / gs.mass
    if abs(s_c) < 1e-12:
        # mass-critical: the products reduce to the mass
        neg = s.energy_v < 0
        return ThresholdRatios(-math.inf if neg else m, m, m, neg)
    w = m ** ((1 - s_c) / s_c)
    grad = math.sqrt(w * s.grad_sq / gs.grad_sq)
    h = math.sqrt(w * s.h_half_sq / gs.grad_sq) if s.h_half_sq > 0 else 0.0
    if s.energy_v < 0:
        return ThresholdRatios(-math.inf, grad, h, True)
    return ThresholdRatios(w * s.energy_v / gs.energy0, grad, h, False)


def g_function(y, p: float):
    """g(y) = 3(p-1)/(3p-7) y^2 - 4/(3p-7) y^{3(p-1)/2}; g(0) = 0, max g(1) = 1."""
    y = np.asarray(y, dtype=float)
    d = 3 * p - 7
    return 3 * (p - 1) / d * y ** 2 - 4 / d * y ** (1.5 * (p - 1))


@dataclass(frozen=True)
class CoercivityGap:
    delta_prime: float
    y: float
    side: str


def coercivity_gap(me_ratio: float, p: float, side: str = "below") -> CoercivityGap:
    """Solve g(y) = me_ratio on the requested side of y = 1 and convert to delta'.

    Below threshold the proof concludes y < (1 - 2 delta')^{2/(3p-7)}; above
    it concludes y > (1 + delta')^{2(p-1)/(3p-7)}.
    """
    if abs(3 * p - 7) < 1e-12:
        raise ValidationError("the coercivity function is undefined at p = 7/3")
    if side not in ("below", "above"):
        raise ValidationError(f"side must be 'below' or 'above', got {side!r}")
    if me_ratio > 1:
        raise ValidationError(f"not below threshold: me_ratio = {me_ratio}")
    if me_ratio >= 1 - 1e-15:
        # the maximum g(1) = 1 is the threshold itself: no gap
        return CoercivityGap(0.0, 1.0, side)
    f = lambda y: float(g_function(y, p)) - me_ratio
    try:
        if side == "below":
            if me_ratio <= 0:
                return CoercivityGap(0.5, 0.0, side)
            y = brentq(f, 0.0, 1.0, xtol=1e-15, rtol=1e-15)
            dp = 0.5 * (1 - y ** ((3 * p - 7) / 2))
        else:
            hi = 2.0
            while f(hi) > 0:
                hi *= 2
                if hi > 1e6:
                    raise NumericalError("no root of g above y = 1")
            y = brentq(f, 1.0, hi, xtol=1e-15, rtol=1e-15)
            dp = y ** ((3 * p - 7) / (2 * (p - 1))) - 1
    except ValueError as exc:
        raise NumericalError(f"coercivity root not found: {exc}") from None
    return CoercivityGap(float(dp), float(y), side)


def virial_functional_lower_bound(delta_prime: float, p: float) -> float:
    """Constant c with ||grad u||^2 - 3(p-1)/(2(p+1)) ||u||_{p+1}^{p+1} >= c ||u||_{p+1}^{p+1}."""
    return 3 * (p - 1) * delta_prime / ((p + 1) * (1 - 2 * delta_prime))


def k_functional_margin(s0: FunctionalSnapshot, gs: GroundState) -> float:
    """delta = 3(p-1)/2 * eps1 bounding k_functional(t) < -delta above threshold.

    eps1 = ((M[Q]/M[u0])^{(1-s_c)/s_c} E_0[Q] - E_V[u0]) / 2.
    """
    s_c = gs.s_c
    if s_c <= 0:
        raise ValidationError("margin defined for mass-supercritical exponents only")
    eps1 = 0.5 * ((gs.mass / s0.mass) ** ((1 - s_c) / s_c) * gs.energy0 - s0.energy_v)
    return 1.5 * (gs.p - 1) * eps1


def _value_at_origin(a2):
    # |u|^2 is even in r: Richardson through the first two nodes
    return max((4 * a2[0] - a2[1]) / 3, 0.0)


@dataclass(frozen=True)
class InequalityCheck:
    lhs: float
    rhs: float
    passed: bool


def hardy_check(u: RadialField, q: float) -> InequalityCheck:
    """int |u|^2/|x|^q <= (2/(3-q))^q ||u||_2^{2-q} ||grad u||_2^q for q in [0, 2]."""
    if not 0 <= q <= 2:
        raise ValidationError(f"q must lie in [0, 2], got {q}")
    grid = u.grid
    a2 = u.abs2()
    g0 = _value_at_origin(a2) if q == 2 else 0.0
    lhs = radial_integral(a2 * grid.r ** (2 - q), grid, g0=g0)
    mass = integrate3d(a2, grid)
    grad = gradient_sq_norm(u)
    rhs = (2 / (3 - q)) ** q * mass ** ((2 - q) / 2) * grad ** (q / 2)
    if q == 0:
        lhs = rhs = mass
    return InequalityCheck(lhs, rhs, bool(lhs <= rhs * (1 + 1e-8)))


def gn_check(u: RadialField, gs: GroundState) -> InequalityCheck:
    """||u||_{p+1}^{p+1} <= C_GN ||u||_2^{(5-p)/2} ||grad u||_2^{3(p-1)/2}."""
    p = gs.p
    a2 = u.abs2()
    lhs = integrate3d(a2 ** ((p + 1) / 2), u.grid)
    mass = integrate3d(a2, u.grid)
    grad = gradient_sq_norm(u)
    rhs = gs.cgn * mass ** ((5 - p) / 4) * grad ** (3 * (p - 1) / 4)
    return InequalityCheck(lhs, rhs, bool(lhs <= rhs * (1 + 1e-8)))


@dataclass(frozen=True)
class ExteriorQuotient:
    quotient: float
    numerator: float
    denominator: float
    sentinel: str | None = None


def radial_sobolev_check(u: RadialField, R: float, p: float) -> ExteriorQuotient:
    """||u||_{L^{p+1}(r>=R)}^{p+1} / (R^{1-p} ||u||_{L^2(r>=R)}^{(p+3)/2} ||grad u||_{L^2(r>=R)}^{(p-1)/2}).

    The inequality holds with an unspecified constant, so only boundedness of
    this quotient is meaningful.
    """
    grid = u.grid
    if not 0 < R < grid.r_max / 2:
        raise ValidationError(f"R must lie in (0, r_max/2), got {R}")
    ext = grid.r >= R
    a2 = u.abs2()
    num = integrate3d(np.where(ext, a2 ** ((p + 1) / 2), 0.0), grid)
    m_ext = integrate3d(np.where(ext, a2, 0.0), grid)
    du = radial_derivative(u)
    g_ext = integrate3d(np.where(ext, np.abs(du) ** 2, 0.0), grid)
    den = R ** (1 - p) * m_ext ** ((p + 3) / 4) * g_ext ** ((p - 1) / 4)
    tiny = 1e-300
    # once the exterior gradient sinks to the round-off floor of the spectral
    # derivative the quotient is noise
    if g_ext <= 1e-26 * integrate3d(np.abs(du) ** 2, grid):
        return ExteriorQuotient(math.nan, num, den, "0/0")
    if den <= tiny:
        return ExteriorQuotient(math.nan, num, den, "0/0" if num <= tiny else "x/0")
    return ExteriorQuotient(num / den, num, den)
