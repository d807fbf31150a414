"""Ground state of -Q + Q'' + (2/r) Q' + Q^p = 0 by shooting, and its constants.

The shot starts at r = 0 with Q(0) = a, Q'(0) = 0, uses the Taylor series
a + c2 r^2 + c4 r^4 for the first substep and classical RK4 afterwards.
Too small an ``a`` makes Q turn back up before reaching zero; too large an
``a`` makes it cross zero.  Bisection between the two classes converges to
the positive decaying solution.  Past the radius where the two bracketing
shots separate, the profile is continued by its asymptotic form c e^{-r}/r.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.interpolate import CubicSpline

from .errors import BracketNotFound, GNAttainmentViolated, ProfileRejected, ValidationError
from .grid import RadialField, RadialGrid, gradient_sq_norm, integrate3d

CROSSES_ZERO = 1
TURNS_BACK = -1
REACHED_END = 0

POHOZAEV_TOL = 1e-6
# target RK4 substep; the shot is accurate to ~1e-12 at this spacing
SHOOT_STEP = 1.0 / 512


def critical_index(p: float) -> float:
    """s_c = 3/2 - 2/(p-1)."""
    return 1.5 - 2.0 / (p - 1.0)


def check_exponent(p: float, allow_mass_critical: bool = True) -> float:
    p = float(p)
    lo = 7.0 / 3.0
    if np.isclose(p, lo, rtol=0, atol=1e-12) and allow_mass_critical:
        return lo
    if not (lo < p < 5.0):
        raise ValidationError(f"exponent p = {p} outside [7/3, 5)")
    return p


@numba.njit(cache=True)
def _shoot(a, p, h, n, m):
    """Integrate from r = 0 and record Q, Q' at the n grid nodes.

    Returns (Q, dQ, status, last substep).  status is CROSSES_ZERO when Q
    became negative, TURNS_BACK when Q' became positive (or Q > 2a), and
    REACHED_END otherwise.
    """
    Q = np.zeros(n)
    P = np.zeros(n)
    c2 = (a - a ** p) / 6.0
    c4 = (1.0 - p * a ** (p - 1.0)) * c2 / 20.0
    hs = h / m
    r = hs
    q = a + c2 * r * r + c4 * r ** 4
    dq = 2.0 * c2 * r + 4.0 * c4 * r ** 3
    total = n * m
    for s in range(1, total + 1):
        if s % m == 0:
            Q[s // m - 1] = q
            P[s // m - 1] = dq
        if q < 0.0:
            return Q, P, 1, s
        if dq > 0.0 or q > 2.0 * a:
            return Q, P, -1, s
        if s == total:
            break
        k1q = dq
        k1p = -2.0 * dq / r + q - abs(q) ** (p - 1.0) * q
        r2 = r + 0.5 * hs
        q2 = q + 0.5 * hs * k1q
        p2 = dq + 0.5 * hs * k1p
        k2q = p2
        k2p = -2.0 * p2 / r2 + q2 - abs(q2) ** (p - 1.0) * q2
        q3 = q + 0.5 * hs * k2q
        p3 = dq + 0.5 * hs * k2p
        k3q = p3
        k3p = -2.0 * p3 / r2 + q3 - abs(q3) ** (p - 1.0) * q3
        r4 = r + hs
        q4 = q + hs * k3q
        p4 = dq + hs * k3p
        k4q = p4
        k4p = -2.0 * p4 / r4 + q4 - abs(q4) ** (p - 1.0) * q4
        q += hs / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        dq += hs / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        r = r4
    return Q, P, 0, total


@dataclass(frozen=True)
class GroundState:
    p: float
    profile: RadialField = field(repr=False)
    mass: float
    grad_sq: float
    lp1: float
    energy0: float
    cgn: float
    s_c: float
    threshold_me: float
    threshold_grad: float
    amplitude: float = 0.0
    bracket: tuple = (0.0, 0.0)
    residuals: dict = field(default_factory=dict)

    @property
    def grid(self) -> RadialGrid:
        return self.profile.grid

    def summary(self) -> dict:
        return {
            "p": self.p, "s_c": self.s_c, "amplitude": self.amplitude,
            "mass": self.mass, "grad_sq": self.grad_sq, "lp1": self.lp1,
            "energy0": self.energy0, "cgn": self.cgn,
            "threshold_me": self.threshold_me, "threshold_grad": self.threshold_grad,
            "residuals": dict(self.residuals), "grid": self.grid.to_dict(),
        }


def _classify_shot(a, p, grid, m):
    return _shoot(a, p, grid.h, grid.n, m)


def _find_bracket(p, grid, m, a_start=1.0, a_max=100.0):
    # a = 1 is the constant equilibrium, which never crosses zero
    a_lo, a = a_start, a_start
    while a <= a_max:
        status = _classify_shot(a, p, grid, m)[2]
        if status == CROSSES_ZERO:
            return a_lo, a
        a_lo = a
        a *= 1.5
    raise BracketNotFound(
        f"no ground state bracket for p = {p} with a in [{a_start}, {a_max}]")


def _bisect(p, grid, m, a_lo, a_hi, tol):
    # Bisect to machine precision: the tail patch starts where the two
    # bracketing shots separate, so a loose bracket corrupts the profile.
    while True:
        mid = 0.5 * (a_lo + a_hi)
        if mid <= a_lo or mid >= a_hi:
            break
        if _classify_shot(mid, p, grid, m)[2] == CROSSES_ZERO:
            a_hi = mid
        else:
            a_lo = mid
    if a_hi - a_lo > tol * a_hi:
        raise BracketNotFound(f"bisection stalled at width {a_hi - a_lo:.3e}")
    return a_lo, a_hi


def _assemble_profile(p, grid, m, a_lo, a_hi):
    Ql, _, _, il = _classify_shot(a_lo, p, grid, m)
    Qh, _, _, ih = _classify_shot(a_hi, p, grid, m)
    jmax = min(il, ih) // m - 1
    if jmax < 4:
        raise ProfileRejected("shots diverge before the first grid nodes")
    mid = 0.5 * (Ql[:jmax] + Qh[:jmax])
    gap = np.abs(Ql[:jmax] - Qh[:jmax])
    bad = np.nonzero(gap > 1e-6 * mid)[0]
    jm = (bad[0] if len(bad) else jmax) - 1
    r = grid.r
    Q = np.empty(grid.n)
    Q[:jm + 1] = mid[:jm + 1]
    rm = r[jm]
    Q[jm + 1:] = mid[jm] * rm / r[jm + 1:] * np.exp(-(r[jm + 1:] - rm))
    return Q, rm


def solve_ground_state(p: float, tol: float = 1e-10, grid: RadialGrid | None = None,
                       check: bool = True) -> GroundState:
    """Shooting solve for the positive radial ground state at exponent p."""
    p = check_exponent(p)
    if not (1e-12 <= tol <= 1e-4):
        raise ValidationError(f"tol must lie in [1e-12, 1e-4], got {tol}")
    grid = grid or RadialGrid()
    m = max(1, int(np.ceil(grid.h / SHOOT_STEP)))
    a_lo, a_hi = _find_bracket(p, grid, m)
    a_lo, a_hi = _bisect(p, grid, m, a_lo, a_hi, tol)
    Q, r_patch = _assemble_profile(p, grid, m, a_lo, a_hi)
    if Q[-1] > 1e-12:
        raise ProfileRejected(
            f"profile {Q[-1]:.2e} at r_max = {grid.r_max} has not decayed below 1e-12")
    profile = RadialField(grid, Q)
    mass = integrate3d(Q ** 2, grid)
    grad_sq = gradient_sq_norm(profile)
    lp1 = integrate3d(Q ** (p + 1), grid)
    energy0 = 0.5 * grad_sq - lp1 / (p + 1)
    s_c = critical_index(p)
    residuals = {
        "mass": abs(lp1 * (5 - p) / (2 * (p + 1)) - mass) / mass,
        "grad": abs(lp1 * 3 * (p - 1) / (2 * (p + 1)) - grad_sq) / grad_sq,
        "energy": abs(energy0 - (3 * p - 7) / (6 * (p - 1)) * grad_sq) / grad_sq,
        "patch_radius": float(r_patch),
    }
    if check and max(residuals["mass"], residuals["grad"], residuals["energy"]) > POHOZAEV_TOL:
        raise ProfileRejected(f"Pohozaev residuals too large: {residuals}", residuals)
    cgn = _gn_formula(p, mass, grad_sq)
    e_for_threshold = max(energy0, 0.0)
    gs = GroundState(
        p=p, profile=profile, mass=mass, grad_sq=grad_sq, lp1=lp1, energy0=energy0,
        cgn=cgn, s_c=s_c,
        threshold_me=mass ** (1 - s_c) * e_for_threshold ** s_c,
        threshold_grad=mass ** ((1 - s_c) / 2) * grad_sq ** (s_c / 2),
        amplitude=0.5 * (a_lo + a_hi), bracket=(a_lo, a_hi), residuals=residuals,
    )
    if check:
        sharp_gn_constant(gs)
    return gs


def _gn_formula(p, mass, grad_sq):
    return 2 * (p + 1) / (3 * (p - 1)) * mass ** (-(5 - p) / 4) * grad_sq ** (-(3 * p - 7) / 4)


def gn_quotient(u: RadialField, p: float) -> float:
    """||u||_{p+1}^{p+1} / (||u||_2^{(5-p)/2} ||grad u||_2^{3(p-1)/2})."""
    a2 = u.abs2()
    lp1 = integrate3d(a2 ** ((p + 1) / 2), u.grid)
    mass = integrate3d(a2, u.grid)
    grad_sq = gradient_sq_norm(u)
    return lp1 / (mass ** ((5 - p) / 4) * grad_sq ** (3 * (p - 1) / 4))


def sharp_gn_constant(gs: GroundState, rtol: float = 1e-6) -> float:
    """Sharp Gagliardo-Nirenberg constant, cross-checked against attainment at Q."""
    p = gs.p
    cgn = _gn_formula(p, gs.mass, gs.grad_sq)
    attained = gs.lp1 / (gs.mass ** ((5 - p) / 4) * gs.grad_sq ** (3 * (p - 1) / 4))
    if abs(attained - cgn) > rtol * cgn:
        raise GNAttainmentViolated(
            f"GN quotient at Q is {attained:.12g}, formula gives {cgn:.12g}")
    return cgn


def rescale(u: RadialField, lam: float, p: float, method: str = "cubic") -> RadialField:
    """lam^{2/(p-1)} u(lam r), resampled on the same grid.

    Resampling interpolates w = r u (cubic spline by default, or linear);
    points beyond r_max map to zero.
    """
    if not lam > 0:
        raise ValidationError(f"scale factor must be positive, got {lam}")
    grid = u.grid
    r = grid.r
    src = lam * r
    inside = src < grid.r_max
    rr = np.concatenate([[0.0], r, [grid.r_max]])
    w = np.concatenate([[0.0], u.w, [0.0]])
    vals = np.zeros(grid.n, dtype=complex)
    if method == "cubic":
        for part, unit in ((w.real, 1.0), (w.imag, 1j)):
            if np.any(part):
                vals[inside] += unit * CubicSpline(rr, part)(src[inside])
    elif method == "linear":
        vals[inside] = np.interp(src[inside], rr, w.real) + 1j * np.interp(src[inside], rr, w.imag)
    else:
        raise ValidationError(f"unknown interpolation {method!r}")
    vals = lam ** (2.0 / (p - 1.0)) * vals / src

    a2 = u.abs2()
    total = integrate3d(a2, grid)
    if total > 0:
        lost = integrate3d(np.where(r > lam * grid.r_max, a2, 0.0), grid) / total
        cum = np.cumsum(a2 * r ** 2)
        r99 = r[min(np.searchsorted(cum, 0.99 * cum[-1]), grid.n - 1)]
        if lost > 0.5 or r99 / lam < 8 * grid.h:
            raise ValidationError(
                f"resample underresolved at lam = {lam}: lost mass fraction {lost:.2f}, "
                f"support radius {r99 / lam:.3g} vs spacing {grid.h:.3g}")
    return RadialField(grid, vals)


def lambda_q(gs: GroundState, lam: float) -> RadialField:
    return gs.profile * lam
