"""Decide which branch of the scattering / blow-up dichotomy the data satisfy.

The verdict is a statement about hypotheses: it says which conclusion the
threshold dichotomy (or, at the mass-critical exponent, the negative-energy
blow-up criterion) predicts for (u0, V, p).  It makes no claim about what a simulation will show.

Branch order: scattering side first, then the blow-up side with its
blow-up upgrade, then the mass-critical negative-energy branch.  Conditions on V that
hold only on the computational window [0, r_max], or only at sampled
points, keep the verdict and add a provenance qualifier.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import NumericalError, ValidationError
from .functionals import FunctionalSnapshot, ThresholdRatios, snapshot, threshold_products
from .grid import RadialField, RadialGrid, integrate3d
from .groundstate import GroundState
from .potentials import PotentialReport, PotentialSpec, ZeroPotential, analyze

MASS_CRITICAL = 7.0 / 3.0
REFINEMENT_TOL = 1e-4


class Verdict(str, Enum):
    SCATTERS = "Scatters"
    GLOBAL_BOUNDED = "GlobalBounded"
    BLOWUP_OR_GROWUP = "BlowUpOrGrowUp"
    BLOWUP = "BlowUp"
    NEGATIVE_ENERGY_BLOWUP = "NegativeEnergyBlowUp"
    INDETERMINATE = "Indeterminate"

    def __str__(self):
        return self.value


# how strong a claim each verdict makes; used by monotonicity checks
CLAIM_STRENGTH = {
    Verdict.INDETERMINATE: 0,
    Verdict.GLOBAL_BOUNDED: 1,
    Verdict.BLOWUP_OR_GROWUP: 1,
    Verdict.NEGATIVE_ENERGY_BLOWUP: 1,
    Verdict.SCATTERS: 2,
    Verdict.BLOWUP: 2,
}


@dataclass(frozen=True)
class Hypothesis:
    condition: str
    value: object
    satisfied: bool
    provenance: str = "computed"

    def __post_init__(self):
        object.__setattr__(self, "satisfied", bool(self.satisfied))
        if isinstance(self.value, np.floating):
            object.__setattr__(self, "value", float(self.value))

    def to_dict(self):
        v = self.value
        if isinstance(v, float) and not math.isfinite(v):
            v = str(v)
        return {"condition": self.condition, "value": v, "satisfied": self.satisfied,
                "provenance": self.provenance}


@dataclass(frozen=True)
class ThresholdReport:
    snapshot: FunctionalSnapshot
    ratios: ThresholdRatios
    potential: PotentialReport
    flags: dict
    verdict: Verdict
    conclusion: str
    hypothesis_trace: tuple
    qualifiers: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "verdict": str(self.verdict), "conclusion": self.conclusion,
            "qualifiers": list(self.qualifiers),
            "ratios": self.ratios.to_dict(), "snapshot": self.snapshot.to_dict(),
            "flags": dict(self.flags), "potential": self.potential.to_dict(),
            "hypothesis_trace": [h.to_dict() for h in self.hypothesis_trace],
        }


def mass_refinement_error(u: RadialField) -> float:
    """Relative change of the mass quadrature between spacing 2h and h."""
    grid = u.grid
    a2 = u.abs2()
    fine = integrate3d(a2, grid)
    if grid.n % 2 == 1:
        coarse_grid = grid.coarsen()
        coarse = integrate3d(a2[1::2], coarse_grid)
    else:
        w = np.full(grid.n, grid.h)
        coarse = 4 * np.pi * float(np.dot(w, a2 * grid.r ** 2))
    return abs(fine - coarse) / max(abs(fine), 1e-300)


def finite_variance(u: RadialField, decay: float = 1e-3) -> bool:
    """Dyadic Cauchy test for int r^4 |u|^2 dr (x u in L^2).

    The shell contributions over [2^k, 2^(k+1)) inside the window must have
    decayed to ``decay`` times their peak by the outermost full shell.
    """
    grid = u.grid
    r = grid.r
    dens = u.abs2() * r ** 4
    kmax = int(np.floor(np.log2(grid.r_max))) - 1
    shells = []
    for k in range(0, kmax + 1):
        sel = (r >= 2.0 ** k) & (r < 2.0 ** (k + 1))
        shells.append(float(np.sum(dens[sel])) * grid.h)
    shells = np.array(shells)
    if len(shells) < 2 or shells.max() == 0:
        return True
    return bool(shells[-1] <= decay * shells.max())


def _window_cond(name, global_value, window_value, window):
    if math.isfinite(global_value):
        return Hypothesis(name, global_value, True, "global (dyadic tail test)")
    if math.isfinite(window_value):
        return Hypothesis(name, window_value, True, f"window [0, {window:g}] only")
    return Hypothesis(name, global_value, False, "diverges")


def _sampled(name, ok, rep):
    return Hypothesis(name, ok, ok, f"sampled on [0, {rep.sampled_to:.3g}]")


def _qualifiers(hyps):
    return tuple(sorted({f"{h.condition}: {h.provenance}" for h in hyps
                         if h.satisfied and h.provenance.startswith("window")}))


def classify(u0: RadialField, V: PotentialSpec | None, p: float, gs: GroundState,
             sigma: float = 2.0, report: PotentialReport | None = None) -> ThresholdReport:
    """Evaluate the dichotomy hypotheses for (u0, V, p) and emit a verdict."""
    if not math.isclose(gs.p, p, rel_tol=0, abs_tol=1e-12):
        raise ValidationError(f"ground state is for p = {gs.p}, data for p = {p}")
    if not np.any(u0.values):
        raise ValidationError("initial data must be nonzero")
    err = mass_refinement_error(u0)
    if err > REFINEMENT_TOL:
        raise ValidationError(
            f"initial data underresolved: mass quadrature changes by {err:.2e} under refinement")
    V = V or ZeroPotential()
    grid = u0.grid
    rep = report or analyze(V, sigma, grid)
    s0 = snapshot(u0, V, p, 0.0)
    ratios = threshold_products(s0, gs)
    fv = finite_variance(u0)
    flags = {"data_radial": True, "finite_variance": fv,
             "mass_refinement_error": err}
    win = rep.window

    if rep.nonneg and ratios.h_ratio < ratios.grad_ratio * (1 - 1e-10):
        raise NumericalError(
            f"h_ratio {ratios.h_ratio} < grad_ratio {ratios.grad_ratio} contradicts V >= 0")

    nonneg = _sampled("V >= 0", rep.nonneg, rep)
    xg_l32 = _window_cond("x.grad V in L^3/2", rep.xgradV_l32, rep.xgradV_l32_window, win)
    in_k0 = _window_cond("V in K_0", rep.kato_norm, rep.kato_norm if rep.in_K0 else math.inf, win)
    in_l32 = _window_cond("V in L^3/2", rep.l32_norm, rep.l32_window, win)
    in_ls = _window_cond(f"V in L^{rep.lsigma[0]:g}", rep.lsigma[1], rep.lsigma_window, win)
    class_ok = (in_k0.satisfied and in_l32.satisfied) or in_ls.satisfied
    v_class = Hypothesis("V in K_0 and L^3/2, or V in L^sigma", class_ok, class_ok,
                         "derived")
    cond2v = _sampled("2V + x.grad V >= 0", rep.condition_2V, rep)
    xg_nonneg = _sampled("x.grad V >= 0", rep.xgradV_nonneg, rep)
    xg_nonpos = _sampled("x.grad V <= 0", rep.xgradV_nonpos, rep)
    common = [nonneg, xg_l32]
    common_ok = all(h.satisfied for h in common)

    def result(verdict, conclusion, hyps):
        return ThresholdReport(s0, ratios, rep, flags, verdict, conclusion,
                               tuple(hyps), _qualifiers(hyps))

    if abs(p - MASS_CRITICAL) < 1e-12:
        neg = Hypothesis("E_V[u0] < 0", s0.energy_v, s0.energy_v < 0)
        hyps = common + [neg, v_class, in_k0, in_l32, in_ls, cond2v]
        if not (common_ok and neg.satisfied and class_ok and cond2v.satisfied):
            return result(Verdict.INDETERMINATE, "no branch applies", hyps)
        return _upgrade(result, Verdict.NEGATIVE_ENERGY_BLOWUP, hyps, xg_nonneg, in_ls, class_ok, fv)

    below = Hypothesis("me_ratio < 1", ratios.me_ratio, ratios.me_ratio < 1)
    if not below.satisfied:
        return result(Verdict.INDETERMINATE, "data not below the mass-energy threshold",
                      [below] + common)

    grad_below = Hypothesis("grad_ratio < 1", ratios.grad_ratio, ratios.grad_ratio < 1)
    if grad_below.satisfied:
        hyps = [below, grad_below] + common + [in_k0, in_l32, xg_nonpos]
        v_ok = in_k0.satisfied and in_l32.satisfied and xg_nonpos.satisfied
        if common_ok and v_ok:
            return result(Verdict.SCATTERS, "u exists globally, stays below threshold and scatters",
                          hyps)
        if not (ratios.h_ratio > 1):
            return result(Verdict.GLOBAL_BOUNDED,
                          "threshold ratios on the scattering side; V hypotheses incomplete", hyps)

    h_above = Hypothesis("h_ratio > 1", ratios.h_ratio, ratios.h_ratio > 1)
    hyps = [below, h_above] + common + [v_class, in_k0, in_l32, in_ls, cond2v]
    if h_above.satisfied and common_ok and class_ok and cond2v.satisfied:
        return _upgrade(result, Verdict.BLOWUP_OR_GROWUP, hyps, xg_nonneg, in_ls, class_ok, fv)
    return result(Verdict.INDETERMINATE, "no branch applies", hyps)


def _upgrade(result, base, hyps, xg_nonneg, in_ls, class_ok, fv):
    radial_case = in_ls.satisfied
    variance_case = fv and class_ok
    hyps = hyps + [
        xg_nonneg,
        Hypothesis("(i) radial data and V, V in L^sigma", radial_case, radial_case, "derived"),
        Hypothesis("(ii) x u0 in L^2 and V class", variance_case, variance_case, "derived"),
    ]
    upgraded = xg_nonneg.satisfied and (radial_case or variance_case)
    if base is Verdict.NEGATIVE_ENERGY_BLOWUP:
        return result(base, "u blows up" if upgraded else "u blows up or grows up", hyps)
    if upgraded:
        return result(Verdict.BLOWUP, "u blows up", hyps)
    return result(base, "u blows up or grows up", hyps)
