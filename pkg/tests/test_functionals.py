import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import ground_state
from nlslab.errors import ValidationError
from nlslab.functionals import (coercivity_gap, g_function, gn_check, hardy_check,
                                k_functional_margin, radial_sobolev_check, snapshot,
                                threshold_products, virial_functional_lower_bound)
from nlslab.grid import RadialField, RadialGrid
from nlslab.potentials import GaussianBump


def cubic_me_oracle(lam):
    return 3 * lam ** 4 - 2 * lam ** 6


@pytest.mark.parametrize("lam", [0.8, 0.9, 1.0, 1.1, 1.2])
def test_lambda_q_ratios_at_cubic(gs3, lam):
    ratios = threshold_products(snapshot(gs3.profile * lam, None, 3.0), gs3)
    assert abs(ratios.me_ratio - cubic_me_oracle(lam)) < 1e-4
    assert abs(ratios.grad_ratio - lam ** 2) < 1e-6


def test_ratios_are_one_at_q(gs3):
    ratios = threshold_products(snapshot(gs3.profile, None, 3.0), gs3)
    assert np.allclose(ratios.as_tuple(), 1.0, atol=1e-9)


def test_mass_critical_ratios_reduce_to_mass(gs_mc):
    ratios = threshold_products(snapshot(gs_mc.profile * 0.9, None, 7 / 3), gs_mc)
    assert math.isclose(ratios.grad_ratio, 0.81, rel_tol=1e-12)
    neg = threshold_products(snapshot(gs_mc.profile * 1.1, None, 7 / 3), gs_mc)
    assert neg.negative_energy and neg.me_ratio == -math.inf


def test_energy_of_gaussian_with_bump_potential():
    # E_V = G/2 + (1/2) int V |u|^2 - lp1/(p+1), each piece in closed form
    g = RadialGrid(16.0, 2047)
    u = RadialField.from_function(g, lambda r: np.exp(-r ** 2))
    s = snapshot(u, GaussianBump(2.0, 1.0), 3.0)
    G = 3 * (math.pi / 2) ** 1.5
    pot = 2.0 * (math.pi / 3) ** 1.5
    lp1 = (math.pi / 4) ** 1.5
    assert math.isclose(s.energy_v, G / 2 + pot / 2 - lp1 / 4, rel_tol=1e-11)
    assert math.isclose(s.k_functional, G - 0.75 * lp1 + pot, rel_tol=1e-11)


@pytest.mark.parametrize("p", [2.5, 3.0, 3.5, 4.0])
def test_g_function_peaks_at_one(p):
    y = np.linspace(0, 2, 2001)
    gy = g_function(y, p)
    assert g_function(1.0, p) == pytest.approx(1.0)
    assert np.all(gy <= 1 + 1e-12)
    assert g_function(0.0, p) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.floats(2.4, 4.9), st.floats(0.0, 0.999))
def test_coercivity_gap_roots_solve_g(p, me):
    below = coercivity_gap(me, p, "below")
    above = coercivity_gap(me, p, "above")
    if me > 0:
        assert abs(g_function(below.y, p) - me) < 1e-9
    assert abs(g_function(above.y, p) - me) < 1e-9
    assert below.y <= 1 <= above.y
    assert 0 <= below.delta_prime <= 0.5 and above.delta_prime >= 0


def test_coercivity_gap_closes_at_threshold():
    assert coercivity_gap(1.0, 3.0).delta_prime == 0.0
    with pytest.raises(ValidationError):
        coercivity_gap(1.01, 3.0)
    with pytest.raises(ValidationError):
        coercivity_gap(0.5, 7 / 3)


def test_virial_lower_bound_along_subthreshold_data(gs3):
    # k >= c lp1 with c from the gap, for data below the threshold
    u = gs3.profile * 0.9
    s = snapshot(u, None, 3.0)
    r = threshold_products(s, gs3)
    c = virial_functional_lower_bound(coercivity_gap(r.me_ratio, 3.0).delta_prime, 3.0)
    assert s.k_functional >= c * s.lp1 - 1e-9


def test_k_margin_bounds_superthreshold_data(gs3):
    s = snapshot(gs3.profile * 1.1, None, 3.0)
    assert s.k_functional < -k_functional_margin(s, gs3) < 0


def test_gn_equality_at_q_and_strict_for_corpus(gs3, fields):
    eq = gn_check(gs3.profile, gs3)
    assert abs(eq.lhs - eq.rhs) < 1e-6 * eq.rhs
    for u in fields:
        c = gn_check(u, gs3)
        assert c.lhs <= 0.99 * c.rhs


@pytest.mark.parametrize("q", [0.0, 1.0, 2.0])
def test_hardy_family_on_corpus(fields, q):
    for u in fields:
        assert hardy_check(u, q).passed


def test_hardy_rejects_exponent_outside_range(fields):
    with pytest.raises(ValidationError):
        hardy_check(fields[0], 2.5)


def test_radial_sobolev_quotient_bounded(fields):
    for u in fields:
        for R in (1.0, 2.0, 4.0):
            ex = radial_sobolev_check(u, R, 3.0)
            assert ex.sentinel is None and 0 <= ex.quotient < 10


def test_radial_sobolev_sentinel_for_compact_field():
    g = RadialGrid(16.0, 1023)
    u = RadialField.from_function(g, lambda r: np.where(r < 2, (4 - r ** 2) ** 4, 0.0))
    assert radial_sobolev_check(u, 4.0, 3.0).sentinel == "0/0"


def test_hardy_constant_at_half_is_beaten_by_gaussian():
    # u = exp(-r^2/2): int |u|^2 |x|^{-1/2} = 2 pi Gamma(5/4), M = pi^{3/2}, G = 3/2 pi^{3/2},
    # so the quotient against (2/(3-q))^q M^{3/4} G^{1/4} exceeds 1 in closed form
    exact = 2 * math.pi * math.gamma(1.25) / (
        0.8 ** 0.5 * math.pi ** 1.125 * 1.5 ** 0.25 * math.pi ** 0.375)
    assert exact > 1.03
    g = RadialGrid(16.0, 2047)
    c = hardy_check(RadialField.from_function(g, lambda r: np.exp(-r ** 2 / 2)), 0.5)
    assert math.isclose(c.lhs / c.rhs, exact, rel_tol=1e-6)
    assert not c.passed


@pytest.mark.parametrize("lam, side", [(1.1, "above"), (0.9, "below")])
def test_coercivity_root_recovers_lambda_squared(lam, side):
    # for lam*Q at p = 3 the threshold data sit exactly on the curve g(y) = me
    gap = coercivity_gap(3 * lam ** 4 - 2 * lam ** 6, 3.0, side)
    assert gap.y == pytest.approx(lam ** 2, abs=1e-10)


def test_radial_sobolev_sentinel_when_exterior_underflows():
    g = RadialGrid(32.0, 2047)
    u = RadialField.from_function(g, lambda r: np.exp(-r ** 2 / 4))
    assert radial_sobolev_check(u, 1.0, 3.0).sentinel is None
    assert radial_sobolev_check(u, 14.0, 3.0).sentinel == "0/0"
