import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlslab.errors import ValidationError
from nlslab.potentials import (Dilation, GaussianBump, InverseSquare, Saturating, SumPotential,
                               TablePotential, ZeroPotential, analyze, inverse_square_bound_check,
                               kato_norm, lebesgue_norm, potential_from_dict)

BALL = TablePotential((0.0, 1.0), (1.0, 1.0))


def test_unit_ball_kato_norm_is_two_pi():
    assert abs(kato_norm(BALL) - 2 * math.pi) < 1e-6


def test_gaussian_bump_kato_norm_closed_form():
    # Newton potential of a radially decreasing V peaks at the origin: 2 pi A sigma^2
    V = GaussianBump(1.5, 0.7)
    assert math.isclose(kato_norm(V), 2 * math.pi * 1.5 * 0.49, rel_tol=1e-9)


@pytest.mark.parametrize("lam", [0.5, 2.0])
@pytest.mark.parametrize("V", [BALL, GaussianBump(1.0, 1.0), InverseSquare(1.0, 1.0, 4.0)])
def test_kato_norm_dilation_invariant(V, lam):
    assert abs(kato_norm(V.scaled(lam)) - kato_norm(V)) < 1e-6 * kato_norm(V)


def test_gaussian_l32_norm_closed_form():
    A, s = 2.0, 1.3
    exact = (4 * math.pi * A ** 1.5 * math.sqrt(math.pi) / 4 * (s * s / 1.5) ** 1.5) ** (2 / 3)
    glob, _ = lebesgue_norm(GaussianBump(A, s).value, 1.5)
    assert math.isclose(glob, exact, rel_tol=1e-10)


def test_inverse_square_tail_flags():
    V = InverseSquare(1.0, 1.0)
    rep = analyze(V)
    assert math.isinf(rep.l32_norm) and not rep.in_L32
    assert math.isinf(rep.kato_norm) and not rep.in_K0
    assert math.isfinite(rep.l32_window)
    assert any("L^3/2" in w for w in rep.warnings)
    assert rep.nonneg and rep.condition_2V and rep.xgradV_nonpos


def test_inverse_square_lower_bound_holds():
    for V in (InverseSquare(1.0, 1.0), InverseSquare(0.3, 0.5)):
        res = inverse_square_bound_check(V)
        assert res.passed and res.first_violation is None


def test_lower_bound_check_needs_repulsive_potential():
    with pytest.raises(ValidationError):
        inverse_square_bound_check(GaussianBump(-1.0, 1.0))


def test_saturating_sign_flags():
    rep = analyze(Saturating(0.5, 2.0))
    assert rep.nonneg and rep.xgradV_nonneg and rep.condition_2V
    assert not rep.in_L32


def test_attractive_bump_kato_negative_part():
    rep = analyze(GaussianBump(-1.0, 1.0))
    assert not rep.nonneg
    assert math.isclose(rep.kato_neg, 2 * math.pi, rel_tol=1e-9)
    assert rep.kato_small


def test_zero_potential_report():
    rep = analyze(ZeroPotential())
    assert rep.kato_norm == 0.0 and rep.l32_norm == 0.0
    assert rep.nonneg and rep.condition_2V


def test_sigma_must_exceed_three_halves():
    with pytest.raises(ValidationError):
        analyze(BALL, sigma=1.5)


def test_table_validation():
    with pytest.raises(ValidationError):
        TablePotential((0.0, 1.0, 0.5), (1.0, 1.0, 1.0))
    with pytest.raises(ValidationError):
        TablePotential((0.0,), (1.0,))


@pytest.mark.parametrize("V", [
    ZeroPotential(), GaussianBump(1.0, 2.0), InverseSquare(0.5, 1.0, 8.0), InverseSquare(0.5, 1.0),
    Saturating(0.1, 2.0), BALL, Dilation(2.0, GaussianBump(1.0, 1.0)),
    SumPotential(((1.0, GaussianBump(1.0, 1.0)), (0.5, Saturating(1.0, 1.0)))),
])
def test_json_round_trip(V):
    W = potential_from_dict(V.to_dict())
    r = np.linspace(0, 20, 101)
    assert np.array_equal(W.value(r), V.value(r))
    assert W.to_dict() == V.to_dict()


def test_unknown_family_rejected():
    with pytest.raises(ValidationError):
        potential_from_dict({"family": "coulomb", "params": {}})
    with pytest.raises(ValidationError):
        potential_from_dict({"family": "gaussian-bump", "params": {"A": 1.0}})


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0.1, 5.0), st.floats(0.0, 50.0))
def test_inverse_square_r_dv_matches_finite_difference(A, r0, r):
    V = InverseSquare(A, r0, 3.0)
    h = 1e-6 * max(r, 1.0)
    fd = r * (V.value(np.array([r + h])) - V.value(np.array([max(r - h, 0.0)]))) / (r + h - max(r - h, 0.0))
    assert abs(V.r_dv(np.array([r]))[0] - fd[0]) < 1e-5 * (A / r0 ** 2) * (1 + r)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(0.2, 3.0))
def test_kato_norm_scales_linearly_in_amplitude(A, s):
    assert math.isclose(kato_norm(GaussianBump(A, s)), A * kato_norm(GaussianBump(1.0, s)),
                        rel_tol=1e-12)
