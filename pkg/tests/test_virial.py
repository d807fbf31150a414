import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlslab.errors import ValidationError
from nlslab.evolution import EvolveConfig, evolve
from nlslab.functionals import snapshot
from nlslab.grid import RadialField, RadialGrid, integrate3d, radial_derivative
from nlslab.potentials import Saturating
from nlslab.virial import (KINDS, Weight, annulus_identity, far_field_offset, hessian_term_tensor,
                           make_weight, morawetz_average, theta_q, virial_consistency,
                           virial_eval, virial_series, weight_violations)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("R", [2.0, 4.0, 8.0, 16.0])
def test_weights_satisfy_their_invariants(kind, R):
    assert weight_violations(Weight(kind, R), RadialGrid()) == []


def test_weight_profiles_near_origin():
    r = np.linspace(0.01, 3.99, 50)
    assert np.allclose(Weight("w", 4.0).derivative(r), r ** 2)
    assert np.allclose(Weight("psi", 4.0).derivative(r), r ** 2)
    assert np.allclose(Weight("f", 4.0).derivative(r), r ** 2 / 2)
    assert np.allclose(Weight("chi", 8.0).derivative(r), 1.0)


def test_far_field_of_linear_weights():
    r = np.linspace(20.0, 40.0, 11)
    for kind, slope in (("w", 3.0), ("f", 1.5)):
        c = far_field_offset(kind)
        assert np.allclose(Weight(kind, 5.0).derivative(r), slope * 5.0 * r - c * 25.0)
    with pytest.raises(ValidationError):
        far_field_offset("psi")


def test_bad_weight_arguments():
    with pytest.raises(ValidationError):
        Weight("cubic", 1.0)
    with pytest.raises(ValidationError):
        Weight("w", 0.0)
    with pytest.raises(ValidationError):
        Weight("w", 1.0).derivative(1.0, order=5)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.3, 2.0), st.floats(0.5, 3.0), st.floats(-2.0, 2.0))
def test_mass_critical_unweighted_identity(amp, width, chirp):
    # at p = 7/3, I'' = 16 E_0 exactly, whatever the data
    g = RadialGrid(32.0, 2047)
    u = RadialField.from_function(g, lambda r: amp * np.exp(-(r / width) ** 2 + 1j * chirp * r ** 2))
    v = virial_eval(u, None, 7 / 3, Weight("unweighted"))
    e0 = snapshot(u, None, 7 / 3).energy_v
    assert abs(v.I2 - 16 * e0) <= 1e-10 * max(abs(16 * e0), v.I2_scale)


def test_wide_weight_agrees_with_unweighted():
    g = RadialGrid(32.0, 4095)
    u = RadialField.from_function(g, lambda r: np.exp(-r ** 2) * np.exp(0.3j * r ** 2))
    a = virial_eval(u, Saturating(0.5, 1.0), 3.0, Weight("unweighted"))
    b = virial_eval(u, Saturating(0.5, 1.0), 3.0, Weight("w", 10.0))
    assert math.isclose(a.I, b.I, rel_tol=1e-12)
    assert math.isclose(a.I1, b.I1, rel_tol=1e-10)
    assert math.isclose(a.I2, b.I2, rel_tol=1e-9)


def test_hessian_term_on_cartesian_grid():
    # 4 int omega_ij u_i conj(u_j) with the Hessian and gradient taken by finite
    # differences on a 3D grid, against the radial reduction 4 int omega'' |u'|^2
    n, L = 97, 4.0
    ax = np.linspace(-L, L, n)
    h = ax[1] - ax[0]
    X = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"))
    r = np.sqrt(np.sum(X ** 2, axis=0))
    w = Weight("w", 1.0)
    om = w.derivative(r)
    u = np.exp(-r ** 2)
    grads = np.gradient(u, h)
    hess = [np.gradient(g_i, h) for g_i in np.gradient(om, h)]
    cart = 4 * sum(hess[i][j] * grads[i] * grads[j] for i in range(3) for j in range(3))
    cart_int = cart.sum() * h ** 3

    rs = np.where(r > 0, r, 1.0)
    via_tensor = hessian_term_tensor(-2 * rs * np.exp(-rs ** 2), w.derivative(rs, 1),
                                     w.derivative(rs, 2), X, rs)
    g = RadialGrid(8.0, 4095)
    du = radial_derivative(RadialField.from_function(g, lambda s: np.exp(-s ** 2)))
    radial = 4 * integrate3d(w.derivative(g.r, 2) * np.abs(du) ** 2, g)
    assert abs(via_tensor.sum() * h ** 3 - radial) < 2e-3 * radial
    assert abs(cart_int - radial) < 2e-2 * radial


def test_annulus_identity():
    g = RadialGrid(32.0, 4095)
    u = RadialField.from_function(g, lambda r: np.exp(-r ** 2 / 8) * np.exp(0.5j * r ** 2))
    for R in (2.0, 4.0, 8.0):
        lhs, rhs = annulus_identity(u, R)
        assert abs(lhs - rhs) < 1e-8 * abs(lhs)


def test_soliton_virial_vanishes(gs3):
    tr = evolve(gs3.profile, None, 3.0, EvolveConfig(dt0=2e-3, t_end=0.2, scheme="yoshida6",
                                                     store_every=1, store_fields=True))
    for kind, R in (("unweighted", 1.0), ("psi", 8.0), ("w", 4.0)):
        s = virial_series(tr, Weight(kind, R))
        assert np.max(np.abs(s.I1) / s.I1_scale) < 0.02
        assert np.max(np.abs(s.I2) / s.I2_scale) < 0.02
        assert np.ptp(s.I) < 1e-6 * abs(s.I[0])


def test_free_flow_virial_consistency():
    g = RadialGrid(64.0, 4095)
    u = RadialField.from_function(g, lambda r: np.exp(-r ** 2))
    ws = [Weight("unweighted"), Weight("psi", 4.0), Weight("f", 2.0)]
    tr = evolve(u, None, 3.0, EvolveConfig(dt0=1e-3, t_end=0.2, store_every=2), weights=ws,
                nonlinearity=0.0)
    c = virial_consistency(tr, ws[0])
    assert c.status == "measured" and c.max_rel_err < 1e-6
    # I'' = 8 ||grad u||^2 for the free flow
    s = virial_series(tr, ws[0])
    assert np.allclose(s.I2, 8 * tr.series("grad_sq"), rtol=1e-12)
    for w in ws[1:]:
        assert virial_consistency(tr, w).max_rel_err < 5e-3


def test_consistency_inconclusive_on_short_series(gs3):
    tr = evolve(gs3.profile * 0.9, None, 3.0, EvolveConfig(t_end=0.01, store_every=5,
                                                           store_fields=True))
    assert virial_consistency(tr, Weight("psi", 4.0)).status == "inconclusive"


def test_series_needs_fields_or_recording(gs3):
    tr = evolve(gs3.profile * 0.9, None, 3.0, EvolveConfig(t_end=0.01))
    with pytest.raises(ValidationError):
        virial_series(tr, Weight("psi", 4.0))


def test_morawetz_average_of_zero_field():
    g = RadialGrid(16.0, 255)
    tr = evolve(RadialField(g, np.zeros(g.n)), None, 3.0,
                EvolveConfig(t_end=0.1, store_every=5, morawetz_radii=(4.0,)))
    assert morawetz_average(tr, 4.0, 0.1) == 0.0


def test_morawetz_average_of_soliton_is_constant(gs3):
    tr = evolve(gs3.profile, None, 3.0, EvolveConfig(dt0=2e-3, t_end=0.2, scheme="yoshida6",
                                                     store_every=5, morawetz_radii=(4.0,)))
    lp = integrate3d(np.where(gs3.grid.r <= 2.0, gs3.profile.values.real ** 4, 0.0), gs3.grid)
    assert math.isclose(morawetz_average(tr, 4.0, 0.13), lp, rel_tol=1e-6)
    with pytest.raises(ValidationError):
        morawetz_average(tr, 4.0, 0.5)


def test_make_weight_checks_grid():
    assert make_weight("psi", 4.0).key == "psi:R=4"


def test_theta_q():
    assert theta_q(6.0, 3.0) == pytest.approx(2 * 2 / (4 * 4))
    with pytest.raises(ValidationError):
        theta_q(4.0, 3.0)
