import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlslab.errors import ValidationError
from nlslab.grid import (RadialField, RadialGrid, gradient_sq_norm, integrate3d,
                         inverse_sine_transform, radial_derivative, resample, sine_transform)


def test_grid_rejects_bad_sizes():
    with pytest.raises(ValidationError):
        RadialGrid(32.0, 8)
    with pytest.raises(ValidationError):
        RadialGrid(-1.0, 100)


def test_refine_and_coarsen_are_inverse():
    g = RadialGrid(10.0, 255)
    assert g.refine().coarsen() == g
    assert np.isclose(g.refine().h, g.h / 2)


def test_gaussian_mass_matches_closed_form():
    # int exp(-2 r^2) d^3x = (pi/2)^{3/2}
    g = RadialGrid(16.0, 2047)
    u = RadialField.from_function(g, lambda r: np.exp(-r ** 2))
    assert abs(integrate3d(u.abs2(), g) - (np.pi / 2) ** 1.5) < 1e-12


def test_gaussian_gradient_matches_closed_form():
    # ||grad exp(-r^2)||^2 = 3 (pi/2)^{3/2}
    g = RadialGrid(16.0, 2047)
    u = RadialField.from_function(g, lambda r: np.exp(-r ** 2))
    exact = 3 * (np.pi / 2) ** 1.5
    assert abs(gradient_sq_norm(u) - exact) < 1e-11 * exact
    assert abs(gradient_sq_norm(u, method="centered") - exact) < 1e-4 * exact


def test_spectral_derivative_of_gaussian():
    g = RadialGrid(16.0, 1023)
    u = RadialField.from_function(g, lambda r: np.exp(-r ** 2))
    du = radial_derivative(u)
    assert np.max(np.abs(du - (-2 * g.r * np.exp(-g.r ** 2)))) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=16, max_value=300), st.integers(min_value=0, max_value=2 ** 31))
def test_sine_transform_is_orthonormal(n, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    c = sine_transform(v)
    assert np.allclose(inverse_sine_transform(c), v, atol=1e-12)
    assert np.isclose(np.vdot(c, c).real, np.vdot(v, v).real, rtol=1e-12)


def test_resample_is_exact_for_band_limited_series():
    src = RadialGrid(10.0, 63)
    coeffs = np.zeros(src.n)
    coeffs[[0, 3, 10]] = (1.0, -0.5, 0.25)
    w = inverse_sine_transform(coeffs)
    u = RadialField(src, w / src.r)
    dst = RadialGrid(10.0, 200)
    out = resample(u, dst)
    norm = np.sqrt(2 / (src.n + 1))
    expect = norm * sum(c * np.sin(k * dst.r) for c, k in zip(coeffs, src.k)) / dst.r
    assert np.max(np.abs(out.values - expect)) < 1e-12


def test_resample_zero_beyond_source_window():
    src = RadialGrid(8.0, 255)
    u = RadialField.from_function(src, lambda r: np.exp(-r ** 2))
    out = resample(u, RadialGrid(16.0, 511))
    assert np.all(out.values[out.grid.r > 8.0] == 0)
    assert abs(integrate3d(out.abs2(), out.grid) - integrate3d(u.abs2(), src)) < 1e-12


def test_field_is_immutable():
    g = RadialGrid(4.0, 31)
    u = RadialField(g, np.ones(31))
    with pytest.raises(ValueError):
        u.values[0] = 2.0
