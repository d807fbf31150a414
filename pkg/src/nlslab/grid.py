"""Radial discretization of R^3: grid, fields, quadrature and sine transforms.

Fields are sampled at the interior nodes r_j = j*h, j = 1..n, of [0, r_max];
both endpoints are excluded.  Dirichlet truncation at r_max is natural for
w = r*u, which also vanishes at the origin, so the radial Laplacian
(1/r) d^2/dr^2 (r u) is diagonalized by the type-I sine transform of w.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import fft

from .errors import ValidationError

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class RadialGrid:
    r_max: float = 32.0
    n: int = 4095

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 16:
            raise ValidationError(f"grid needs n >= 16 interior nodes, got {self.n}")
        if not np.isfinite(self.r_max) or self.r_max <= 0:
            raise ValidationError(f"r_max must be positive, got {self.r_max}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "r_max", float(self.r_max))

    @property
    def h(self) -> float:
        return self.r_max / (self.n + 1)

    @cached_property
    def r(self) -> np.ndarray:
        r = self.h * np.arange(1, self.n + 1)
        r.flags.writeable = False
        return r

    @cached_property
    def k(self) -> np.ndarray:
        """Wavenumbers j*pi/r_max of the sine modes j = 1..n."""
        k = np.pi * np.arange(1, self.n + 1) / self.r_max
        k.flags.writeable = False
        return k

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weights for int_0^r_max g(r) dr on nodes 0..n+1.

        Composite Simpson, with a trapezoid on the last panel when the
        interval count n+1 is odd.
        """
        nint = self.n + 1
        ns = nint if nint % 2 == 0 else nint - 1
        w = np.zeros(self.n + 2)
        w[0:ns + 1:2] = 2.0
        w[1:ns:2] = 4.0
        w[0] = w[ns] = 1.0
        w[:ns + 1] *= self.h / 3.0
        if ns < nint:
            w[ns] += self.h / 2.0
            w[ns + 1] += self.h / 2.0
        w.flags.writeable = False
        return w

    def refine(self) -> "RadialGrid":
        """Grid with half the spacing on the same interval."""
        return RadialGrid(self.r_max, 2 * self.n + 1)

    def coarsen(self) -> "RadialGrid":
        """Grid with every other node; requires n odd."""
        if self.n % 2 == 0:
            raise ValidationError("coarsening needs an odd node count")
        return RadialGrid(self.r_max, (self.n - 1) // 2)

    def to_dict(self) -> dict:
        return {"r_max": self.r_max, "n": self.n, "h": self.h}


@dataclass(frozen=True)
class RadialField:
    grid: RadialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.shape != (self.grid.n,):
            raise ValidationError(
                f"field has {v.shape} samples, grid has {self.grid.n} nodes")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: RadialGrid, func) -> "RadialField":
        return cls(grid, func(grid.r))

    @property
    def is_real(self) -> bool:
        return not np.any(self.values.imag)

    @property
    def w(self) -> np.ndarray:
        """The reduced field r*u."""
        return self.grid.r * self.values

    def abs2(self) -> np.ndarray:
        return self.values.real ** 2 + self.values.imag ** 2

    def __mul__(self, c):
        return RadialField(self.grid, self.values * c)

    __rmul__ = __mul__


def _check_finite(f, what="integrand"):
    f = np.asarray(f)
    bad = ~np.isfinite(f)
    if bad.any():
        idx = int(np.argmax(bad))
        raise ValidationError(f"non-finite {what} at index {idx} (value {f[idx]})")


def radial_integral(g, grid: RadialGrid, g0=0.0, g_end=0.0) -> float:
    """4*pi times int_0^r_max g(r) dr, with g given at the interior nodes.

    ``g0`` and ``g_end`` are the values at r = 0 and r = r_max.
    """
    g = np.asarray(g, dtype=float)
    _check_finite(g)
    w = grid.weights
    return float(FOUR_PI * (np.dot(w[1:-1], g) + w[0] * g0 + w[-1] * g_end))


def integrate3d(f, grid: RadialGrid) -> float:
    """Integral over R^3 of the radial function f sampled on the grid."""
    f = np.asarray(f)
    if np.iscomplexobj(f):
        raise ValidationError("integrate3d expects real samples")
    _check_finite(f)
    return radial_integral(f * grid.r ** 2, grid)


def _stack(v):
    v = np.asarray(v)
    if np.iscomplexobj(v):
        return np.stack([v.real, v.imag], axis=0), True
    return np.asarray(v, dtype=float), False


def _unstack(s, was_complex):
    return s[0] + 1j * s[1] if was_complex else s


def sine_transform(v) -> np.ndarray:
    """Orthonormal type-I discrete sine transform (its own inverse)."""
    s, cplx = _stack(v)
    _check_finite(s, "sample")
    return _unstack(fft.dst(s, type=1, norm="ortho", axis=-1), cplx)


def inverse_sine_transform(c) -> np.ndarray:
    s, cplx = _stack(c)
    return _unstack(fft.idst(s, type=1, norm="ortho", axis=-1), cplx)


def _coeffs(u):
    if isinstance(u, RadialField):
        return u.grid, u.values
    raise ValidationError("expected a RadialField")


def spectral_dw(w, grid: RadialGrid) -> np.ndarray:
    """Derivative of the sine series of w at nodes 0..n+1 (endpoints included)."""
    c = sine_transform(w)
    x = np.zeros(grid.n + 2, dtype=c.dtype)
    x[1:-1] = 0.5 * np.sqrt(2.0 / (grid.n + 1)) * c * grid.k
    s, cplx = _stack(x)
    return _unstack(fft.dct(s, type=1, axis=-1), cplx)


def centered_dw(w, grid: RadialGrid) -> np.ndarray:
    """Second-order centered derivative of w at nodes 0..n+1 (w = 0 at both ends)."""
    h = grid.h
    wp = np.concatenate([[0.0], w, [0.0]])
    d = np.empty_like(wp)
    d[1:-1] = (wp[2:] - wp[:-2]) / (2 * h)
    d[0] = (4 * wp[1] - wp[2]) / (2 * h)
    d[-1] = -(4 * wp[-2] - wp[-3]) / (2 * h)
    return d


def radial_derivative(u: RadialField, method: str = "spectral") -> np.ndarray:
    """du/dr at the interior nodes, via w = r u: u' = (w' - u)/r."""
    grid, v = _coeffs(u)
    w = grid.r * v
    if method == "spectral":
        dw = spectral_dw(w, grid)
    elif method == "centered":
        dw = centered_dw(w, grid)
    else:
        raise ValidationError(f"unknown derivative method {method!r}")
    return (dw[1:-1] - v) / grid.r


def gradient_sq_norm(u: RadialField, method: str = "spectral") -> float:
    """||grad u||^2 over R^3.

    ``spectral`` uses Parseval on the sine coefficients of r*u, which is the
    quadratic form of the Laplacian the evolution integrates exactly.
    ``centered`` applies second-order differences to r*u and Simpson's rule.
    """
    grid, v = _coeffs(u)
    _check_finite(v.real, "sample")
    _check_finite(v.imag, "sample")
    w = grid.r * v
    if method == "spectral":
        c = sine_transform(w)
        return FOUR_PI * grid.h * float(np.sum((c.real ** 2 + c.imag ** 2) * grid.k ** 2))
    du = radial_derivative(u, method)
    return integrate3d(np.abs(du) ** 2, grid)


def resample(u: RadialField, grid: RadialGrid, chunk: int = 2048) -> RadialField:
    """Evaluate the sine series of u on another grid (zero beyond the source r_max).

    This is exact band-limited interpolation of w = r u, so smooth fields
    keep their spectral accuracy on the new nodes.
    """
    src = u.grid
    c = sine_transform(u.w)
    scale = np.sqrt(2.0 / (src.n + 1))
    r = grid.r
    w = np.zeros(grid.n, dtype=complex)
    inside = np.flatnonzero(r < src.r_max)
    for start in range(0, len(inside), chunk):
        idx = inside[start:start + chunk]
        w[idx] = scale * (np.sin(np.outer(r[idx], src.k)) @ c)
    return RadialField(grid, w / r)
