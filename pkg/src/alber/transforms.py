"""Hilbert and signal transforms, the Laplace symbol h~ and the kernel h.

Conventions::

    H[u](z) = (1/pi) p.v. int u(t) / (z - t) dt
    S[u](x) = H[u](x) - i u(x)

The Cauchy integral approaches ``H[u] + i u`` from below the real axis and
``H[u] - i u = S[u]`` from above. The stability machinery uses the limit from
below for ``p X > 0`` (that is where ``omega / (4 pi^2 i p X)`` lives when
``re(omega) > 0``) and from above for ``p X < 0``; :func:`plemelj_side` says
which one applies.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate as spi

from .errors import ConfigError
from .quadrature import CompactFunction, adaptive_panels, cauchy, fourier, gauss_legendre, integrate
from .spectra import Spectrum, dxp_function

log = logging.getLogger(__name__)

PLEMELJ_TOL = 1e-4


@dataclass(frozen=True)
class PhysicalParams:
    """NLS coefficients ``i u_t + p/2 u_xx + q/2 |u|^2 u`` and the
    inhomogeneity scale ``epsilon``.

    The default instance is the rescaled unit-carrier convention
    ``p = 1/(16 pi^2)``, ``q = 1`` whose target is ``1/(4 pi)``.
    """

    p: float = 1.0 / (16 * math.pi**2)
    q: float = 1.0
    epsilon: float = 0.0

    def __post_init__(self):
        if self.p == 0 or self.q == 0:
            raise ConfigError("p and q must be nonzero")
        if not self.epsilon >= 0:
            raise ConfigError("epsilon must be >= 0")

    @classmethod
    def rescaled(cls, epsilon: float = 0.0) -> "PhysicalParams":
        return cls(1.0 / (16 * math.pi**2), 1.0, epsilon)

    @property
    def focusing(self) -> bool:
        return self.p * self.q > 0

    @property
    def target(self) -> float:
        """4 pi p / q, the point the contours are tested against."""
        return 4 * math.pi * self.p / self.q


def _as_function(f) -> CompactFunction:
    if isinstance(f, CompactFunction):
        return f
    if isinstance(f, Spectrum):
        return f.as_function()
    raise TypeError(f"expected CompactFunction or Spectrum, got {type(f).__name__}")


def _hilbert_real_point(f: CompactFunction, x: float) -> float:
    a, b = f.support
    fmax = f.scale
    if fmax == 0:
        return 0.0
    if not a < x < b:
        pts = f.panels
        return float(cauchy(pts, f.values, x).real[0])
    # odd part on the symmetric window [x - w, x + w] ...
    w = min(x - a, b - x)
    bps_s = [abs(p - x) for p in (*f.breakpoints, a, b) if 0 < abs(p - x) < w]

    def odd(s):
        return (f(x - s) - f(x + s)) / s

    inner = adaptive_panels(odd, 0.0, w, bps_s, tol=f.tol)
    total = integrate(inner, odd(inner.nodes))
    # ... plus the rest of the support where the kernel is regular
    lo, hi = (x + w, b) if x - w <= a else (a, x - w)
    if hi > lo:
        bps = [p for p in f.breakpoints if lo < p < hi]

        def outer_fn(t):
            return f(t) / (x - t)

        outer = adaptive_panels(outer_fn, lo, hi, bps, tol=f.tol)
        total += integrate(outer, outer_fn(outer.nodes))
    return float(total) / math.pi


def hilbert_at(f, z):
    """(1/pi) int f(t)/(z - t) dt; the principal value when ``z`` is real.

    ``f`` is a :class:`CompactFunction` (or a :class:`Spectrum`). Real
    targets go through odd-part subtraction on a symmetric window, complex
    ones through panel product integration. Returns float for real scalar
    input, complex otherwise.
    """
    f = _as_function(f)
    z_arr = np.asarray(z)
    if np.iscomplexobj(z_arr) and np.any(z_arr.imag != 0):
        out = cauchy(f.panels, f.values, z_arr) if f.scale > 0 else np.zeros(z_arr.shape, complex)
        return complex(out.ravel()[0]) if z_arr.ndim == 0 else out.reshape(z_arr.shape)
    x = np.real(z_arr).astype(float)
    vals = np.array([_hilbert_real_point(f, xi) for xi in x.ravel()]).reshape(x.shape)
    return float(vals) if x.ndim == 0 else vals


def signal_transform(f, x):
    """S[f](x) = H[f](x) - i f(x) on the real axis."""
    f = _as_function(f)
    x = np.asarray(x, dtype=float)
    out = hilbert_at(f, x) - 1j * f(x)
    return complex(out) if np.ndim(out) == 0 else out


def hilbert_window_l1(f, R: float, inner_panels: int = 48, order: int = 16, ratio: float = 1.15) -> float:
    """int_{-R}^{R} |H[f](x)| dx.

    Composite Gauss-Legendre on uniform panels over the support (widened by
    its length on each side) and geometrically growing panels beyond, where
    H[f] is evaluated by the vectorised Cauchy sum. Finite as R grows only
    when int f = 0; otherwise it grows like (2/pi)|int f| log R.
    """
    f = _as_function(f)
    if not R > 0:
        raise ConfigError("R must be > 0")
    a, b = f.support
    w = b - a
    lo, hi = max(-R, a - w), min(R, b + w)
    x0, w0 = gauss_legendre(order)
    total = 0.0
    if hi > lo:
        edges = np.linspace(lo, hi, inner_panels + 1)
        c, h = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
        xs = (c[:, None] + h[:, None] * x0[None, :]).ravel()
        vals = np.abs(hilbert_at(f, xs)).reshape(len(c), order)
        total += float(np.sum(h[:, None] * w0[None, :] * vals))
    for start, sign in ((b + w, 1.0), (-(a - w), -1.0)):
        if R <= start:
            continue
        n = max(1, math.ceil(math.log(R / start) / math.log(ratio)))
        edges = np.geomspace(start, R, n + 1)
        c, h = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
        xs = sign * (c[:, None] + h[:, None] * x0[None, :]).ravel()
        vals = np.abs(cauchy(f.panels, f.values, xs.astype(complex)).real)
        total += float(np.sum(h[:, None] * w0[None, :] * vals.reshape(len(c), order)))
    return total


def plemelj_side(params: PhysicalParams, X: float) -> str:
    """Side of the real axis from which Omega = omega/(4 pi^2 i p X) reaches it."""
    return "lower" if params.p * X > 0 else "upper"


@lru_cache(maxsize=4096)
def _dxp_cached(P: Spectrum, X: float) -> CompactFunction:
    return dxp_function(P, X)


def h_tilde(P: Spectrum, params: PhysicalParams, X: float, omega, boundary: bool = False):
    """Laplace symbol h~(X, omega) = q/(4 pi p) H[D_X P](omega / (4 pi^2 i p X)).

    With ``boundary=True`` (or ``re(omega) == 0``) the Plemelj boundary value
    from the side given by :func:`plemelj_side` is returned. h~(0, .) = 0.
    """
    omega = np.asarray(omega, dtype=complex)
    if X == 0 or P.is_zero:
        return np.zeros(omega.shape, complex) if omega.ndim else 0j
    f = _dxp_cached(P, float(X))
    Om = omega / (4 * math.pi**2 * 1j * params.p * X)
    scale = params.q / (4 * math.pi * params.p)
    on_axis = boundary | (omega.real == 0)
    out = np.zeros(omega.shape, complex)
    if np.any(~on_axis):
        out[~on_axis] = cauchy(f.panels, f.values, Om[~on_axis])
    if np.any(on_axis):
        s = Om[on_axis].real
        sign = 1.0 if plemelj_side(params, X) == "lower" else -1.0
        out[on_axis] = hilbert_at(f, s) + 1j * sign * f(s)
    out *= scale
    return complex(out) if out.ndim == 0 else out


def h_tilde_direct(P: Spectrum, params: PhysicalParams, X: float, omega: complex) -> complex:
    """q i int (P(k+X/2) - P(k-X/2)) / (omega - 4 pi^2 i p k X) dk by adaptive
    quadrature. Independent of the Hilbert machinery; used as an oracle."""
    if X == 0:
        return 0j
    a, b = P.support
    h = 0.5 * abs(X)
    lo, hi = a - h, b + h
    den_c = 4 * math.pi**2 * params.p * X

    def integrand(k):
        d = P(k + 0.5 * X) - P(k - 0.5 * X)
        return params.q * 1j * d / (omega - 1j * den_c * k)

    pts = sorted({e + s for e in (a, b, *P.breakpoints, P.peak) for s in (-h, h)} - {lo, hi})
    # split off the far tail, where the integrand is tiny but the interval huge
    cut = min(hi, max(50.0, 50 * P.peak))
    pts = [p for p in pts if lo < p < cut]
    def part(fn, a, b, points=None):
        return spi.quad(fn, a, b, points=points, limit=2000, epsabs=0, epsrel=1e-12)[0]

    with warnings.catch_warnings():
        # quad flags roundoff once it is at the 1e-12 level; that is what we asked for
        warnings.simplefilter("ignore", spi.IntegrationWarning)
        re = part(lambda k: integrand(k).real, lo, cut, pts or None)
        im = part(lambda k: integrand(k).imag, lo, cut, pts or None)
        if cut < hi:
            re += part(lambda k: integrand(k).real, cut, hi)
            im += part(lambda k: integrand(k).imag, cut, hi)
    return complex(re, im)


def inverse_fourier(P, y) -> np.ndarray:
    """P^(y) = int exp(2 pi i k y) P(k) dk at the given ``y``."""
    f = _as_function(P)
    y = np.asarray(y, dtype=float)
    if f.scale == 0:
        return np.zeros(y.shape, complex)
    return fourier(f.panels, f.values, y)


@dataclass(frozen=True)
class KernelTable:
    """Volterra kernel h(X, t) = 2 q sin(2 pi^2 p X^2 t) P^(2 pi p X t).

    ``values`` are complex: P^ is real only for spectra symmetric about 0,
    which ocean spectra are not. ``imag_max`` records how far from real the
    kernel is.
    """

    X: float
    times: np.ndarray
    values: np.ndarray
    p_check: np.ndarray
    imag_max: float


def kernel_h(P: Spectrum, params: PhysicalParams, X: float, t_grid) -> KernelTable:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or t[0] != 0:
        raise ConfigError("t_grid must be a 1-D grid starting at t = 0")
    if np.any(np.diff(t) <= 0):
        raise ConfigError("t_grid must be increasing")
    y = 2 * math.pi * params.p * X * t
    pc = inverse_fourier(P, y) if not P.is_zero else np.zeros(t.shape, complex)
    vals = 2 * params.q * np.sin(2 * math.pi**2 * params.p * X**2 * t) * pc
    vals[0] = 0.0
    return KernelTable(float(X), t, vals, pc, float(np.max(np.abs(vals.imag), initial=0.0)))
