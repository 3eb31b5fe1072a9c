"""Composite Gauss-Legendre panels and the integral kernels built on them.

Three kernels share one panel layout:

* plain integration of a smooth function,
* Cauchy integrals ``(1/pi) int f(t) / (z - t) dt`` for any complex ``z``,
  with panels close to ``z`` handled by product integration against the
  monomial basis (so targets at distance 1e-12 from the support are fine),
* Fourier integrals ``int exp(2 pi i y k) f(k) dk`` evaluated Filon-style:
  each panel's Legendre expansion is integrated against the exponential in
  closed form through spherical Bessel functions, so the result does not
  degrade when ``y`` is large compared with the panel resolution.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.special import spherical_jn

log = logging.getLogger(__name__)

ORDER = 16
# Panels whose Bernstein-ellipse parameter seen from the target is below this
# value get product integration instead of the plain Gauss rule.
NEAR_RHO = 3.0


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = npleg.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=None)
def _legendre_analysis(n: int) -> np.ndarray:
    """Matrix taking values at the n Gauss nodes to Legendre coefficients."""
    x, _ = gauss_legendre(n)
    return np.linalg.inv(npleg.legvander(x, n - 1))


@lru_cache(maxsize=None)
def _monomial_solve(n: int) -> np.ndarray:
    """Inverse transpose Vandermonde at the Gauss nodes (monomial basis)."""
    x, _ = gauss_legendre(n)
    return np.linalg.inv(np.vander(x, n, increasing=True).T)


@dataclass(frozen=True)
class Panels:
    """A contiguous set of Gauss-Legendre panels ``[lo_i, hi_i]``."""

    lo: np.ndarray
    hi: np.ndarray
    order: int = ORDER

    @classmethod
    def uniform(cls, a: float, b: float, npanels: int, order: int = ORDER) -> "Panels":
        edges = np.linspace(a, b, npanels + 1)
        return cls(edges[:-1], edges[1:], order)

    @classmethod
    def from_edges(cls, edges: Sequence[float], order: int = ORDER) -> "Panels":
        edges = np.asarray(edges, dtype=float)
        return cls(edges[:-1], edges[1:], order)

    def __len__(self) -> int:
        return len(self.lo)

    @cached_property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @cached_property
    def half(self) -> np.ndarray:
        return 0.5 * (self.hi - self.lo)

    @cached_property
    def nodes(self) -> np.ndarray:
        x, _ = gauss_legendre(self.order)
        return self.center[:, None] + self.half[:, None] * x[None, :]

    @cached_property
    def weights(self) -> np.ndarray:
        _, w = gauss_legendre(self.order)
        return self.half[:, None] * w[None, :]

    @property
    def support(self) -> tuple[float, float]:
        return float(self.lo[0]), float(self.hi[-1])

    def refined(self) -> "Panels":
        """Every panel split in two."""
        mid = self.center
        lo = np.column_stack([self.lo, mid]).ravel()
        hi = np.column_stack([mid, self.hi]).ravel()
        return Panels(lo, hi, self.order)


def _split_point(a: float, b: float) -> float:
    # geometric splitting resolves power-law tails in few levels
    if a > 0 and b > 4 * a:
        return float(np.sqrt(a * b))
    if b < 0 and a < 4 * b:
        return float(-np.sqrt(a * b))
    return 0.5 * (a + b)


def adaptive_panels(
    fn: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    breakpoints: Sequence[float] = (),
    tol: float = 1e-13,
    order: int = ORDER,
    max_level: int = 60,
    min_panels: int = 1,
) -> Panels:
    """Bisect panels until the tail of each local Legendre expansion is
    below ``tol * max|f|`` (scaled down further on panels wider than 2).

    ``breakpoints`` inside ``(a, b)`` always become panel edges; put kinks of
    ``fn`` there, otherwise refinement piles up around them (bounded by
    ``max_level``).
    """
    if not b > a:
        raise ValueError(f"empty interval [{a}, {b}]")
    cuts = sorted({float(p) for p in breakpoints if a < p < b})
    edges = np.array([a, *cuts, b], dtype=float)
    if min_panels > 1:
        fine = np.linspace(a, b, min_panels + 1)
        edges = np.unique(np.concatenate([edges, fine]))
    pending = list(zip(edges[:-1], edges[1:]))
    done: list[tuple[float, float]] = []
    x, _ = gauss_legendre(order)
    analysis = _legendre_analysis(order)
    fscale = 0.0
    for level in range(max_level + 1):
        if not pending:
            break
        lo = np.array([p[0] for p in pending])
        hi = np.array([p[1] for p in pending])
        pts = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * x[None, :]
        vals = np.asarray(fn(pts.ravel())).reshape(pts.shape)
        fscale = max(fscale, float(np.max(np.abs(vals))))
        coeffs = vals @ analysis.T
        tail = np.max(np.abs(coeffs[:, -3:]), axis=1)
        # wide panels must also keep their share of the integral accurate;
        # tiny panels whose error contribution is negligible are accepted even
        # if roundoff (e.g. in difference quotients) keeps the tail from decaying
        half = 0.5 * (hi - lo)
        ok = (tail * np.maximum(1.0, half) <= tol * fscale) | (
            tail * half <= 1e-3 * tol * fscale * min(1.0, b - a))
        if level == max_level:
            ok[:] = True
        nxt = []
        for (pa, pb), good in zip(pending, ok):
            if good or pb - pa <= 8 * np.spacing(max(abs(pa), abs(pb))):
                done.append((pa, pb))
            else:
                m = _split_point(pa, pb)
                nxt.extend([(pa, m), (m, pb)])
        pending = nxt
    done.extend(pending)
    done.sort()
    if fscale == 0.0:
        log.debug("adaptive_panels: function vanishes on [%g, %g]", a, b)
    lo = np.array([p[0] for p in done])
    hi = np.array([p[1] for p in done])
    return Panels(lo, hi, order)


def integrate(panels: Panels, fvals: np.ndarray) -> complex | float:
    return np.sum(panels.weights * fvals)


def legendre_coefficients(panels: Panels, fvals: np.ndarray) -> np.ndarray:
    return fvals @ _legendre_analysis(panels.order).T


def _rho(zp: np.ndarray) -> np.ndarray:
    """Bernstein ellipse parameter of normalised targets (>= 1)."""
    s = np.sqrt(zp - 1.0 + 0j) * np.sqrt(zp + 1.0 + 0j)
    return np.maximum(np.abs(zp + s), np.abs(zp - s))


def _monomial_cauchy_moments(zp: np.ndarray, n: int, half=None) -> np.ndarray:
    """p_j = int_{-1}^{1} t^j / (z - t) dt for j < n; real z means p.v.

    At ``z = +-1`` exactly the moment diverges; there ``p_0`` is replaced by
    ``+-log(2 half)``, the part that survives when two neighbouring panels
    are combined.
    """
    zp = np.asarray(zp, dtype=complex)
    real = zp.imag == 0
    p = np.empty(zp.shape + (n,), dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        p0 = np.log(zp + 1.0) - np.log(zp - 1.0)
        p0r = np.log(np.abs(zp.real + 1.0)) - np.log(np.abs(zp.real - 1.0))
    p[..., 0] = np.where(real, p0r, p0)
    edge = real & (np.abs(zp.real) == 1.0)
    if np.any(edge):
        h = np.broadcast_to(1.0 if half is None else half, zp.shape)[edge]
        p[..., 0][edge] = zp.real[edge] * np.log(2.0 * h)
    for j in range(n - 1):
        c = (1.0 - (-1.0) ** (j + 1)) / (j + 1)
        p[..., j + 1] = zp * p[..., j] - c
    return p


def cauchy(panels: Panels, fvals: np.ndarray, z, chunk: int = 256) -> np.ndarray:
    """``(1/pi) int f(t) / (z - t) dt`` for an array of targets ``z``.

    Real targets give the principal value. ``fvals`` are the values of ``f``
    at ``panels.nodes`` (same shape).
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    shape = z.shape
    z = z.ravel()
    nodes, wts = panels.nodes, panels.weights
    wf = wts * fvals
    n = panels.order
    solve = _monomial_solve(n)
    out = np.empty(z.size, dtype=complex)
    for s in range(0, z.size, chunk):
        zc = z[s : s + chunk]
        zp = (zc[:, None] - panels.center[None, :]) / panels.half[None, :]
        near = _rho(zp) < NEAR_RHO
        with np.errstate(divide="ignore", invalid="ignore"):
            contrib = np.einsum("mpn,pn->mp", 1.0 / (zc[:, None, None] - nodes[None]), wf)
        if near.any():
            ti, pj = np.nonzero(near)
            zn = zp[ti, pj]
            # targets sitting exactly on a panel edge: the log singularities
            # of the two neighbours cancel in the principal value, so use the
            # symmetric-exclusion limit with the common log(eps) dropped
            zr = zc[ti]
            at_lo = (zr.imag == 0) & (zr.real == panels.lo[pj])
            at_hi = (zr.imag == 0) & (zr.real == panels.hi[pj])
            zn = np.where(at_lo, -1.0, np.where(at_hi, 1.0, zn))
            mom = _monomial_cauchy_moments(zn, n, panels.half[pj])
            w = mom @ solve.T
            contrib[ti, pj] = np.einsum("kn,kn->k", w, fvals[pj])
        out[s : s + chunk] = contrib.sum(axis=1)
    return (out / np.pi).reshape(shape)


def fourier(panels: Panels, fvals: np.ndarray, y, chunk: int = 64) -> np.ndarray:
    """``int exp(2 pi i y k) f(k) dk`` for an array of ``y``, Filon-style."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    shape = y.shape
    y = y.ravel()
    n = panels.order
    coeffs = legendre_coefficients(panels, fvals)  # (P, n)
    m = np.arange(n)
    ipow = 2.0 * (1j ** m)
    ac = coeffs * ipow[None, :]
    out = np.empty(y.size, dtype=complex)
    for s in range(0, y.size, chunk):
        yc = y[s : s + chunk]
        om = 2 * np.pi * yc[:, None] * panels.half[None, :]
        jn = spherical_jn(m[None, None, :], om[:, :, None])
        local = np.einsum("mpn,pn->mp", jn, ac)
        phase = np.exp(2j * np.pi * yc[:, None] * panels.center[None, :])
        out[s : s + chunk] = np.sum(local * phase * panels.half[None, :], axis=1)
    return out.reshape(shape)


class CompactFunction:
    """A function with bounded support, plus its cached adaptive panels.

    ``breakpoints`` are points inside the support where the function is not
    smooth; they become panel edges.
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], support: tuple[float, float],
                 breakpoints: Sequence[float] = (), tol: float = 1e-13):
        self.fn = fn
        self.support = (float(support[0]), float(support[1]))
        self.breakpoints = tuple(breakpoints)
        self.tol = tol

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.support
        out = np.zeros(x.shape, dtype=float)
        m = (x >= a) & (x <= b)
        if m.any():
            out[m] = self.fn(x[m])
        return out

    @cached_property
    def panels(self) -> Panels:
        a, b = self.support
        return adaptive_panels(self, a, b, self.breakpoints, tol=self.tol)

    @cached_property
    def values(self) -> np.ndarray:
        return self(self.panels.nodes)

    @cached_property
    def scale(self) -> float:
        return float(np.max(np.abs(self.values)))

    def integral(self) -> float:
        return float(integrate(self.panels, self.values))
