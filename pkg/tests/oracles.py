"""Independent reference implementations used only by the tests.

Nothing here imports the numerical core of :mod:`alber`; each routine is a
closed form, a brute-force method or a high-precision evaluation.
"""

from __future__ import annotations

import math

import mpmath as mp
import numpy as np
from scipy import integrate, special


def jonswap_mp(k, alpha, gamma, k0=1.0, dl=0.07, dh=0.09, dps=40):
    """JONSWAP wavenumber density in multiple precision."""
    with mp.workdps(dps):
        k, k0 = mp.mpf(k), mp.mpf(k0)
        d = mp.mpf(dl) if k <= k0 else mp.mpf(dh)
        r = mp.exp(-(1 - mp.sqrt(k / k0)) ** 2 / (2 * d**2))
        return float(mp.mpf(alpha) / (2 * k**3) * mp.exp(-mp.mpf(5) / 4 * (k0 / k) ** 2) * mp.mpf(gamma) ** r)


def box_hilbert(z, a=-1.0, b=1.0):
    """(1/pi) int_a^b dt / (z - t); principal value on the real axis."""
    z = np.asarray(z)
    if np.iscomplexobj(z) and np.any(z.imag != 0):
        return np.log((z - a) / (z - b)) / math.pi
    x = np.real(z)
    return np.log(np.abs((x - a) / (x - b))) / math.pi


def gaussian_hilbert(x):
    """H[exp(-t^2)](x) = (2/sqrt(pi)) Dawson(x) for the (1/pi) p.v. convention."""
    return 2.0 / math.sqrt(math.pi) * special.dawsn(x)


def box_fourier(y, a=-0.5, b=0.5):
    """int_a^b exp(2 pi i k y) dk."""
    y = np.asarray(y, dtype=float)
    out = np.empty(y.shape, complex)
    small = np.abs(y) < 1e-12
    ys = y[~small]
    out[~small] = (np.exp(2j * math.pi * b * ys) - np.exp(2j * math.pi * a * ys)) / (2j * math.pi * ys)
    out[small] = b - a
    return out


def ray_casting(poly, pt) -> bool:
    """Even-odd point in polygon by a horizontal ray (W. R. Franklin's test)."""
    x, y = pt
    inside = False
    n = len(poly)
    j = n - 1
    for i in range(n):
        xi, yi = poly[i]
        xj, yj = poly[j]
        if (yi > y) != (yj > y) and x < (xj - xi) * (y - yi) / (yj - yi) + xi:
            inside = not inside
        j = i
    return inside


def segment_distance(poly, pt) -> float:
    """Distance from pt to the closed polygon boundary."""
    p = np.asarray(pt, float)
    best = math.inf
    n = len(poly)
    for i in range(n):
        a = np.asarray(poly[i], float)
        b = np.asarray(poly[(i + 1) % n], float)
        ab = b - a
        L = ab @ ab
        s = 0.0 if L == 0 else min(1.0, max(0.0, (p - a) @ ab / L))
        best = min(best, float(np.linalg.norm(a + s * ab - p)))
    return best


def laplace_numeric(t, h, omega):
    """int_0^T exp(-omega t) h(t) dt by the trapezoid rule on tabulated h."""
    return integrate.trapezoid(np.exp(-omega * t) * h, t)


def quad_complex(f, a, b, **kw):
    re = integrate.quad(lambda x: f(x).real, a, b, limit=400, **kw)[0]
    im = integrate.quad(lambda x: f(x).imag, a, b, limit=400, **kw)[0]
    return re + 1j * im


def bump_fn(x, c=0.0, w=1.0, h=1.0):
    """h exp(1 - 1/(1 - u^2)), u = (x - c)/w, on |u| < 1."""
    u = (np.asarray(x, float) - c) / w
    out = np.zeros(u.shape)
    m = np.abs(u) < 1
    out[m] = h * np.exp(1.0 - 1.0 / (1.0 - u[m] ** 2))
    return out


def bump_second_derivative(x):
    """d^2/dx^2 of exp(1 - 1/(1 - x^2)); even, zero mean and zero first moment."""
    x = np.asarray(x, float)
    out = np.zeros(x.shape)
    m = np.abs(x) < 1
    u = x[m]
    g = 1 - u**2
    e = np.exp(1 - 1 / g)
    d1 = -2 * u / g**2
    d1p = -2 / g**2 - 8 * u**2 / g**3
    out[m] = e * (d1**2 + d1p)
    return out


def volterra_manufactured(t):
    """n = exp(-t), h = sin t: int_0^t sin(t - s) e^{-s} ds = (sin t - cos t + e^{-t}) / 2."""
    n = np.exp(-t)
    nf = n - 0.5 * (np.sin(t) - np.cos(t) + np.exp(-t))
    return np.sin(t), nf, n
