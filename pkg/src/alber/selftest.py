"""Fast consistency checks run by ``alber selftest``.

Each check compares a production routine against an independent closed form
or a second implementation and takes well under a second.
"""

from __future__ import annotations

import math

import numpy as np

from .quadrature import CompactFunction
from .solver import InitialData, free_density, free_density_direct, solve_volterra
from .spectra import bump, jonswap, Spectrum
from .stability import is_unstable
from .transforms import PhysicalParams, h_tilde, h_tilde_direct, hilbert_at


def _check(name, err, tol):
    return {"name": name, "error": float(err), "tol": tol, "passed": bool(err <= tol)}


def _box_hilbert():
    box = CompactFunction(lambda x: np.ones_like(x), (-1.0, 1.0))
    z = 0.3 + 0.7j
    exact = np.log((z + 1) / (z - 1)) / math.pi
    return _check("hilbert box closed form", abs(hilbert_at(box, z) - exact), 1e-12)


def _h_tilde_pair():
    P, prm = bump(1.0, 0.3, 0.2), PhysicalParams()
    om = 0.05 + 0.02j
    return _check("h_tilde vs direct quadrature", abs(h_tilde(P, prm, 0.4, om) - h_tilde_direct(P, prm, 0.4, om)), 1e-9)


def _free_density_pair():
    w0, prm = InitialData.gaussian(), PhysicalParams()
    err = max(abs(free_density(w0, prm, X, t) - free_density_direct(w0, prm, X, t))
              for X, t in ((0.5, 3.0), (-1.2, 20.0)))
    return _check("free density vs direct quadrature", err, 1e-10)


def _volterra_manufactured():
    t = np.linspace(0.0, 4.0, 161)
    n = np.exp(-t)
    nf = n - 0.5 * (np.sin(t) - np.cos(t) + np.exp(-t))
    err = np.max(np.abs(solve_volterra(np.sin(t), nf, t) - n))
    return _check("Volterra manufactured solution", err, 2e-4)


def _small_spectra_stable():
    v1 = is_unstable(Spectrum.zero())
    v2 = is_unstable(jonswap(1e-6, 1.0))
    return _check("zero and tiny spectra stable", float(v1.unstable or v2.unstable), 0.0)


CHECKS = (_box_hilbert, _h_tilde_pair, _free_density_pair, _volterra_manufactured, _small_spectra_stable)


def run_selftest() -> list[dict]:
    return [c() for c in CHECKS]
