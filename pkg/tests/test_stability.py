import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alber.errors import NumericalError
from alber.spectra import Spectrum, bump, dxp_function, jonswap
from alber.stability import (
    StabilityConfig,
    eigenvalue_crosscheck,
    gamma_curve,
    is_unstable,
    kappa_estimate,
    scan_plane,
    separatrix_alpha,
    span_rows,
    sufficient_stable,
    winding_contains,
    winding_number,
)
from alber.transforms import PhysicalParams, hilbert_at

from oracles import ray_casting, segment_distance

PRM = PhysicalParams()
TARGET = PRM.target
SQUARE = np.array([-1 - 1j, 1 - 1j, 1 + 1j, -1 + 1j])

# critical alpha per gamma from a bisection of the verdict (rel. width 1e-3)
ALPHA_CRIT = {1.0: 0.2499, 3.3: 0.0312, 5.0: 0.0176, 10.0: 0.0073}


class TestWinding:
    def test_square(self):
        assert winding_contains(SQUARE, 0j) == "inside"
        assert winding_contains(SQUARE, 3 + 0j) == "outside"
        assert winding_contains(SQUARE, 1 + 0.2j) == "on-curve"

    def test_orientation_sign(self):
        assert winding_number(SQUARE, [0j])[0] == 1
        assert winding_number(SQUARE[::-1], [0j])[0] == -1

    def test_degenerate(self):
        pts = np.full(5, 0.3 + 0.1j)
        assert winding_contains(pts, 0j) == "outside"
        assert winding_contains(pts, 0.3 + 0.1j) == "on-curve"

    def test_double_loop(self):
        th = np.linspace(0, 4 * np.pi, 400, endpoint=False)
        assert winding_number(np.exp(1j * th), [0j])[0] == 2

    @settings(max_examples=300, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_random_polygons_vs_ray_casting(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 12))
        # star-shaped polygons are simple, so the even-odd rule and |winding| agree
        ang = np.sort(rng.uniform(0, 2 * np.pi, n))
        poly = rng.uniform(0.2, 1.0, n) * np.exp(1j * ang)
        z = complex(*rng.uniform(-1.2, 1.2, 2))
        pl = [(p.real, p.imag) for p in poly]
        if segment_distance(pl, (z.real, z.imag)) < 1e-6:
            return
        got = winding_contains(poly, z)
        assert (got == "inside") == ray_casting(pl, (z.real, z.imag))


class TestCurves:
    def test_zero_spectrum_single_point(self):
        c = gamma_curve(Spectrum.zero(), PRM, 0.3)
        assert c.points.tolist() == [0j]

    def test_closed_and_ends_small(self):
        c = gamma_curve(jonswap(0.02, 3.3), PRM, 0.2)
        assert c.points[-1] == 0 and c.closed
        ends = max(abs(c.open_points[0]), abs(c.open_points[-1]))
        assert ends <= 1e-3 * c.sup

    def test_short_grid_rejected(self):
        with pytest.raises(NumericalError, match="t-range too small"):
            gamma_curve(jonswap(0.02, 3.3), PRM, 0.2, np.linspace(0.9, 1.1, 50))

    def test_large_offset_inside_small_disk(self):
        c = gamma_curve(jonswap(0.05, 3.3), PRM, 3.0)
        assert c.sup < 2 * math.pi * PRM.p / PRM.q

    def test_crossings_at_quasi_critical_points(self):
        P = jonswap(0.05, 3.3)
        X = 0.3
        c = gamma_curve(P, PRM, X)
        f = dxp_function(P, X)
        pts, t = c.open_points, c.t_nodes
        s = np.nonzero(np.sign(pts.imag[:-1]) != np.sign(pts.imag[1:]))[0]
        scale = np.max(np.abs(f.values))
        for i in s:
            # |Im Gamma| ~ |D_X P| on the axis, so a sign change needs D_X P ~ 0 nearby
            assert min(abs(f(t[i])), abs(f(t[i + 1]))) < 0.05 * scale

    def test_mirror_is_conjugate(self):
        c = gamma_curve(jonswap(0.02, 3.3), PRM, 0.4)
        m = c.mirrored()
        assert m.X == -0.4 and np.array_equal(m.points, np.conj(c.points))


class TestVerdict:
    def test_zero_spectrum(self):
        v = is_unstable(Spectrum.zero())
        assert not v.unstable and v.kappa_estimate == 1.0 and v.unstable_X == []

    def test_small_alpha_stable(self):
        v = is_unstable(jonswap(1e-6, 3.3))
        assert not v.unstable and abs(v.kappa_estimate - 1) < 1e-4

    @pytest.mark.parametrize("gamma", sorted(ALPHA_CRIT))
    def test_frozen_boundary(self, gamma):
        a = ALPHA_CRIT[gamma]
        assert not is_unstable(jonswap(0.98 * a, gamma)).unstable
        assert is_unstable(jonswap(1.02 * a, gamma)).unstable

    def test_unstable_band(self):
        v = is_unstable(jonswap(0.2, 3.3))
        assert v.unstable
        lo, hi = v.bandwidth
        assert lo == 0.0 and hi == pytest.approx(0.88, abs=0.021)
        # both signs of X are reported
        assert any(iv[0] < 0 for iv in v.unstable_X)

    def test_unstable_iff_intervals(self):
        for a in (0.01, 0.05):
            v = is_unstable(jonswap(a, 3.3))
            assert v.unstable == bool(v.unstable_X)

    def test_scaling_equivalence(self):
        P = jonswap(0.02, 3.3)
        for c in (0.5, 2.0):
            v1 = is_unstable(P.scaled(c), PRM)
            v2 = is_unstable(P, PhysicalParams(PRM.p, PRM.q * c))
            assert v1.unstable == v2.unstable
            assert v1.kappa_estimate == pytest.approx(v2.kappa_estimate, rel=1e-6)

    @pytest.mark.parametrize("alpha", [0.02, 0.05])
    def test_carrier_invariance(self, alpha):
        v1 = is_unstable(jonswap(alpha, 3.3, k0=1.0))
        v2 = is_unstable(jonswap(alpha, 3.3, k0=2.5))
        assert v1.unstable == v2.unstable
        assert v1.kappa_estimate == pytest.approx(v2.kappa_estimate, rel=1e-6)

    def test_span_rows_symmetric(self):
        v, curves = is_unstable(jonswap(0.02, 3.3), keep_curves=True)
        rows = span_rows(curves)
        xs = [r[0] for r in rows]
        assert xs == sorted(xs) and xs[0] == -xs[-1]


class TestSufficient:
    def test_zero(self):
        assert sufficient_stable(Spectrum.zero()).status == "stable"

    def test_toy_bump_stable_and_agrees(self):
        P = bump(1.0, 0.3, 0.01)
        assert sufficient_stable(P).status == "stable"
        assert not is_unstable(P).unstable

    def test_unstable_never_stable(self):
        P = jonswap(0.2, 3.3)
        assert sufficient_stable(P).status == "inconclusive"


class TestKappa:
    def test_zero_spectrum(self):
        assert kappa_estimate(Spectrum.zero()) == 1.0

    def test_decreases_along_stable_ray(self):
        k = [kappa_estimate(jonswap(a, 3.3)) for a in (0.005, 0.01, 0.02, 0.03)]
        assert all(x > y > 0 for x, y in zip(k, k[1:]))

    def test_interior_never_below_boundary(self):
        P = jonswap(0.02, 3.3)
        kappa = kappa_estimate(P)
        t = np.linspace(0.5, 2.0, 1501)
        mins = []
        for eta in (1e-1, 1e-2, 1e-3):
            mins.append(min(np.min(np.abs(1 - hilbert_at(dxp_function(P, X), t - 1j * eta) / TARGET))
                            for X in np.arange(0.0, 0.41, 0.02)))
        assert all(m >= kappa - 1e-3 for m in mins)
        assert mins[0] > mins[1] > mins[2]
        assert mins[2] - kappa < 1e-2


class TestCrosscheck:
    def test_stable_no_witness(self):
        rep = eigenvalue_crosscheck(jonswap(0.02, 3.3))
        assert rep.witness is None

    def test_unstable_witness(self):
        P = jonswap(0.2, 3.3)
        rep = eigenvalue_crosscheck(P)
        w = rep.witness
        assert w is not None and w.residual < 1e-8
        # independent residual through the Hilbert transform, strictly below the axis
        assert w.omega.imag < 0
        got = hilbert_at(dxp_function(P, w.X), w.omega)
        assert abs(got - TARGET) < 1e-8

    def test_reflected_witness(self):
        P = jonswap(0.2, 3.3)
        w = eigenvalue_crosscheck(P).witness.reflected()
        assert w.X < 0
        assert abs(hilbert_at(dxp_function(P, w.X), w.omega) - TARGET) < 1e-8


class TestScan:
    def test_single_cell_matches_direct(self):
        r = scan_plane([3.3], [0.05])
        v = is_unstable(jonswap(0.05, 3.3))
        assert bool(r.unstable[0, 0]) == v.unstable
        assert r.kappa[0, 0] == pytest.approx(v.kappa_estimate, rel=1e-9)

    def test_rows_and_single_switch(self):
        alphas = np.geomspace(1e-3, 0.5, 9)
        r = scan_plane([1.0, 4.0], alphas)
        rows = list(r.rows())
        assert len(rows) == 2 * 9
        for i in range(2):
            flips = np.count_nonzero(np.diff(r.unstable[i].astype(int)))
            assert flips <= 1

    def test_separatrix_formula(self):
        g = np.array([1.0, 3.3])
        m1 = np.array([jonswap(1.0, x).integral for x in g])
        assert np.allclose(separatrix_alpha(g, 0.77), 4 * 0.77**2 * m1 / g**2)

    def test_bad_grid(self):
        from alber.errors import ConfigError

        with pytest.raises(ConfigError):
            scan_plane([0.5], [0.1])


def test_config_validation():
    from alber.errors import ConfigError

    with pytest.raises(ConfigError):
        StabilityConfig(x_step=0.0)
