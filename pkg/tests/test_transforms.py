import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alber.errors import ConfigError
from alber.quadrature import CompactFunction
from alber.spectra import Spectrum, bump, gaussian, jonswap
from alber.transforms import (
    PhysicalParams,
    h_tilde,
    h_tilde_direct,
    hilbert_at,
    hilbert_window_l1,
    inverse_fourier,
    kernel_h,
    plemelj_side,
    signal_transform,
)

from oracles import box_fourier, box_hilbert, bump_fn, bump_second_derivative, gaussian_hilbert

PRM = PhysicalParams()
BOX = CompactFunction(lambda x: np.ones_like(x), (-1.0, 1.0))


def smooth_bump(c=0.0, w=1.0):
    return CompactFunction(lambda x: bump_fn(x, c, w), (c - w, c + w))


class TestHilbert:
    def test_box_real_outside(self):
        assert hilbert_at(BOX, 2.0) == pytest.approx(math.log(3) / math.pi, rel=1e-12)

    @pytest.mark.parametrize("x", [-0.9, -0.3, 0.0, 0.45, 0.999, 1.7, -5.0])
    def test_box_real(self, x):
        assert hilbert_at(BOX, x) == pytest.approx(box_hilbert(x), rel=1e-8, abs=1e-14)

    @settings(max_examples=60, deadline=None)
    @given(x=st.floats(-3, 3), y=st.floats(1e-6, 3).flatmap(lambda v: st.sampled_from([v, -v])))
    def test_box_complex(self, x, y):
        z = complex(x, y)
        ref = box_hilbert(np.array([z]))[0]
        assert abs(hilbert_at(BOX, z) - ref) <= 1e-8 * abs(ref) + 1e-13

    def test_gaussian_dawson(self):
        f = gaussian(0.0, 1 / math.sqrt(2), 1.0)
        x = np.array([-2.5, -0.4, 0.0, 0.3, 1.1, 4.0])
        assert np.allclose(hilbert_at(f, x), gaussian_hilbert(x), rtol=1e-8, atol=1e-10)

    def test_even_at_origin(self):
        assert abs(hilbert_at(smooth_bump(), 0.0)) < 1e-14

    def test_decay_like_inverse_distance(self):
        f = smooth_bump(0.0, 1.0)
        m = f.integral()
        for R in (1e2, 1e3, 1e4):
            z = R * (1 - 0.3j)
            assert abs(hilbert_at(f, z) * z * math.pi / m - 1) < 2 / R


class TestSignal:
    def test_even_at_origin(self):
        s = signal_transform(smooth_bump(), 0.0)
        assert s.real == pytest.approx(0.0, abs=1e-14)
        assert s.imag == pytest.approx(-1.0)

    def test_outside_support_real(self):
        s = signal_transform(smooth_bump(), 1.5)
        assert s.imag == 0.0 and s.real == pytest.approx(hilbert_at(smooth_bump(), 1.5))

    @pytest.mark.parametrize("x", [-0.6, 0.2, 0.75])
    def test_plemelj_limits(self, x):
        f = smooth_bump()
        S = signal_transform(f, x)
        for eta in (1e-2, 1e-3, 1e-4):
            # from above the Cauchy integral tends to S = H - iu, from below to its conjugate
            assert abs(hilbert_at(f, x + 1j * eta) - S) < 40 * eta
            assert abs(hilbert_at(f, x - 1j * eta) - np.conj(S)) < 40 * eta

    def test_eta_sweep_monotone(self):
        f = smooth_bump()
        x = 0.35
        S = signal_transform(f, x)
        errs = [abs(hilbert_at(f, x + 1j * eta) - S) for eta in 10.0 ** -np.arange(1, 6)]
        assert all(a > b for a, b in zip(errs, errs[1:]))

    def test_side_selection(self):
        assert plemelj_side(PRM, 0.5) == "lower"
        assert plemelj_side(PRM, -0.5) == "upper"


class TestPlancherelAndIntegrability:
    def test_l2_isometry(self):
        # mean-zero f so that H f decays like 1/x^2 and the tail past R is negligible
        g = CompactFunction(bump_second_derivative, (-1.0, 1.0))
        x, w = np.polynomial.legendre.leggauss(16)
        edges = np.concatenate([-np.geomspace(400, 2, 60), np.linspace(-2, 2, 81)[1:-1], np.geomspace(2, 400, 60)])
        c, h = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
        xs = (c[:, None] + h[:, None] * x).ravel()
        wts = (h[:, None] * w).ravel()
        lhs = np.sum(wts * hilbert_at(g, xs) ** 2)
        rhs = np.sum(wts * g(xs) ** 2)
        assert lhs == pytest.approx(rhs, rel=1e-6)

    def test_mean_zero_converges(self):
        g = CompactFunction(bump_second_derivative, (-1.0, 1.0))
        v = [hilbert_window_l1(g, R) for R in (1e2, 1e3, 1e4)]
        d = np.diff(v)
        assert abs(d[0]) / abs(d[1]) >= 10

    def test_nonzero_mean_log_growth(self):
        f = smooth_bump()
        R = np.array([1e2, 1e3, 1e4])
        v = [hilbert_window_l1(f, r) for r in R]
        slope = np.polyfit(np.log(R), v, 1)[0]
        # both half-lines contribute (1/pi)|int f| log R
        assert slope == pytest.approx(2 / math.pi * f.integral(), rel=1e-3)

    def test_bad_radius(self):
        with pytest.raises(ConfigError):
            hilbert_window_l1(BOX, 0.0)


class TestHTilde:
    def test_zero_offset(self):
        P = jonswap(0.02, 3.3)
        for om in (0.1 + 0.2j, 3.0, 1e-3 + 5j):
            assert h_tilde(P, PRM, 0.0, om) == 0

    @settings(max_examples=25, deadline=None)
    @given(X=st.floats(0.05, 1.5).flatmap(lambda v: st.sampled_from([v, -v])),
           a=st.floats(1e-3, 2.0), b=st.floats(-2.0, 2.0))
    def test_matches_direct(self, X, a, b):
        P = bump(1.0, 0.3, 0.2)
        om = complex(a, b)
        ref = h_tilde_direct(P, PRM, X, om)
        assert abs(h_tilde(P, PRM, X, om) - ref) <= 1e-8 * abs(ref) + 1e-14

    def test_jonswap_matches_direct(self):
        P = jonswap(0.02, 3.3)
        for X, om in ((0.3, 0.05 + 0.01j), (0.3, 2 + 3j), (0.8, 0.2 - 0.1j)):
            ref = h_tilde_direct(P, PRM, X, om)
            assert abs(h_tilde(P, PRM, X, om) - ref) < 1e-8 * abs(ref)

    def test_large_omega_vanishes(self):
        P = jonswap(0.02, 3.3)
        vals = [abs(h_tilde(P, PRM, 0.5, R * (1 + 1j))) for R in (1.0, 10.0, 100.0, 1000.0)]
        assert all(a > b for a, b in zip(vals, vals[1:])) and vals[-1] < 1e-5

    def test_conjugate_reflection(self):
        P = jonswap(0.02, 3.3)
        om = 0.07 + 0.3j
        assert h_tilde(P, PRM, -0.4, np.conj(om)) == pytest.approx(np.conj(h_tilde(P, PRM, 0.4, om)), rel=1e-12)

    def test_zero_spectrum(self):
        assert h_tilde(Spectrum.zero(), PRM, 0.5, 1 + 1j) == 0


class TestKernel:
    P = bump(1.0, 0.3, 0.2)

    def test_origin_and_zero_offset(self):
        t = np.linspace(0, 5, 11)
        assert kernel_h(self.P, PRM, 0.7, t).values[0] == 0
        assert np.all(kernel_h(self.P, PRM, 0.0, t).values == 0)

    def test_grid_must_start_at_zero(self):
        with pytest.raises(ConfigError):
            kernel_h(self.P, PRM, 0.4, np.array([0.1, 0.2, 0.3]))

    @pytest.mark.parametrize("X", [0.4, 1.0])
    def test_laplace_transform(self, X):
        t = np.linspace(0, 40, 40001)
        k = kernel_h(self.P, PRM, X, t)
        om = 1 + 1j
        lap = np.trapezoid(np.exp(-om * t) * k.values, t)
        ref = h_tilde(self.P, PRM, X, om)
        assert abs(lap - ref) < 1e-4 * abs(ref)

    def test_complex_for_asymmetric_spectrum(self):
        k = kernel_h(self.P, PRM, 0.6, np.linspace(0, 30, 301))
        assert k.imag_max > 1e-3


class TestInverseFourier:
    def test_origin_is_integral(self):
        P = jonswap(0.02, 3.3)
        assert inverse_fourier(P, np.array([0.0]))[0] == pytest.approx(P.integral, rel=1e-13)

    def test_box_sinc(self):
        box = CompactFunction(lambda x: np.ones_like(x), (-0.5, 0.5))
        y = np.array([0.0, 0.3, 1.0, 2.5, 17.2, 120.0])
        assert np.allclose(inverse_fourier(box, y), box_fourier(y), atol=1e-13)

    def test_shifted_box(self):
        box = CompactFunction(lambda x: np.ones_like(x), (0.7, 1.9))
        y = np.linspace(-30, 30, 61)
        assert np.allclose(inverse_fourier(box, y), box_fourier(y, 0.7, 1.9), atol=1e-12)

    def test_bounded_and_hermitian(self):
        P = jonswap(0.05, 3.3)
        y = np.linspace(0, 50, 201)
        v = inverse_fourier(P, y)
        assert np.all(np.abs(v) <= P.integral * (1 + 1e-12))
        assert np.allclose(inverse_fourier(P, -y), np.conj(v), atol=1e-15)
