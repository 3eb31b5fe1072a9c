import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alber.errors import ConfigError, DomainError, EmptySpectrumError
from alber.spectra import (
    FitConfig,
    JonswapParams,
    RawSpectrum,
    SeaState,
    Spectrum,
    bump,
    dxp_eval,
    dxp_function,
    fit_sea_state,
    jonswap,
    jonswap_derivative,
    jonswap_eval,
    load_table,
    rescale_unit_carrier,
    tabulated,
    truncate_to_compact,
)

from oracles import jonswap_mp

# frozen from a 40-digit evaluation of the closed form
JONSWAP_001_3_AT_1P2 = 0.0022716208258767394672
# pointwise 1e-10 threshold end below the peak, by multiple precision bisection
JONSWAP_001_3_LOWER_END = 0.21193436267918013
# hand calculations of the DNV-style practice, g = 9.81
DNV_HS9_TP12 = (3.1581929096897676, 0.013244449340084473)
DNV_HS4_TP10 = (1.0, 0.008097509440553176)


class TestJonswap:
    def test_gamma_one_is_plain_pm(self):
        k = np.array([0.5, 1.0, 2.0, 7.0])
        got = jonswap_eval(JonswapParams(0.3, 1.0), k)
        assert np.allclose(got, 0.3 / (2 * k**3) * np.exp(-1.25 / k**2), rtol=1e-14)

    def test_peak_factor_at_carrier(self):
        base = jonswap_eval(JonswapParams(0.01, 1.0), 1.0)
        assert jonswap_eval(JonswapParams(0.01, 3.3), 1.0) == pytest.approx(3.3 * base, rel=1e-14)

    def test_frozen_value(self):
        assert jonswap_eval(JonswapParams(0.01, 3.0), 1.2) == pytest.approx(JONSWAP_001_3_AT_1P2, rel=1e-13)

    @settings(max_examples=40, deadline=None)
    @given(k=st.floats(0.2, 40.0), gamma=st.floats(1.0, 10.0), alpha=st.floats(1e-4, 1.0))
    def test_matches_multiprecision(self, k, gamma, alpha):
        ref = jonswap_mp(k, alpha, gamma)
        assert jonswap_eval(JonswapParams(alpha, gamma), k) == pytest.approx(ref, rel=1e-12, abs=1e-300)

    def test_continuous_at_carrier(self):
        p = JonswapParams(0.02, 5.0)
        eps = 1e-9
        assert jonswap_eval(p, 1 - eps) == pytest.approx(jonswap_eval(p, 1 + eps), rel=1e-7)

    def test_derivative_matches_difference(self):
        p = JonswapParams(0.02, 3.3)
        k = np.array([0.8, 0.97, 1.05, 2.5])
        h = 1e-6
        fd = (jonswap_eval(p, k + h) - jonswap_eval(p, k - h)) / (2 * h)
        assert np.allclose(jonswap_derivative(p, k), fd, rtol=1e-6)

    @pytest.mark.parametrize("k", [0.0, -1.0])
    def test_nonpositive_k(self, k):
        with pytest.raises(DomainError):
            jonswap_eval(JonswapParams(0.01), k)

    @pytest.mark.parametrize("kw", [dict(alpha=0.0), dict(alpha=0.1, gamma=0.5), dict(alpha=0.1, k0=-1)])
    def test_bad_params(self, kw):
        with pytest.raises(ConfigError):
            JonswapParams(**kw)


class TestTruncation:
    def test_box_support_exact(self):
        raw = RawSpectrum(lambda k: np.where((k >= 1) & (k <= 2), 1.0, 0.0), (0.0, 3.0), (1.0, 2.0))
        P = truncate_to_compact(raw, 1e-8)
        assert P.support == (1.0, 2.0)

    def test_zero_raw_is_empty(self):
        raw = RawSpectrum(lambda k: np.zeros_like(k), (0.0, 3.0), (1.0, 2.0))
        with pytest.raises(EmptySpectrumError, match="empty spectrum"):
            truncate_to_compact(raw, 1e-8)

    def test_jonswap_lower_end_is_pointwise_threshold(self):
        P = jonswap(0.01, 3.0)
        assert P.support[0] == pytest.approx(JONSWAP_001_3_LOWER_END, rel=1e-12)

    def test_jonswap_upper_end_keeps_mass(self):
        # the k^-3 tail keeps more than the threshold of mass past the pointwise end,
        # so the upper end moves out until the dropped mass is below the threshold
        P = jonswap(0.01, 3.0)
        a, b = P.support
        tail = 0.01 / (4 * b**2)  # int_b^inf alpha/(2k^3) dk, the exponential factors are ~1 there
        assert tail < 1e-10 * P.integral
        assert jonswap_mp(b, 0.01, 3.0) < 1e-10 * jonswap_eval(JonswapParams(0.01, 3.0), P.peak)

    def test_integral_preserved(self):
        from scipy import integrate

        P = jonswap(0.01, 3.0)
        full = integrate.quad(lambda k: jonswap_mp(k, 0.01, 3.0), 0.05, 1.0, limit=200)[0] \
            + integrate.quad(lambda k: jonswap_mp(k, 0.01, 3.0), 1.0, np.inf, limit=200)[0]
        assert abs(P.integral - full) / full < 1e-9

    def test_zero_outside_support(self):
        P = jonswap(0.02, 3.3)
        a, b = P.support
        assert P(np.array([a * 0.999, b * 1.001])).tolist() == [0.0, 0.0]

    def test_peak_near_carrier(self):
        assert jonswap(0.02, 3.3).peak == pytest.approx(1.0, abs=0.02)


class TestDifferenceQuotient:
    def test_even_spectrum_zero_at_origin(self):
        P = bump(0.0, 1.0, 1.0)
        for X in (0.1, 0.7, 1.5):
            assert dxp_eval(P, X, 0.0) == 0.0

    def test_x_zero_is_derivative(self):
        P = jonswap(0.02, 3.3)
        k = np.array([0.9, 1.0, 1.3])
        assert np.array_equal(dxp_eval(P, 0.0, k), P.derivative(k))

    @pytest.mark.parametrize("X", [0.1, 0.5, 1.0])
    def test_zero_integral(self, X):
        f = dxp_function(jonswap(0.02, 3.3), X)
        assert abs(f.integral()) < 1e-12 * np.max(np.abs(f.values))

    def test_second_order_in_x(self):
        P = bump(1.0, 0.3, 1.0)
        k = np.linspace(0.75, 1.25, 41)
        e1 = np.max(np.abs(dxp_eval(P, 0.02, k) - P.derivative(k)))
        e2 = np.max(np.abs(dxp_eval(P, 0.01, k) - P.derivative(k)))
        assert 3.5 < e1 / e2 < 4.5

    @settings(max_examples=25, deadline=None)
    @given(X=st.floats(-2.0, 2.0).filter(lambda x: abs(x) > 1e-3))
    def test_support_inflated_by_half_offset(self, X):
        P = bump(1.0, 0.3)
        f = dxp_function(P, X)
        assert f.support == pytest.approx((0.7 - abs(X) / 2, 1.3 + abs(X) / 2))


class TestRescale:
    def test_identity_at_unit_carrier(self):
        P = jonswap(0.02, 3.3)
        Q = rescale_unit_carrier(P, 1.0)
        k = np.linspace(0.5, 3, 11)
        assert np.array_equal(P(k), Q(k))

    def test_carrier_two_maps_to_unit(self):
        P2 = jonswap(0.02, 3.3, k0=2.0)
        P1 = jonswap(0.02, 3.3, k0=1.0)
        Q = rescale_unit_carrier(P2)
        k = np.linspace(0.6, 2.5, 23)
        assert np.allclose(Q(k), P1(k), rtol=1e-12)
        assert Q.carrier == 1.0
        assert Q.peak == pytest.approx(1.0, abs=0.02)

    def test_bad_carrier(self):
        with pytest.raises(DomainError):
            rescale_unit_carrier(jonswap(0.02), -1.0)


class TestTables:
    def test_empty_file(self, tmp_path):
        p = tmp_path / "empty.dat"
        p.write_text("# nothing here\n\n")
        with pytest.raises(EmptySpectrumError, match="empty spectrum"):
            load_table(p)

    def test_all_zero_values(self, tmp_path):
        p = tmp_path / "zeros.dat"
        p.write_text("1 0\n2 0\n")
        with pytest.raises(EmptySpectrumError):
            load_table(p)

    def test_malformed_line_number(self, tmp_path):
        p = tmp_path / "bad.dat"
        p.write_text("1 0.1\n2 abc\n")
        with pytest.raises(ConfigError, match=":2:"):
            load_table(p)

    def test_non_increasing(self):
        with pytest.raises(ConfigError, match="increasing"):
            tabulated([1.0, 1.0, 2.0], [0.1, 0.2, 0.1])

    def test_interpolates_nodes(self, tmp_path):
        k = np.linspace(0.5, 2.0, 31)
        v = np.exp(-((k - 1) ** 2) / 0.05)
        p = tmp_path / "t.dat"
        p.write_text("".join(f"{float(a)!r} {float(b)!r}\n" for a, b in zip(k, v)))
        P = load_table(p)
        assert np.allclose(P(k[1:-1]), v[1:-1], rtol=1e-12)


class TestSeaStates:
    def test_hand_calculation(self):
        r = fit_sea_state(SeaState(9.0, 12.0, "tp"))
        assert (r.gamma, r.alpha) == pytest.approx(DNV_HS9_TP12, rel=1e-12)
        r = fit_sea_state(SeaState(4.0, 10.0, "tp"))
        assert (r.gamma, r.alpha) == pytest.approx(DNV_HS4_TP10, rel=1e-12)

    def test_steep_state_flagged_not_clamped(self):
        r = fit_sea_state(SeaState(2.0, 5.0, "tp"))
        assert r.gamma == 5.0
        assert "steepness_outside_validity" in r.flags

    def test_small_height_vanishing_power(self):
        a = [fit_sea_state(SeaState(h, 8.0, "tp")).alpha for h in (1.0, 0.1, 0.01)]
        assert a[0] > a[1] > a[2] and a[2] < 1e-5

    def test_tz_inverts_to_tp(self):
        r = fit_sea_state(SeaState(5.0, 8.0, "tz"))
        from alber.spectra import _tz_over_tp

        assert r.tp * _tz_over_tp(r.gamma) == pytest.approx(8.0, rel=1e-10)

    def test_gamma_at_least_one(self):
        for hs, t in ((0.5, 15.0), (1.0, 20.0), (3.0, 9.0)):
            assert fit_sea_state(SeaState(hs, t, "tp")).gamma >= 1.0

    @pytest.mark.parametrize("kw", [dict(hs=0.0, t=5.0), dict(hs=1.0, t=5.0, period_kind="ts"),
                                    dict(hs=1.0, t=5.0, count=-1.0)])
    def test_invalid_states(self, kw):
        with pytest.raises(ConfigError):
            SeaState(**kw)

    def test_unknown_practice(self):
        with pytest.raises(ConfigError):
            FitConfig("iso")


def test_zero_spectrum_flags():
    Z = Spectrum.zero()
    assert Z.is_zero and Z.integral == 0.0
