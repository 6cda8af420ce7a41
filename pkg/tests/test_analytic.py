import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zpgi import analytic as an
from zpgi.analytic import PhotonStatsParams

from oracles import pmn_quadrature, pmn_shared_intensity

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def params(nbar, mu=1.0, **kw):
    return PhotonStatsParams(nbar=nbar, mu=mu, **kw)


class TestBoseEinstein:
    def test_known_values(self):
        assert an.bose_einstein_pm(0, 1.0) == pytest.approx(0.5, abs=1e-15)
        assert an.bose_einstein_pm(0, 0.0) == 1.0
        assert an.bose_einstein_pm(3, 0.0) == 0.0
        # direct evaluation: 0.5 / 1.5**2
        assert an.bose_einstein_pm(1, 0.5) == pytest.approx(0.5 / 1.5**2, abs=1e-15)

    def test_normalized(self):
        for nbar in (0.1, 0.5, 1.0, 3.0):
            order = an.truncation_order(nbar, 1e-14)
            total = sum(an.bose_einstein_pm(m, nbar) for m in range(order + 1))
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            an.bose_einstein_pm(0, -0.1)
        with pytest.raises(ValueError):
            an.bose_einstein_pm(-1, 1.0)


class TestParams:
    @pytest.mark.parametrize(
        "kw",
        [
            {"nbar": -0.1},
            {"nbar": 1.0, "mu": -0.2},
            {"nbar": 1.0, "mu": 1.2},
            {"nbar": 1.0, "v": 2.0},
            {"nbar": 1.0, "sigma": 0.0},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            PhotonStatsParams(**kw)


class TestPmn:
    def test_known_values(self):
        assert an.p_mn(0, 0, params(1.0)) == pytest.approx(1.0 / 3.0, abs=1e-15)
        # shared-intensity Gamma-integral oracle gives 2/27 for (1, 1)
        assert pmn_shared_intensity(1, 1, 1.0) == pytest.approx(2.0 / 27.0, abs=1e-15)
        assert an.p_mn(1, 1, params(1.0)) == pytest.approx(2.0 / 27.0, abs=1e-14)

    def test_matches_closed_form_m0(self):
        for nbar in (0.1, 0.5, 1.0, 2.0, 5.0):
            for mu in (0.0, 0.3, 0.7, 1.0):
                p = params(nbar, mu)
                for m in range(11):
                    assert abs(an.p_mn(m, 0, p) - an.p_m0_closed(m, p)) <= 1e-12

    def test_m0_closed_values(self):
        assert an.p_m0_closed(1, params(1.0)) == pytest.approx(1.0 / 9.0, abs=1e-15)
        assert an.p_m0_closed(2, params(0.0, 0.5)) == 0.0

    def test_shared_intensity_oracle(self):
        for nbar in (0.2, 0.5, 1.0, 2.0):
            p = params(nbar, mu=1.0)
            for m in range(9):
                for n in range(9 - m):
                    assert an.p_mn(m, n, p) == pytest.approx(
                        pmn_shared_intensity(m, n, nbar), abs=1e-10
                    )

    def test_quadrature_oracle(self):
        for nbar, mu in [(0.5, 0.3), (0.5, 0.7), (1.0, 0.3), (1.0, 0.7)]:
            p = params(nbar, mu)
            for m in range(5):
                for n in range(5):
                    assert an.p_mn(m, n, p) == pytest.approx(
                        pmn_quadrature(m, n, nbar, mu), abs=1e-6
                    )

    @settings(max_examples=60, deadline=None)
    @given(
        m=st.integers(0, 8),
        n=st.integers(0, 8),
        nbar=st.floats(0.0, 8.0),
        mu=st.floats(0.0, 1.0),
    )
    def test_symmetric_and_bounded(self, m, n, nbar, mu):
        p = params(nbar, mu)
        v = an.p_mn(m, n, p)
        assert 0.0 <= v <= 1.0
        assert v == pytest.approx(an.p_mn(n, m, p), rel=1e-12, abs=1e-300)

    @settings(max_examples=30, deadline=None)
    @given(m=st.integers(0, 6), n=st.integers(0, 6), nbar=st.floats(0.01, 5.0))
    def test_mu_zero_factorizes(self, m, n, nbar):
        p = params(nbar, mu=0.0)
        expected = an.bose_einstein_pm(m, nbar) * an.bose_einstein_pm(n, nbar)
        assert an.p_mn(m, n, p) == pytest.approx(expected, rel=1e-10)


class TestPmnTable:
    def test_single_entry(self):
        t = an.pmn_table(params(1.0), 0)
        assert t.pmn.shape == (1, 1)
        assert t.pmn[0, 0] == pytest.approx(1.0 / 3.0, abs=1e-15)

    def test_outer_product_at_mu_zero(self):
        t = an.pmn_table(params(1.0, mu=0.0), 2)
        be = np.array([an.bose_einstein_pm(m, 1.0) for m in range(3)])
        assert np.allclose(t.pmn, np.outer(be, be), rtol=1e-12)

    def test_row_sums_match_marginal(self):
        nbar = 1.0
        order = an.truncation_order(nbar, 1e-11)
        t = an.pmn_table(params(nbar), order)
        bound = an.marginal_tail_bound(nbar, order)
        assert bound <= 1e-11
        rows = t.row_sums()
        for m in (0, 1, 2, 3):
            assert abs(rows[m] - an.bose_einstein_pm(m, nbar)) <= bound + 1e-12
        # the spec-level spot check: sum over n <= 40 at nbar=1 is 1/4
        t40 = an.pmn_table(params(1.0), 40)
        assert abs(t40.row_sums()[1] - 0.25) <= 1e-10

    def test_normalization_with_tail_bound(self):
        for nbar, mu in [(0.5, 1.0), (2.0, 0.3), (5.0, 0.7)]:
            order = an.truncation_order(nbar, 1e-9)
            t = an.pmn_table(params(nbar, mu), order)
            assert t.total() <= 1.0 + 1e-12
            assert t.total() >= 1.0 - t.tail_bound() - 1e-12

    def test_entries_in_unit_interval(self):
        t = an.pmn_table(params(5.0, 0.3), 60)
        assert t.pmn.min() >= 0.0
        assert t.pmn.max() <= 1.0


class TestG2:
    def test_known_values(self):
        assert an.g2_m0(1, params(0.5)) == pytest.approx(27.0 / 32.0, abs=1e-15)
        assert an.g2_m0(0, params(1.0)) == pytest.approx(4.0 / 3.0, abs=1e-15)
        for m in (0, 1, 3):
            assert an.g2_m0(m, params(1.7, mu=0.0)) == pytest.approx(1.0, abs=1e-12)

    def test_matches_definition(self):
        for nbar in (0.2, 0.7, 2.0):
            for mu in (0.3, 1.0):
                p = params(nbar, mu)
                for m in range(6):
                    ratio = an.p_m0_closed(m, p) / (
                        an.bose_einstein_pm(m, nbar) * an.bose_einstein_pm(0, nbar)
                    )
                    assert an.g2_m0(m, p) == pytest.approx(ratio, rel=1e-12)

    def test_vacuum_continuity(self):
        assert an.g2_m0(2, params(0.0, 0.5)) == 1.0
        assert an.g2_10_tau(0.3, params(0.0)) == 1.0

    def test_g2_00_never_below_one(self):
        nbars = np.linspace(1e-3, 8.0, 100)
        mus = np.linspace(0.0, 1.0, 100)
        for nbar in nbars:
            for mu in mus:
                assert an.g2_m0(0, params(float(nbar), float(mu))) >= 1.0 - 1e-12

    def test_minimum_of_g2_10(self):
        from scipy.optimize import minimize_scalar

        res = minimize_scalar(
            lambda nb: an.g2_m0(1, params(nb)), bounds=(0.01, 5.0), method="bounded",
            options={"xatol": 1e-10},
        )
        assert res.x == pytest.approx(0.5, abs=1e-3)
        assert res.fun == pytest.approx(27.0 / 32.0, abs=1e-9)

    def test_unit_crossing_at_golden_ratio(self):
        from scipy.optimize import brentq

        root = brentq(lambda nb: an.g2_m0(1, params(nb)) - 1.0, 1.0, 2.5, xtol=1e-12)
        assert root == pytest.approx(GOLDEN, abs=1e-9)

    def test_large_nbar_asymptote(self):
        # P(1,0) ~ 1/(4 nbar) makes g2_10 ~ nbar/4 for large nbar
        g = an.g2_m0(1, params(200.0))
        assert 0.98 <= g * 4.0 / 200.0 <= 1.02

    def test_g2_00_exceeds_two_at_large_nbar(self):
        assert an.g2_m0(0, params(4.0)) > 2.0


class TestG2Tau:
    def test_tau_zero_consistency(self):
        p = params(0.5, sigma=2.0, v=1.0)
        assert an.g2_10_tau(0.0, p) == pytest.approx(27.0 / 32.0, abs=1e-14)
        p0 = params(1.0, sigma=1.0, v=1.0)
        assert an.g2_m0_tau(0, 0.0, p0) == pytest.approx(4.0 / 3.0, abs=1e-14)

    def test_long_lag_plateau(self):
        for nbar in (0.5, 2.0):
            p = params(nbar, sigma=1.0, v=0.8)
            assert an.g2_10_tau(60.0, p) == pytest.approx(1.0, abs=1e-12)
            assert an.g2_m0_tau(0, 60.0, p) == pytest.approx(1.0, abs=1e-12)

    def test_sigma_tau_one(self):
        # direct evaluation with mu = exp(-1)
        p = params(0.5, sigma=1.0, v=1.0)
        mu = math.exp(-1.0)
        expected = (1.5**3) * (1.0 + (1.0 - mu) * 0.5) / (1.0 + 1.0 + (1.0 - mu) * 0.25) ** 2
        got = an.g2_10_tau(1.0, p)
        assert got == pytest.approx(expected, rel=1e-12)
        assert got == pytest.approx(0.95375, abs=1e-4)

    def test_v_zero_is_flat(self):
        p = params(1.3, sigma=0.7, v=0.0)
        for tau in (0.0, 0.5, 3.0):
            assert an.g2_m0_tau(3, tau, p) == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(
        nbar=st.floats(0.01, 5.0),
        sigma=st.floats(0.01, 3.0),
        v=st.floats(0.0, 1.0),
        tau=st.floats(0.0, 50.0),
    )
    def test_mu_of_tau_in_range(self, nbar, sigma, v, tau):
        p = PhotonStatsParams(nbar=nbar, sigma=sigma, v=v)
        assert 0.0 <= an.mu_of_tau(tau, p) <= 1.0
        assert an.g2_m0_tau(1, tau, p) >= 0.0
