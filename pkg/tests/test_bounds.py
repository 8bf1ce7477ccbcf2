import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import NOMINAL, solved
from kfoutage import (
    BoundClampedWarning,
    ParameterError,
    SystemParams,
    ThresholdAboveBreakpoint,
    a_kappa,
    high_snr_outage,
    kappa_bounds,
    kappa_taylor,
    outage_bounds,
    outage_closed_form,
    outage_from_density,
    outage_report,
)

RHO0 = SystemParams(0.0, 1.0, 1.0)


def a_kappa_mp(params, lam, dps=20):
    """Independent oracle: tanh-sinh in the original variable, split at multiples of lam."""
    mpmath.mp.dps = dps
    rho2, s2, L = mpmath.mpf(params.rho) ** 2, mpmath.mpf(params.sigma_u2), mpmath.mpf(lam)
    f = lambda m: mpmath.exp(L / (rho2 * m + s2) - L / m) * L / m**2 if m > 0 else mpmath.mpf(0)
    pts = sorted({mpmath.mpf(0), *(min(L * c, s2) for c in (0.02, 0.1, 0.5, 1, 2, 10)), s2})
    return float(1 - mpmath.quad(f, pts))


class TestAKappa:
    @settings(max_examples=25, deadline=None)
    @given(st.floats(-0.99, 0.99), st.floats(0.2, 5.0), st.floats(1e-3, 2.0))
    def test_matches_oracle(self, rho, s2, lam):
        params = SystemParams(rho, s2, 1.0)
        assert a_kappa(params, lam) == pytest.approx(a_kappa_mp(params, lam), abs=1e-10)

    @given(st.floats(1e-6, 50.0), st.floats(0.1, 10.0))
    def test_zero_when_rho_zero(self, lam, s2):
        assert a_kappa(SystemParams(0.0, s2, 1.0), lam) == 0.0

    def test_vanishes_as_lambda_shrinks(self):
        vals = [a_kappa(NOMINAL, lam) for lam in (1e-1, 1e-2, 1e-3, 1e-4, 1e-6)]
        assert np.all(np.diff(vals) < 0)
        assert vals[-1] < 1e-6

    def test_in_unit_interval(self):
        for lam in np.geomspace(1e-4, 20, 12):
            assert 0 < a_kappa(NOMINAL, lam) < 1

    @pytest.mark.parametrize("lam", [0.0, -1.0, math.inf, math.nan])
    def test_rejects_bad_lambda(self, lam):
        with pytest.raises(ParameterError):
            a_kappa(NOMINAL, lam)


class TestKappaBounds:
    def test_rho_zero_collapse(self):
        for lam in (0.01, 0.5, 3.0):
            kb = kappa_bounds(RHO0, lam)
            assert kb.kappa_l == kb.kappa_u == pytest.approx(math.exp(lam), rel=1e-14)
            assert kb.gap == 0.0

    @given(st.floats(-0.99, 0.99), st.floats(0.2, 5.0), st.floats(1e-3, 5.0))
    @settings(deadline=None, max_examples=40)
    def test_ordered_and_positive(self, rho, s2, lam):
        kb = kappa_bounds(SystemParams(rho, s2, 1.0), lam)
        assert 0 < kb.kappa_l <= kb.kappa_u
        assert kb.variant == "stable_b"

    def test_unstable_variant(self):
        params = SystemParams(1.2, 1.0, 1.0)
        kb = kappa_bounds(params, 0.5)
        assert kb.variant == "unstable_inf"
        assert kb.kappa_l == pytest.approx(1 / (kb.a_kappa + math.exp(-0.5)), rel=1e-15)
        assert kb.kappa_l <= kb.kappa_u

    def test_tight_at_high_snr(self):
        assert kappa_bounds(NOMINAL, 0.01).gap < 1e-3

    def test_gap_shrinks_monotonically(self):
        gaps = [kappa_bounds(NOMINAL, lam).gap for lam in (1, 0.5, 0.25, 0.1, 0.01, 0.001)]
        assert np.all(np.diff(gaps) < 0)

    def test_limits(self):
        kb = kappa_bounds(NOMINAL, 1e-6)
        assert abs(kb.kappa_l - 1) < 2e-6 and abs(kb.kappa_u - 1) < 2e-6

    def test_brackets_solver(self):
        kb = kappa_bounds(NOMINAL, 1.0)
        assert kb.kappa_l < solved(NOMINAL, 1.0)[1].kappa < kb.kappa_u


class TestOutageClosedForm:
    def test_kappa_one_lambda_zero(self):
        for M_th in (0.01, 0.5, 1.0):
            assert outage_closed_form(1.0, 0.0, M_th) == 0.0

    def test_rho_zero_value(self):
        assert outage_closed_form(math.e, 1.0, 0.5, sigma_u2=1.0) == pytest.approx(1 - math.exp(-1), rel=1e-15)

    def test_at_break_point_high_snr(self):
        # zero slope at M_th = sigma_u2: the outage vanishes faster than lam
        ratios = []
        for lam in (1e-2, 1e-3, 1e-4):
            lo, hi = outage_bounds(NOMINAL, lam, 1.0)
            assert 0 <= lo <= hi
            ratios.append(hi / lam)
        assert np.all(np.diff(ratios) < 0) and ratios[-1] < 1e-3

    def test_above_break_point(self):
        with pytest.raises(ThresholdAboveBreakpoint):
            outage_closed_form(1.2, 0.5, 1.5, sigma_u2=1.0)

    def test_clamped_with_warning(self):
        with pytest.warns(BoundClampedWarning):
            assert outage_closed_form(3.0, 0.1, 1.0) == 0.0

    def test_vectorised(self):
        out = outage_closed_form(1.1, 0.5, np.array([0.2, 0.5, 1.0]))
        assert out.shape == (3,) and np.all(np.diff(out) < 0)


class TestOutageBounds:
    def test_threshold_above_break(self):
        with pytest.raises(ThresholdAboveBreakpoint):
            outage_bounds(NOMINAL, 0.25, 1.01)
        with pytest.raises(ParameterError):
            outage_bounds(NOMINAL, 0.25, 0.0)

    def test_tighten_to_zero(self):
        lo, hi = outage_bounds(NOMINAL, 1e-5, 0.5)
        assert 0 < lo <= hi < 2e-5
        assert hi - lo < 1e-9

    def test_rho_zero_exact(self):
        lo, hi = outage_bounds(RHO0, 1.0, 0.5)
        assert lo == hi == pytest.approx(1 - math.exp(-1), rel=1e-15)

    @given(st.floats(1e-3, 3.0), st.floats(1e-3, 1.0))
    @settings(deadline=None, max_examples=40)
    def test_ordered(self, lam, M_th):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            lo, hi = outage_bounds(NOMINAL, lam, M_th)
        assert 0 <= lo <= hi <= 1

    def test_bracket_solver(self):
        th = np.linspace(0.05, 1.0, 20)
        for lam in (2.0, 1.0, 0.5, 0.25, 0.125):
            lo, hi = outage_bounds(NOMINAL, lam, th)
            p = outage_from_density(solved(NOMINAL, lam)[0], th)
            assert np.all(lo <= p + 1e-12) and np.all(p <= hi + 1e-12)


class TestHighSNR:
    def test_examples(self):
        assert high_snr_outage(NOMINAL, 0.3, 1.0) == 0.0
        assert high_snr_outage(NOMINAL, 0.01, 0.5) == pytest.approx(0.01, rel=1e-14)
        assert high_snr_outage(NOMINAL, 0.01, 2.0) == 0.0

    def test_close_to_solver(self):
        p = outage_from_density(solved(NOMINAL, 0.01)[0], 0.5)
        assert high_snr_outage(NOMINAL, 0.01, 0.5) == pytest.approx(p, rel=0.1)

    def test_relative_error_shrinks(self):
        errs = []
        for lam in (0.01, 0.005, 0.002, 0.001):
            p = outage_from_density(solved(NOMINAL, lam, 2048)[0], 0.5)
            errs.append(abs(high_snr_outage(NOMINAL, lam, 0.5) / p - 1))
        assert np.all(np.diff(errs) < 0)
        assert errs[-1] < 0.01


class TestKappaTaylor:
    def test_order_zero(self):
        assert kappa_taylor(0.7, 2.0, 0) == 1.0

    @given(st.floats(0.0, 10.0), st.floats(0.1, 10.0))
    def test_first_coefficient(self, lam, s2):
        # exact up to the rounding of 1 + lam/s2
        assert kappa_taylor(lam, s2, 1) - 1 == pytest.approx(lam / s2, abs=2.3e-16 * (1 + lam / s2))

    def test_limit(self):
        assert kappa_taylor(0.25, 1.0, 1) == 1.25
        assert kappa_taylor(0.8, 2.0, 40) == pytest.approx(math.exp(0.4), rel=1e-15)
        assert kappa_taylor(0.8, 2.0, math.inf) == math.exp(0.4)
        _, report = solved(RHO0, 0.8)
        assert report.kappa == pytest.approx(kappa_taylor(0.8, 1.0, math.inf), rel=1e-12)

    def test_rejects_negative_order(self):
        with pytest.raises(ParameterError):
            kappa_taylor(1.0, 1.0, -1)

    def test_first_order_residual(self):
        # the residual is o(lam); for rho != 0 it carries a log factor, lam^2 log(1/lam)
        lams = np.geomspace(0.005, 0.25, 7)
        res = np.array([solved(NOMINAL, float(l))[1].kappa - kappa_taylor(l, 1.0, 1) for l in lams])
        assert np.all(np.diff(np.abs(res) / lams) > 0)
        scaled = np.abs(res) / (lams**2 * np.log(1 / lams))
        assert np.all((scaled > 0.3) & (scaled < 1.0))


class TestOutageReport:
    def test_fields(self):
        r = outage_report(NOMINAL, 0.25, 0.5, p_mc=0.26, p_density=0.2646)
        assert r.p_lower <= r.p_upper
        assert r.p_highsnr == pytest.approx(0.25)
        assert r.p_mc == 0.26 and r.lam == 0.25

    def test_above_break_has_no_bounds(self):
        r = outage_report(NOMINAL, 0.25, 2.0)
        assert r.p_lower is None and r.p_upper is None and r.p_highsnr == 0.0

    def test_high_snr_clamped(self):
        assert outage_report(NOMINAL, 2.0, 0.1).p_highsnr == 1.0
