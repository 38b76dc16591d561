import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlwalk import (
    ConstantBeta,
    LinearDriftBeta,
    ModelParams,
    TableBeta,
    Window,
    check_beta_bounded,
    check_contraction,
    jump_rates,
    rate_boundedness,
    rate_arrays,
)
from nlwalk.errors import InvalidProfile, RateOverflow
from nlwalk.model import eval_beta, largest_contraction_constant


class TestEvalBeta:
    def test_constant(self):
        assert eval_beta(ConstantBeta(1.0), 7) == 1.0

    def test_table_lookup(self):
        prof = TableBeta(values=(2.0, 3.0, 4.0), n_min=-1)
        assert eval_beta(prof, 0) == 3.0

    def test_table_extension(self):
        prof = TableBeta(values=(2.0, 3.0, 4.0), n_min=-1, right=5.0)
        assert eval_beta(prof, 10) == 5.0
        assert eval_beta(prof, -10) == 2.0  # default left extension

    def test_rejects_nonpositive(self):
        with pytest.raises(InvalidProfile):
            TableBeta(values=(1.0, 0.0))
        with pytest.raises(InvalidProfile):
            ConstantBeta(-1.0)


class TestJumpRates:
    def test_origin(self):
        lam, mu = jump_rates(ModelParams(), 0.0, 0.0, 0)
        assert lam == 1.0 and mu == 1.0

    def test_site_one(self):
        lam, mu = jump_rates(ModelParams(), 0.0, 0.0, 1)
        assert lam == pytest.approx(math.exp(-1), rel=1e-15)
        assert mu == pytest.approx(math.e, rel=1e-15)

    def test_site_one_shifted(self):
        lam, mu = jump_rates(ModelParams(), 2.0, 2.0, 1)
        assert lam == pytest.approx(math.e, rel=1e-15)
        assert mu == pytest.approx(math.exp(-1), rel=1e-15)

    def test_overflow(self):
        with pytest.raises(RateOverflow):
            jump_rates(ModelParams(), 0.0, 0.0, 10**6)

    @given(
        L=st.floats(-3, 3),
        M=st.floats(-3, 3),
        n=st.integers(-20, 20),
    )
    @settings(max_examples=50, deadline=None)
    def test_product_identity(self, L, M, n):
        # lambda_n * mu_{n+1} = beta(n)^2 e^{c(L-M+1)} exactly: the exponents
        # -c(n-L) and c(n+1-M) sum to c(L-M+1), independent of n
        params = ModelParams()
        lam_n, _ = jump_rates(params, L, M, n)
        _, mu_n1 = jump_rates(params, L, M, n + 1)
        assert lam_n * mu_n1 == pytest.approx(math.exp(L - M + 1), rel=1e-12)

    def test_monotone_in_L_and_minus_M(self):
        params = ModelParams()
        for n in (-3, 0, 4):
            lam0, mu0 = jump_rates(params, 0.0, 0.0, n)
            lam1, _ = jump_rates(params, 0.5, 0.0, n)
            _, mu1 = jump_rates(params, 0.0, -0.5, n)
            assert lam1 > lam0
            assert mu1 > mu0


class TestConditions:
    def test_beta_bounded_constant(self):
        holds, sup = check_beta_bounded(ConstantBeta(1.0), Window.symmetric(10))
        assert holds and sup == 1.0

    def test_beta_bounded_table(self):
        prof = TableBeta(values=(2.0, 3.0, 4.0), left=5.0, right=5.0)
        holds, sup = check_beta_bounded(prof, Window.symmetric(10))
        assert holds and sup == 5.0

    def test_beta_bounded_linear_drift_flags_growth(self):
        # profile peaks inside the window; sup is attained at the interior
        # maximum, not the edges
        prof = LinearDriftBeta(slope=1.0, c=1.0)
        holds, sup = check_beta_bounded(prof, Window.symmetric(50))
        assert holds
        assert sup == max(prof.value(n) for n in range(-50, 51))

    def test_contraction_constant_true(self):
        # 1/e - 1 = -0.632... < -0.5
        assert check_contraction(ConstantBeta(1.0), Window.symmetric(10), 0.5)

    def test_contraction_constant_false(self):
        assert not check_contraction(ConstantBeta(1.0), Window.symmetric(10), 0.7)

    def test_contraction_exponential_table_false(self):
        vals = tuple(math.exp(abs(n)) for n in range(-5, 6))
        prof = TableBeta(values=vals, n_min=-5)
        assert not check_contraction(prof, Window(-5, 11), 0.1)

    def test_contraction_closed_form_constant(self):
        # for constant(b): true iff b(1/e - 1) < -C
        w = Window.symmetric(8)
        for b in (0.5, 1.0, 2.0):
            for C in (0.1, 0.3, 0.632, 1.0):
                expected = b * (1 / math.e - 1) < -C
                assert check_contraction(ConstantBeta(b), w, C) == expected

    def test_largest_contraction_constant(self):
        C = largest_contraction_constant(ConstantBeta(1.0), Window.symmetric(10))
        assert C == pytest.approx(1 - 1 / math.e, rel=1e-12)


class TestRateBoundedness:
    def test_sup_at_origin(self):
        # lambda_n mu_{n+1} = e^{L-M+1} = e for all n at L = M = 0, so the
        # norm estimate 2 max sqrt(lambda_{n-1} mu_n) is 2 sqrt(e)
        sup, weights, est = rate_boundedness(
            ModelParams(), Window.symmetric(10), 0.0, 0.0
        )
        assert sup == pytest.approx(math.e, rel=1e-12)
        assert est == pytest.approx(2.0 * math.sqrt(math.e), rel=1e-12)
        assert np.isfinite(weights).all()

    def test_sup_with_gap(self):
        sup, _, _ = rate_boundedness(ModelParams(), Window.symmetric(10), 1.0, -1.0)
        assert sup == pytest.approx(math.exp(3.0), rel=1e-12)


class TestRateArrays:
    def test_truncation_zeroes_edges(self):
        w = Window.symmetric(5)
        lam, mu = rate_arrays(ModelParams(), 0.3, -0.2, w)
        assert lam[-1] == 0.0 and mu[0] == 0.0
        assert (lam[:-1] > 0).all() and (mu[1:] > 0).all()

    def test_untruncated_matches_pointwise(self):
        w = Window.symmetric(5)
        params = ModelParams()
        lam, mu = rate_arrays(params, 0.3, -0.2, w, truncated=False)
        for i, n in enumerate(w.sites()):
            ln, mn = jump_rates(params, 0.3, -0.2, int(n))
            assert lam[i] == pytest.approx(ln, rel=1e-14)
            assert mu[i] == pytest.approx(mn, rel=1e-14)
