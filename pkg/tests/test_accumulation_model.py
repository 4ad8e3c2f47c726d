import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from dppdesign.accumulation_model import (
    ETA,
    H_STAR,
    THETA,
    AccumulationModel,
    RejectionRateError,
    accumulation_convergence_check,
    design_gain,
    discrepancy_sequence,
    draw_estimates,
    estimate_expected_change,
    information_at,
    max_d_continuous,
    min_time_closed_form,
    optimal_information,
)
from dppdesign.cloglog_model import d_criterion, optimal_criterion

PROPS = settings(max_examples=200, deadline=None)
MODEL = AccumulationModel()
positive_d = st.floats(1e-6, 1e6)


def test_defaults():
    assert (MODEL.h_star, MODEL.eta, MODEL.theta) == (H_STAR, ETA, THETA) == (0.80940268, 1.88938, -1.51330)


def test_model_validation():
    with pytest.raises(ValueError):
        AccumulationModel(h_star=0)
    with pytest.raises(ValueError):
        AccumulationModel(theta=0.5)
    with pytest.raises(ValueError):
        MODEL.h(0.0)
    with pytest.raises(ValueError):
        MODEL.h(np.array([1.0, -1.0]))


def test_h_examples():
    assert MODEL.h(1e12) == pytest.approx(H_STAR, abs=1e-6)
    assert MODEL.h(1.0) == pytest.approx(0.80940268 / (1 + math.exp(1.88938)), abs=1e-12)
    h0 = MODEL.h(0.1408)
    assert 0 < h0 < MODEL.h(1.0)


def test_h_vectorised():
    d = np.array([0.5, 1.0, 2.0])
    assert np.array_equal(MODEL.h(d), [MODEL.h(v) for v in d])


@PROPS
@given(positive_d, positive_d)
def test_h_increasing_and_bounded(d1, d2):
    lo, hi = sorted((d1, d2))
    assert 0 < MODEL.h(lo) < H_STAR
    if hi > lo * (1 + 1e-9):
        assert MODEL.h(hi) > MODEL.h(lo)


# -- J(D) and Monte-Carlo gain --------------------------------------------------

def test_information_at_has_requested_criterion():
    for D in (0.1, 1.0, 37.0):
        assert d_criterion(information_at(D)) == pytest.approx(D, rel=1e-12)
    assert d_criterion(optimal_information()) == pytest.approx(H_STAR, abs=1e-7)


def test_gain_at_truth_is_optimal_criterion():
    assert design_gain(1.0, 0.0) == pytest.approx(H_STAR, abs=1e-7)


def test_expected_change_large_d_concentrates():
    est = estimate_expected_change(1e9, 10_000, seed=3)
    # h* carries 8 significant digits
    assert abs(est.mean - H_STAR) < 1e-7
    assert est.mean <= optimal_criterion()
    assert est.n_rejected == 0


@pytest.mark.xfail(
    strict=True,
    reason="the gain is maximal at the truth, so its mean sits O(1/D) below the optimum while the "
    "standard error is O(1/(D sqrt(n))); h* is also rounded 3e-8 away from the computed optimum",
)
def test_expected_change_large_d_within_three_standard_errors():
    est = estimate_expected_change(1e9, 10_000, seed=3)
    assert abs(est.mean - H_STAR) < 3 * est.stderr


def test_expected_change_single_draw():
    D, seed = 2.0, 5
    est = estimate_expected_change(D, 1, seed)
    a, b, _ = draw_estimates(D, 1, np.random.default_rng(seed))
    assert est.mean == pytest.approx(float(design_gain(a[0], b[0])), rel=1e-15)


def test_expected_change_is_deterministic():
    assert estimate_expected_change(3.0, 500, 9) == estimate_expected_change(3.0, 500, 9)


def test_draws_reject_nonpositive_slopes():
    a, b, rejected = draw_estimates(0.5, 5000, np.random.default_rng(1))
    assert a.size == b.size == 5000
    assert np.all(a > 0)
    assert rejected > 0


def test_rejection_rate_error_when_d_is_tiny():
    with pytest.raises(RejectionRateError):
        draw_estimates(1e-4, 1000, np.random.default_rng(0))


def test_draw_validation():
    with pytest.raises(ValueError):
        draw_estimates(0.0, 10, np.random.default_rng(0))
    with pytest.raises(ValueError):
        draw_estimates(1.0, 0, np.random.default_rng(0))


@pytest.mark.xfail(
    strict=True,
    reason="sampling N((1,0), J(D)^-1) with J(D)=(D/h*)J* gives a mean gain near 0.42 at D=1, "
    "four times the fitted h(1); the logistic curve cannot be recovered from this recipe",
)
def test_expected_change_near_fitted_h_at_one():
    est = estimate_expected_change(1.0, 200_000, seed=2024)
    assert est.mean == pytest.approx(MODEL.h(1.0), rel=0.15)


# -- continuous-time references -------------------------------------------------

def test_min_time_closed_form_examples():
    assert min_time_closed_form(MODEL, 2.0, 2.0) == 0.0
    ref, _ = quad(lambda s: 1.0 / MODEL.h(s), 0.5, 5.0, epsabs=0, epsrel=1e-12)
    assert min_time_closed_form(MODEL, 0.5, 5.0) == pytest.approx(ref, rel=1e-8)
    with pytest.raises(ValueError):
        min_time_closed_form(MODEL, 3.0, 2.0)
    with pytest.raises(ValueError):
        min_time_closed_form(MODEL, 0.0, 2.0)


@PROPS
@given(st.floats(0.01, 100), st.floats(1.0, 10.0), st.floats(1.0, 10.0))
def test_min_time_additive_and_decreasing(D, r1, r2):
    mid, end = D * r1, D * r1 * r2
    whole = min_time_closed_form(MODEL, D, end)
    parts = min_time_closed_form(MODEL, D, mid) + min_time_closed_form(MODEL, mid, end)
    assert whole == pytest.approx(parts, rel=1e-9, abs=1e-12)
    if r1 > 1 + 1e-6:
        assert min_time_closed_form(MODEL, mid, end) < min_time_closed_form(MODEL, D, end)


def test_max_d_continuous_examples():
    assert max_d_continuous(MODEL, 0.5, 1000, 1000) == 0.0
    gain = max_d_continuous(MODEL, 0.5, 0, 1000)
    assert gain <= H_STAR * 1000
    assert min_time_closed_form(MODEL, 0.5, 0.5 + gain) == pytest.approx(1000, rel=1e-6)


def test_max_d_continuous_validation():
    with pytest.raises(ValueError):
        max_d_continuous(MODEL, 0.5, 10, 5)
    with pytest.raises(ValueError):
        max_d_continuous(MODEL, 0.0, 0, 5)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 50), st.integers(0, 200), st.integers(1, 200), st.integers(1, 200))
def test_max_d_continuous_monotone_and_semigroup(D, t, span, extra):
    T = t + span
    g = max_d_continuous(MODEL, D, t, T)
    assert 0 <= g <= H_STAR * span + 1e-9
    assert max_d_continuous(MODEL, D, min(t + 1, T), T) <= g + 1e-9
    g_long = max_d_continuous(MODEL, D, t, T + extra)
    assert g_long >= g
    chained = g + max_d_continuous(MODEL, D + g, T, T + extra)
    assert chained == pytest.approx(g_long, rel=1e-6)


# -- accumulation of the criterion ---------------------------------------------------

def test_discrepancy_zero_for_identical_rounds():
    J = optimal_information()
    seq = discrepancy_sequence([J] * 30)
    assert seq.shape == (29,)
    assert np.max(seq) < 1e-12


def test_discrepancy_single_entry():
    J1 = information_at(1.0)
    J2 = information_at(2.0).scaled(1.0)
    seq = discrepancy_sequence([J1, J2])
    assert seq.shape == (1,) and seq[0] >= 0
    with pytest.raises(ValueError):
        discrepancy_sequence([J1])


def test_convergence_check_shape_and_trend():
    seq = accumulation_convergence_check(60, d_start=1.0, n_reps=20, seed=4)
    assert seq.shape == (59,)
    assert np.all(seq >= 0)
    assert seq[-6:].mean() < seq[:6].mean()


def test_convergence_check_is_seeded():
    a = accumulation_convergence_check(10, 1.0, 3, seed=1)
    b = accumulation_convergence_check(10, 1.0, 3, seed=1)
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        accumulation_convergence_check(1, 1.0, 3, seed=1)
