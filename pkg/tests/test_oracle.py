import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heraldsim.model import PhysicalParams, detection_probabilities
from heraldsim.oracle import (
    PATTERNS,
    TruncationError,
    alpha_grid,
    conditional_pair_distribution,
    exact_alpha,
    exact_click_distribution,
    feedback_alpha,
    herald_probability,
)
from heraldsim.protocol import ProtocolConfig

from reference import brute_alpha, brute_force_patterns, gamma

OPERATING_POINT = PhysicalParams(chi=0.01, eta_as=0.07, eta_s=0.1, gamma0=0.3)

params_st = st.builds(
    PhysicalParams,
    chi=st.floats(0.0, 0.3),
    eta_as=st.floats(0.01, 1.0),
    eta_s=st.floats(0.01, 1.0),
    gamma0=st.floats(0.01, 1.0),
    tau_c=st.floats(1e3, 1e5),
    bg_as=st.floats(0.0, 0.05),
    bg_s=st.floats(0.0, 0.05),
)


def test_vacuum_has_no_clicks():
    d = exact_click_distribution(PhysicalParams(chi=0.0), 0)
    assert d.probs[(False, False, False)] == 1.0
    assert d.total == 1.0


def test_herald_marginal_close_to_first_order():
    d = exact_click_distribution(OPERATING_POINT, 0, n_max=8)
    assert abs(d.marginal(1) - 7.0e-4) < 1.4e-5


@settings(max_examples=60, deadline=None)
@given(params_st, st.floats(0, 3e4))
def test_matches_brute_force_enumeration(p, t):
    q = gamma(p.gamma0, p.tau_c, t) * p.eta_s
    ref = brute_force_patterns(p.chi, p.eta_as, min(p.bg_as * p.eta_as, 1), q, min(p.bg_s * p.eta_s, 1), n_max=40)
    d = exact_click_distribution(p, t)
    for pat in PATTERNS:
        assert d.probs[pat] == pytest.approx(ref.get(pat, 0.0), rel=1e-9, abs=d.truncation_bound + 1e-15)


@settings(max_examples=60, deadline=None)
@given(params_st, st.floats(0, 3e4))
def test_distribution_invariants(p, t):
    d = exact_click_distribution(p, t)
    assert all(v >= 0 for v in d.probs.values())
    assert d.total <= 1 + 1e-12
    assert d.total + d.truncation_bound >= 1 - 1e-12
    if p.chi > 0:
        assert d.truncation_bound <= p.chi ** (d.n_max + 1) / (1 - p.chi) * (1 + 1e-12)


@pytest.mark.parametrize("chi", [0.01, 0.1])
def test_raising_n_max_agrees_within_bound(chi):
    p = OPERATING_POINT.replace(chi=chi)
    a = exact_click_distribution(p, 0, n_max=4, tol=None)
    b = exact_click_distribution(p, 0, n_max=6, tol=None)
    assert b.total >= a.total
    assert np.all(np.abs(a.as_array() - b.as_array()) <= a.truncation_bound)


def test_escalation_and_limit():
    assert exact_click_distribution(OPERATING_POINT.replace(chi=0.1), 0).n_max >= 11
    with pytest.raises(ValueError):
        exact_click_distribution(OPERATING_POINT, 0, n_max=1)
    with pytest.raises(TruncationError):
        exact_click_distribution(OPERATING_POINT.replace(chi=0.9999999), 0, tol=1e-300)


def test_marginals_converge_to_first_order():
    rel = []
    for chi in (1e-2, 1e-3, 1e-4):
        p = OPERATING_POINT.replace(chi=chi, bg_as=1e-3, bg_s=1e-3)
        d = exact_click_distribution(p, 5000)
        m = detection_probabilities(p, 5000)
        rel.append(abs(d.marginal(1) - m.p_as) / m.p_as)
    assert rel[0] > rel[1] > rel[2]
    assert rel[2] < 1e-3


def test_alpha_forced_single_pair_is_zero():
    assert exact_alpha(OPERATING_POINT, 0, pair_probs=[0.0, 1.0, 0.0]) == 0.0


def test_alpha_coherent_benchmark_is_one():
    # with a herald that always fires, a Poissonian read side gives independent D2, D3 clicks
    from math import exp, factorial

    mu = 0.7
    poisson = [exp(-mu) * mu ** n / factorial(n) for n in range(60)]
    p = PhysicalParams(chi=0.0, eta_as=0.5, eta_s=0.8, gamma0=0.9, bg_as=2.0)
    assert exact_alpha(p, 0, pair_probs=poisson) == pytest.approx(1.0, rel=1e-9)


def test_alpha_regression_at_one_percent():
    # frozen from tests/reference.py enumeration to 40 pairs
    assert exact_alpha(OPERATING_POINT, 0) == pytest.approx(0.038046237658517, rel=1e-9)
    ref = brute_alpha(brute_force_patterns(0.01, 0.07, 0.0, 0.03, 0.0, n_max=40))
    assert exact_alpha(OPERATING_POINT, 0) == pytest.approx(ref, rel=1e-10)


def test_alpha_slope_four_in_chi():
    chis = [1e-4, 3e-4, 1e-3]
    alphas = [exact_alpha(OPERATING_POINT.replace(chi=c), 0) for c in chis]
    slopes = [a / c for a, c in zip(alphas, chis)]
    assert all(3.6 < s < 4.0 for s in slopes)
    assert alphas[0] < alphas[1] < alphas[2]


def test_zero_herald_rejected():
    with pytest.raises(ZeroDivisionError):
        exact_alpha(PhysicalParams(chi=0.0), 0)


def test_herald_probability_closed_form():
    # thermal state: P(no click) = (1 - b)(1 - chi) / (1 - chi (1 - eta))
    p = OPERATING_POINT.replace(chi=0.05, bg_as=0.01)
    b = 0.01 * 0.07
    expected = 1 - (1 - b) * 0.95 / (1 - 0.05 * 0.93)
    assert herald_probability(p) == pytest.approx(expected, rel=1e-12)


def test_conditional_pair_distribution_sums_and_shifts():
    c = conditional_pair_distribution(OPERATING_POINT.replace(chi=0.1))
    assert c.sum() == pytest.approx(1.0)
    assert c[0] == 0.0
    assert c[2] / c[1] > 0.1  # multi-pair enhancement from threshold heralding


def test_alpha_grid_matches_pointwise():
    p = OPERATING_POINT.replace(bg_s=1e-3)
    chis = [0.005, 0.02]
    delays = [1000.0, 8000.0]
    eye = np.eye(2)
    grid = alpha_grid(p, chis, delays, slot_weights=eye)
    for k in range(2):
        assert grid[k] == pytest.approx(exact_alpha(p.replace(chi=chis[k]), delays[k]), rel=1e-10)


def test_feedback_alpha_single_slot_equals_exact():
    p = OPERATING_POINT.replace(bg_s=1e-3)
    proto = ProtocolConfig(mode="fixed_delay", n_pulses=12, delta_t=3000)
    assert feedback_alpha(p, proto) == pytest.approx(exact_alpha(p, 3000), rel=1e-12)
    one = ProtocolConfig(mode="fixed_retrieval_time", n_pulses=1, delta_T=12500)
    assert feedback_alpha(p, one) == pytest.approx(exact_alpha(p, 12500), rel=1e-12)


def test_feedback_alpha_brute_force_train():
    p = OPERATING_POINT.replace(eta_s=0.5, bg_s=2e-3)
    proto = ProtocolConfig(mode="fixed_retrieval_time", n_pulses=12, dt_w=1000, delta_T=12500)
    ph = herald_probability(p)
    num = np.zeros(3)
    den = 0.0
    for i in range(12):
        t = 12500 - 1000 * i
        ref = brute_force_patterns(p.chi, p.eta_as, 0.0, gamma(0.3, 12500, t) * 0.5, 2e-3 * 0.5, n_max=40)
        h = sum(v for k, v in ref.items() if k[0])
        cond = np.array([
            sum(v for k, v in ref.items() if k[0] and k[1]),
            sum(v for k, v in ref.items() if k[0] and k[2]),
            ref[(True, True, True)],
        ]) / h
        w = ph * (1 - ph) ** i
        num += w * cond
        den += w
    p2, p3, p23 = num / den
    assert feedback_alpha(p, proto) == pytest.approx(p23 / (p2 * p3), rel=1e-9)
