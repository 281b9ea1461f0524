import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heraldsim.model import (
    DetectionProbabilities,
    PhysicalParams,
    conditional_feedback_probability,
    cumulative_excitation_probability,
    d_constant,
    detection_probabilities,
    g2_cross,
    g2_of_delay,
    herald_slot_weights,
    pair_number_distribution,
    retrieve_efficiency,
)

prob = st.floats(1e-6, 1.0)
chis = st.floats(1e-6, 0.99)


# -- PhysicalParams -----------------------------------------------------------

def test_defaults_are_valid():
    p = PhysicalParams()
    assert p.chi == 0.01 and p.tau_c == 12500.0 and p.bg_as == 0 and p.bg_s == 0


@pytest.mark.parametrize("field,value", [
    ("chi", -0.1), ("chi", 1.0), ("eta_as", 1.5), ("eta_s", -0.01),
    ("gamma0", 2.0), ("tau_c", 0.0), ("bg_as", -1e-3), ("bg_s", -1.0),
])
def test_invalid_params_name_the_field(field, value):
    with pytest.raises(ValueError, match=field):
        PhysicalParams(**{field: value})


def test_efficiency_factors_are_metadata_only():
    a = PhysicalParams(eta_as=0.07)
    b = PhysicalParams(eta_as=0.07, efficiency_factors={"eta_t": 0.5, "eta_c": 0.7, "eta_q": 0.5, "eta_m": 0.4})
    assert detection_probabilities(a, 0) == detection_probabilities(b, 0)


# -- pair number distribution --------------------------------------------------

def test_pair_distribution_vacuum():
    assert pair_number_distribution(0.0, 0) == 1.0
    assert all(pair_number_distribution(0.0, n) == 0.0 for n in range(1, 5))


def test_pair_distribution_single_pair_value():
    assert pair_number_distribution(PhysicalParams(chi=0.01), 1) == pytest.approx(9.9e-3, rel=1e-15)


@pytest.mark.parametrize("chi", [-0.01, 1.0, 1.5])
def test_pair_distribution_rejects_bad_chi(chi):
    with pytest.raises(ValueError):
        pair_number_distribution(chi, 0)


@given(chis)
def test_pair_distribution_normalized(chi):
    n_max = int(math.ceil(math.log(1e-15) / math.log(chi))) if chi > 0 else 1
    total = math.fsum(pair_number_distribution(chi, n) for n in range(n_max + 1))
    assert abs(total - 1.0) < 1e-12


# -- retrieve efficiency ----------------------------------------------------

def test_retrieve_efficiency_examples():
    assert retrieve_efficiency(0.3, 12500, 0) == 0.3
    assert retrieve_efficiency(0.3, 12500, 12500) == pytest.approx(0.3 * math.exp(-1))
    assert retrieve_efficiency(0.3, 12500, 12500) == pytest.approx(0.110364, abs=5e-7)
    assert retrieve_efficiency(0.3, 12500, 1e9) == 0.0


def test_retrieve_efficiency_rejects_negative_delay():
    with pytest.raises(ValueError):
        retrieve_efficiency(0.3, 12500, -1)


@given(prob, st.floats(1.0, 1e6), st.floats(0, 1e6), st.floats(0, 1e6))
def test_retrieve_efficiency_monotone(g0, tau, t1, t2):
    lo, hi = sorted((t1, t2))
    assert retrieve_efficiency(g0, tau, hi) <= retrieve_efficiency(g0, tau, lo)


# -- detection probabilities and g2 -----------------------------------------

def test_detection_probabilities_operating_point():
    # gamma(t) = 0.3 at t = 0 with gamma0 = 0.3
    p = PhysicalParams(chi=0.01, eta_as=0.07, eta_s=0.1, gamma0=0.3)
    d = detection_probabilities(p, 0)
    assert d.p_as == pytest.approx(7.0e-4, rel=1e-12)
    assert d.p_s == pytest.approx(3.0e-4, rel=1e-12)
    # 0.01*0.3*0.07*0.1 + 7e-4*3e-4
    assert d.p_as_s == pytest.approx(2.121e-5, rel=1e-12)


def test_pure_background_herald():
    d = detection_probabilities(PhysicalParams(chi=0.0, bg_as=0.002, eta_as=0.07), 0)
    assert d.p_as == pytest.approx(1.4e-4, rel=1e-12)


def test_unphysical_probability_rejected():
    with pytest.raises(ValueError):
        detection_probabilities(PhysicalParams(chi=0.5, bg_as=1.0, eta_as=1.0), 0)


@pytest.mark.parametrize("chi,expected", [(0.01, 101.0), (0.5, 3.0)])
def test_g2_ideal_examples(chi, expected):
    assert g2_cross(PhysicalParams(chi=chi), 0) == pytest.approx(expected, rel=1e-13)


def test_g2_zero_marginal():
    with pytest.raises(ZeroDivisionError):
        g2_cross(PhysicalParams(chi=0.0), 0)


@given(st.floats(1e-6, 0.5), prob, prob, prob, st.floats(0, 5e4))
def test_g2_ideal_law_independent_of_efficiencies(chi, eta_as, eta_s, gamma0, t):
    p = PhysicalParams(chi=chi, eta_as=eta_as, eta_s=eta_s, gamma0=gamma0)
    if retrieve_efficiency(gamma0, p.tau_c, t) < 1e-200:
        return
    assert g2_cross(p, t) == pytest.approx(1 + 1 / chi, rel=1e-12)


@given(chis, prob, prob, prob, st.floats(0, 0.1), st.floats(0, 0.1))
def test_joint_dominates_product(chi, eta_as, eta_s, gamma0, b, c):
    p = PhysicalParams(chi=chi, eta_as=eta_as, eta_s=eta_s, gamma0=gamma0, bg_as=b, bg_s=c)
    try:
        d = detection_probabilities(p, 1000)
    except ValueError:
        return
    assert d.p_as_s >= d.p_as * d.p_s
    assert isinstance(d, DetectionProbabilities)


def test_g2_of_delay_matches_g2_cross():
    p = PhysicalParams(chi=0.02, bg_as=1e-3, bg_s=2e-3, eta_as=0.07, eta_s=0.1, gamma0=0.3)
    for t in (0, 5000, 12500, 20000):
        gamma = retrieve_efficiency(p.gamma0, p.tau_c, t)
        assert g2_of_delay(p.chi, p.bg_as, d_constant(p), gamma) == pytest.approx(g2_cross(p, t), rel=1e-12)


def test_g2_of_delay_limits():
    assert g2_of_delay(0.01, 0.0, 0.0, lambda t: 0.3 * math.exp(-t), 2.0) == pytest.approx(101.0)
    assert g2_of_delay(0.01, 0.0, 0.0, 1e-9) == pytest.approx(101.0)
    assert g2_of_delay(0.01, 1e-3, 1e-3, 0.0) == 1.0
    with pytest.raises(ValueError):
        g2_of_delay(0.01, 0.0, -1e-3, 0.3)


@given(chis, st.floats(0, 0.1), st.floats(0, 0.1), st.floats(0, 4e4), st.floats(0, 4e4))
def test_g2_of_delay_monotone(chi, b, d, t1, t2):
    lo, hi = sorted((t1, t2))

    def g(t):
        return g2_of_delay(chi, b, d, lambda s: 0.3 * math.exp(-(s / 12500) ** 2), t)

    assert g(hi) <= g(lo) * (1 + 1e-12)


# -- cumulative excitation ---------------------------------------------------

def test_cumulative_examples():
    assert cumulative_excitation_probability(0.003, 1) == pytest.approx(0.003)
    # 300 us of 300 ns write periods; the explicit sum gives 0.950437
    loop = math.fsum(0.003 * 0.997 ** i for i in range(1000))
    assert cumulative_excitation_probability(0.003, 1000) == pytest.approx(loop, rel=1e-13)
    assert round(cumulative_excitation_probability(0.003, 1000), 3) == 0.950
    explicit = math.fsum(0.005 * 0.995 ** i for i in range(12))
    assert cumulative_excitation_probability(0.005, 12) == pytest.approx(explicit, rel=1e-13)
    assert cumulative_excitation_probability(0.005, 12) == pytest.approx(0.0584, abs=5e-5)


@settings(max_examples=50)
@given(st.floats(0, 1), st.integers(1, 10_000))
def test_cumulative_closed_form_vs_loop(p, n):
    total, surv = 0.0, 1.0
    for _ in range(n):
        total += p * surv
        surv *= 1 - p
    assert abs(cumulative_excitation_probability(p, n) - total) < 1e-12


@given(st.floats(1e-6, 0.05), st.integers(1, 500))
def test_cumulative_increasing_in_n(p, n):
    assert cumulative_excitation_probability(p, n + 1) > cumulative_excitation_probability(p, n)


# -- conditional feedback probability -------------------------------------

def test_feedback_average_single_slot():
    f = lambda t: t / 1e5  # noqa: E731
    assert conditional_feedback_probability(f, 0.003, 1, 12500, 1000) == f(12500)


@given(st.floats(0, 1), st.floats(1e-6, 1), st.integers(1, 40))
def test_feedback_average_of_constant(c, p, n):
    assert conditional_feedback_probability(lambda t: c, p, n, 50_000, 1000) == pytest.approx(c, rel=1e-12, abs=1e-15)


def test_feedback_average_brute_force_twelve_slots():
    gamma = lambda t: 0.3 * math.exp(-(t / 12500) ** 2)  # noqa: E731
    num = den = 0.0
    for i in range(12):
        w = 0.003 * (1 - 0.003) ** i
        num += w * gamma(12500 - i * 1000)
        den += w
    expected = num / den
    got = conditional_feedback_probability(gamma, 0.003, 12, 12500, 1000)
    assert got == pytest.approx(expected, rel=1e-13)
    # frozen from the explicit sum above
    assert got == pytest.approx(0.212266, abs=5e-6)


def test_feedback_average_rejects_zero_p_and_bad_window():
    with pytest.raises(ValueError):
        conditional_feedback_probability(lambda t: 0.1, 0.0, 12, 12500, 1000)
    with pytest.raises(ValueError):
        conditional_feedback_probability(lambda t: 0.1, 0.003, 12, 10000, 1000)


@given(st.floats(1e-4, 0.5), st.integers(1, 20), st.floats(0.1, 100))
def test_slot_weights_scale_invariance(p, n, k):
    w = herald_slot_weights(p, n)
    t = 30_000 - np.arange(n) * 1000.0
    f = 0.3 * np.exp(-(t / 12500) ** 2)
    assert np.sum(w * f) / np.sum(w) == pytest.approx(np.sum(k * w * f) / np.sum(k * w), rel=1e-12)
