"""Guarantee calculators: quantiles, size requirements, parity bound, juries."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairvote import (
    JuryInstance,
    jury_distribution,
    min_observed_recall,
    norm_ppf,
    parity_bound,
    verify_jury_competence,
)
from fairvote.errors import EmptyGroups, InvalidAlpha, InvalidRate

from .oracles import naive_jury_pmf


def normal_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


# -- inverse normal -----------------------------------------------------------------

def test_quantile_reference_values():
    assert norm_ppf(0.5) == 0.0
    assert norm_ppf(0.95) == pytest.approx(1.6448536269514722, abs=1e-8)
    assert norm_ppf(0.975) == pytest.approx(1.959963984540054, abs=1e-8)
    assert norm_ppf(0.841344746068543) == pytest.approx(1.0, abs=1e-8)


def test_quantile_symmetry():
    for p in (0.01, 0.2, 0.4, 0.77, 0.999):
        assert norm_ppf(p) == pytest.approx(-norm_ppf(1.0 - p), abs=1e-12)


def test_quantile_inverts_the_cdf_everywhere():
    # includes points inside the tail branches of the approximation
    for p in np.concatenate([
        np.linspace(1e-6, 0.02, 23),
        np.linspace(0.05, 0.95, 41),
        np.linspace(0.98, 1.0 - 1e-6, 23),
    ]):
        assert normal_cdf(norm_ppf(float(p))) == pytest.approx(
            float(p), abs=2e-9)


def test_quantile_domain_guard():
    for p in (0.0, 1.0, -0.2, 1.3):
        with pytest.raises(InvalidRate):
            norm_ppf(p)


# -- minimum observed recall ------------------------------------------------------------

def test_zero_z_score_returns_the_base_rate():
    req = min_observed_recall(50, 70, alpha=0.5, base_rate=0.37)
    assert req.p_min == 0.37
    assert req.z == 0.0


def test_reference_value_balanced_hundreds():
    req = min_observed_recall(100, 100, 0.05, 0.5)
    assert req.p_min == pytest.approx(0.6163, abs=0.0005)
    assert req.large_counts


def test_small_minority_splits_stay_under_seventy_percent():
    req = min_observed_recall(39, 39, 0.05, 0.5)
    assert 0.68 <= req.p_min <= 0.69
    assert req.p_min < 0.70
    assert req.large_counts


def test_p_min_strictly_decreasing_and_symmetric():
    base = min_observed_recall(100, 100, 0.05).p_min
    assert min_observed_recall(200, 100, 0.05).p_min < base
    assert min_observed_recall(100, 200, 0.05).p_min < base
    assert min_observed_recall(100, 200, 0.05).p_min == \
        min_observed_recall(200, 100, 0.05).p_min


def test_p_min_approaches_the_base_rate():
    req = min_observed_recall(10 ** 8, 10 ** 8, 0.05, 0.5)
    assert abs(req.p_min - 0.5) < 1e-3


def test_large_counts_flag():
    assert min_observed_recall(20, 20, 0.05, 0.5).large_counts
    assert not min_observed_recall(19, 20, 0.05, 0.5).large_counts
    assert not min_observed_recall(100, 100, 0.05, 0.05).large_counts


def test_size_requirement_guards():
    with pytest.raises(InvalidAlpha):
        min_observed_recall(10, 10, 0.0)
    with pytest.raises(InvalidAlpha):
        min_observed_recall(10, 10, 1.0)
    with pytest.raises(InvalidRate):
        min_observed_recall(10, 10, 0.05, base_rate=0.0)
    with pytest.raises(ValueError):
        min_observed_recall(0, 10, 0.05)


def test_size_requirement_text_block():
    text = min_observed_recall(10, 10, 0.05).to_text()
    for key in ("m=", "n=", "alpha=", "base_rate=", "p_min=", "large_counts="):
        assert key in text


# -- parity bound --------------------------------------------------------------------

def test_parity_bound_zero_losses():
    b = parity_bound(0.12, {"a": 0.0, "b": 0.0}, 2.0)
    assert b.bound == 0.12
    assert b.uplift == 0.0 and b.credit == 0.0


def test_parity_bound_hand_value():
    b = parity_bound(0.05, {"a": 0.2, "b": 0.1}, 1.5)
    assert b.uplift == pytest.approx(0.30, abs=1e-12)
    assert b.credit == pytest.approx(0.05, abs=1e-12)
    assert b.bound == pytest.approx(0.30, abs=1e-12)


def test_parity_bound_low_der_branch():
    b = parity_bound(0.1, {"a": 0.3, "b": 0.2}, 0.8)
    assert b.credit == 0.0
    assert b.bound == pytest.approx(0.1 + 0.3 * 0.8, abs=1e-12)


def test_parity_bound_accepts_sequences():
    b = parity_bound(0.0, [0.2, 0.1], 1.0)
    assert b.group_losses == {"0": 0.2, "1": 0.1}
    assert b.credit == 0.0


def test_parity_bound_guards():
    with pytest.raises(EmptyGroups):
        parity_bound(0.1, {}, 1.0)
    with pytest.raises(EmptyGroups):
        parity_bound(0.1, [], 1.0)
    with pytest.raises(InvalidRate):
        parity_bound(1.2, {"a": 0.1}, 1.0)
    with pytest.raises(InvalidRate):
        parity_bound(0.1, {"a": -0.1}, 1.0)
    with pytest.raises(InvalidRate):
        parity_bound(0.1, {"a": 0.1}, -1.0)


@settings(max_examples=80, deadline=None)
@given(
    st.floats(0.0, 1.0),
    st.lists(st.floats(0.0, 1.0), min_size=1, max_size=5),
    st.floats(1.0, 5.0),
)
def test_parity_bound_never_below_baseline_when_der_at_least_one(k, losses, der):
    assert parity_bound(k, losses, der).bound >= k - 1e-12


# -- jury distribution ---------------------------------------------------------------

def test_three_member_binomial_distribution():
    pmf = jury_distribution([0.6, 0.6, 0.6])
    assert pmf == pytest.approx([0.064, 0.288, 0.432, 0.216], abs=1e-12)
    assert pmf.sum() == pytest.approx(1.0, abs=1e-12)


def test_certain_members_are_a_point_mass():
    pmf = jury_distribution([1.0] * 5)
    assert pmf[-1] == 1.0
    assert pmf[:-1] == pytest.approx([0.0] * 5, abs=0.0)


def test_heterogeneous_two_member_product():
    pmf = jury_distribution([0.5, 1.0])
    assert pmf == pytest.approx([0.0, 0.5, 0.5], abs=1e-15)


def test_distribution_matches_exhaustive_enumeration():
    rng = np.random.default_rng(40)
    for n in range(1, 9):
        probs = rng.random(n)
        pmf = jury_distribution(probs)
        naive = naive_jury_pmf(list(probs))
        assert pmf == pytest.approx(naive, abs=1e-12)


def test_jury_instance_guards():
    with pytest.raises(ValueError):
        JuryInstance(probs=())
    with pytest.raises(InvalidRate):
        JuryInstance(probs=(0.5, 1.2))


# -- jury competence ------------------------------------------------------------------

def test_better_than_chance_trio_is_competent():
    report = verify_jury_competence([0.6, 0.6, 0.6])
    assert report.competent
    assert report.worst_t == pytest.approx(1 / 3)
    assert report.margin == pytest.approx(0.432 - 0.288, abs=1e-12)
    assert report.majority_accuracy == pytest.approx(0.648, abs=1e-12)
    assert report.majority_beats_mean is True


def test_worse_than_chance_trio_is_not_competent():
    report = verify_jury_competence([0.4, 0.4, 0.4])
    assert not report.competent
    assert report.margin < 0


def test_coin_flip_jury_is_competent_with_zero_margin():
    report = verify_jury_competence([0.5] * 5)
    assert report.competent
    assert report.margin == 0.0
    assert report.exact_check_used


def test_even_juries_leave_the_classical_comparison_undecided():
    report = verify_jury_competence([0.8, 0.8])
    assert report.majority_beats_mean is None
    report = verify_jury_competence([0.8, 0.8, 0.8])
    assert report.majority_beats_mean is True


def test_majority_accuracy_monotone_in_odd_ensemble_size():
    for p in (0.55, 0.7, 0.9):
        last = 0.0
        for n in range(1, 16, 2):
            acc = verify_jury_competence([p] * n).majority_accuracy
            assert acc >= last - 1e-12
            last = acc


def test_pointwise_competence_implies_interval_form():
    """Summing the pointwise inequalities gives the interval comparison
    C(t) >= 0 at every attainable t for odd juries above chance."""
    rng = np.random.default_rng(9)
    for _ in range(25):
        n = int(rng.choice([3, 5, 7, 9, 11]))
        probs = 0.5 + 0.5 * rng.random(n)
        report = verify_jury_competence(probs)
        assert report.competent
        pmf = jury_distribution(probs)  # index = correct votes
        w_pmf = pmf[::-1]  # index = wrong votes
        for s in range((n + 1) // 2):
            lower = w_pmf[s:(n + 1) // 2].sum()
            upper = w_pmf[(n + 1) // 2: n - s + 1].sum()
            assert lower - upper >= -1e-12


@settings(max_examples=120, deadline=None)
@given(st.lists(st.floats(0.5, 1.0), min_size=1, max_size=15))
def test_juries_at_or_above_chance_are_always_competent(probs):
    assert verify_jury_competence(probs).competent
