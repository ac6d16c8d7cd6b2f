"""Guarantee calculators for majority-vote ensembles.

This module answers three questions about a planned or fitted ensemble:

* how large must the evaluation sets be before an observed recall is
  trustworthy (``min_observed_recall``),
* how far can enforcing groupwise recall parity move overall error
  (``parity_bound``),
* is a jury of independent members guaranteed competent, i.e. does adding
  votes help rather than hurt (``jury_distribution`` and
  ``verify_jury_competence``).

Competence is checked in its pointwise form: with wrong-vote count w out of
N members, P(w = s) >= P(w = N - s) for every integer s < N/2. For odd N the
interval form C(t) = P(W in [t, 1/2)) - P(W in [1/2, 1-t]) >= 0 follows by
summing these pairwise inequalities. For even N the tie mass P(w = N/2) has
no partner and the interval form can fail even when every member is better
than chance (two members with p = 0.75 already give C(0) < 0), so the
pointwise form is what is certified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyGroups, InvalidAlpha, InvalidRate

# Rational approximation of the standard normal quantile, P. J. Acklam's
# coefficients. Absolute error < 1.15e-9 over (0, 1), far inside the 1e-6
# the calculators require, with no statistical-library dependency.
_PPF_A = (-3.969683028665376e+01, 2.209460984245205e+02,
          -2.759285104469687e+02, 1.383577518672690e+02,
          -3.066479806614716e+01, 2.506628277459239e+00)
_PPF_B = (-5.447609879822406e+01, 1.615858368580409e+02,
          -1.556989798598866e+02, 6.680131188771972e+01,
          -1.328068155288572e+01)
_PPF_C = (-7.784894002430293e-03, -3.223964580411365e-01,
          -2.400758277161838e+00, -2.549732539343734e+00,
          4.374664141464968e+00, 2.938163982698783e+00)
_PPF_D = (7.784695709041462e-03, 3.224671290700398e-01,
          2.445134137142996e+00, 3.754408661907416e+00)
_PPF_P_LOW = 0.02425


def norm_ppf(p: float) -> float:
    """Standard normal quantile via Acklam's rational approximation.

    Accurate to 1.15e-9 absolute everywhere on (0, 1).
    """
    if not 0.0 < p < 1.0:
        raise InvalidRate(f"quantile argument must be in (0, 1), got {p}")
    a, b, c, d = _PPF_A, _PPF_B, _PPF_C, _PPF_D
    if p < _PPF_P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return ((((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q
                 + c[5])
                / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0))
    if p > 1.0 - _PPF_P_LOW:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        return -((((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q
                  + c[5])
                 / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0))
    q = p - 0.5
    r = q * q
    return ((((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r
             + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r
               + 1.0))


@dataclass(frozen=True)
class SizeRequirement:
    """Minimum observed recall needed to certify better-than-chance members.

    A member whose true recall equals the chance rate ``base_rate`` would
    show an observed validation-vs-test recall difference with standard
    error sqrt(k(1-k)(1/m + 1/n)); ``p_min`` is the one-sided upper
    confidence limit at level ``alpha`` for that null. Observed recall above
    ``p_min`` on both splits rejects the at-chance null. ``large_counts``
    records whether the normal approximation is defensible, i.e. every
    expected success/failure count m*k, m*(1-k), n*k, n*(1-k) is >= 10.
    """

    m: int
    n: int
    alpha: float
    base_rate: float
    z: float
    p_min: float
    large_counts: bool

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "alpha": self.alpha,
            "base_rate": self.base_rate,
            "z": self.z,
            "p_min": self.p_min,
            "large_counts": self.large_counts,
        }

    def to_text(self) -> str:
        lines = [f"{key}={value!r}" for key, value in self.to_dict().items()]
        return "\n".join(lines) + "\n"


def min_observed_recall(
    m: int, n: int, alpha: float, base_rate: float = 0.5
) -> SizeRequirement:
    """Recall threshold separating real skill from sampling noise.

    ``m`` and ``n`` are the positive-sample counts of the two evaluation
    splits (e.g. one member's validation fold and the test set), ``alpha``
    the one-sided significance level, ``base_rate`` the chance recall k.

        p_min = k + z_{1-alpha} * sqrt(k * (1 - k) * (1/m + 1/n))

    For k = 1/2 this is 0.5 + z_{1-alpha}/2 * sqrt(1/m + 1/n).
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidAlpha(f"alpha must be in (0, 1), got {alpha}")
    if not 0.0 < base_rate < 1.0:
        raise InvalidRate(f"base_rate must be in (0, 1), got {base_rate}")
    if m < 1 or n < 1:
        raise ValueError("sample counts m and n must be at least 1")
    z = norm_ppf(1.0 - alpha)
    se = math.sqrt(base_rate * (1.0 - base_rate) * (1.0 / m + 1.0 / n))
    k = base_rate
    large = min(m * k, m * (1.0 - k), n * k, n * (1.0 - k)) >= 10.0
    return SizeRequirement(
        m=m, n=n, alpha=alpha, base_rate=base_rate, z=z,
        p_min=k + z * se, large_counts=large,
    )


@dataclass(frozen=True)
class ParityBound:
    """Worst-case error of a recall-parity-constrained ensemble.

    ``bound`` caps the constrained ensemble's error at

        k* = k + max_g E[L_g] * DER_g* - max(0, min_g E[L_g] * (DER_g* - 1))

    where k is the unconstrained ensemble's error, E[L_g] the mean member
    loss on group g, and DER_g* the disagreement-error ratio of the group
    the constraint binds on.
    """

    k: float
    group_losses: Mapping[str, float]
    der_gstar: float
    uplift: float
    credit: float
    bound: float

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "group_losses": dict(self.group_losses),
            "der_gstar": self.der_gstar,
            "uplift": self.uplift,
            "credit": self.credit,
            "bound": self.bound,
        }


def parity_bound(
    k: float,
    group_losses: Mapping[str, float] | Sequence[float],
    der_gstar: float,
) -> ParityBound:
    """Bound the error cost of enforcing groupwise recall parity.

    The binding group g* is chosen by the caller (typically the group whose
    recall constraint is active); only its disagreement-error ratio enters.
    """
    if not 0.0 <= k <= 1.0:
        raise InvalidRate(f"baseline error k must be in [0, 1], got {k}")
    if der_gstar < 0.0:
        raise InvalidRate(f"DER must be non-negative, got {der_gstar}")
    if isinstance(group_losses, Mapping):
        losses = dict(group_losses)
    else:
        losses = {str(i): float(v) for i, v in enumerate(group_losses)}
    if not losses:
        raise EmptyGroups("group_losses must not be empty")
    if any(v < 0.0 for v in losses.values()):
        raise InvalidRate("group losses must be non-negative")
    uplift = max(losses.values()) * der_gstar
    credit = max(0.0, min(losses.values()) * (der_gstar - 1.0))
    return ParityBound(
        k=k, group_losses=losses, der_gstar=der_gstar,
        uplift=uplift, credit=credit, bound=k + uplift - credit,
    )


@dataclass(frozen=True)
class JuryInstance:
    """An independent jury: one correctness probability per member."""

    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.probs) < 1:
            raise ValueError("a jury needs at least one member")
        if any(not 0.0 <= p <= 1.0 for p in self.probs):
            raise InvalidRate("jury probabilities must lie in [0, 1]")

    @property
    def n_members(self) -> int:
        return len(self.probs)


def _coerce_instance(instance) -> JuryInstance:
    if isinstance(instance, JuryInstance):
        return instance
    return JuryInstance(probs=tuple(float(p) for p in instance))


def jury_distribution(instance) -> np.ndarray:
    """Exact distribution of the number of correct votes.

    Members vote independently, member i being correct with probability
    p_i. Returns the Poisson-binomial pmf over {0, ..., N} correct votes,
    computed by the O(N^2) convolution recurrence: fold members in one at a
    time, splitting each partial pmf into a correct branch (shift by one,
    weight p_i) and an incorrect branch (weight 1 - p_i).
    """
    inst = _coerce_instance(instance)
    pmf = np.zeros(inst.n_members + 1)
    pmf[0] = 1.0
    for i, p in enumerate(inst.probs):
        prev = pmf[: i + 1].copy()
        pmf[: i + 1] = prev * (1.0 - p)
        pmf[1: i + 2] += prev * p
    return pmf


def _jury_pmf_exact(probs: Sequence[float]) -> list[Fraction]:
    """Poisson-binomial pmf in exact rational arithmetic."""
    pmf = [Fraction(1)]
    for p in probs:
        fp = Fraction(p)
        fq = 1 - fp
        nxt = [x * fq for x in pmf] + [Fraction(0)]
        for j, x in enumerate(pmf):
            nxt[j + 1] += x * fp
        pmf = nxt
    return pmf


@dataclass(frozen=True)
class JuryReport:
    """Outcome of the jury competence check.

    ``competent`` certifies the pointwise property P(w = s) >= P(w = N - s)
    for all integer wrong-counts s < N/2; ``worst_t`` = s*/N and ``margin``
    give the tightest such inequality. ``majority_beats_mean`` compares
    strict-majority accuracy against the mean member probability; it is
    only decided (non-None) for odd juries with every p_i > 1/2, the case
    the classical jury theorem covers.
    """

    n_members: int
    competent: bool
    worst_t: float
    margin: float
    majority_accuracy: float
    mean_success: float
    majority_beats_mean: bool | None
    exact_check_used: bool


_EXACT_RECHECK_EPS = 1e-9


def verify_jury_competence(instance) -> JuryReport:
    """Certify that an independent jury is competent on its domain.

    Computes the exact correct-vote distribution, then checks the pointwise
    competence inequalities. Margins within 1e-9 of zero are re-derived in
    exact rational arithmetic so that boundary juries (members exactly at
    chance) are classified by sign, not by float rounding.
    """
    inst = _coerce_instance(instance)
    n = inst.n_members
    pmf = jury_distribution(inst)
    # wrong-count s corresponds to correct-count n - s
    s_values = np.arange((n + 1) // 2)
    margins = pmf[n - s_values] - pmf[s_values]
    worst = int(np.argmin(margins))
    margin = float(margins[worst])
    exact_used = False
    if abs(margin) < _EXACT_RECHECK_EPS:
        exact_used = True
        exact_pmf = _jury_pmf_exact(inst.probs)
        exact_margins = [exact_pmf[n - s] - exact_pmf[s]
                         for s in range((n + 1) // 2)]
        worst = min(range(len(exact_margins)), key=exact_margins.__getitem__)
        margin = float(exact_margins[worst])
        competent = all(m >= 0 for m in exact_margins)
    else:
        competent = bool(np.all(margins >= 0.0))

    majority_accuracy = float(pmf[np.arange(n + 1) > n / 2].sum())
    mean_success = float(np.mean(inst.probs))
    beats: bool | None = None
    if n % 2 == 1 and all(p > 0.5 for p in inst.probs):
        beats = majority_accuracy >= mean_success
    return JuryReport(
        n_members=n,
        competent=competent,
        worst_t=worst / n if n else 0.0,
        margin=margin,
        majority_accuracy=majority_accuracy,
        mean_success=mean_success,
        majority_beats_mean=beats,
        exact_check_used=exact_used,
    )
