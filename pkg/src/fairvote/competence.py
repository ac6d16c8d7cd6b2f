"""Competence diagnostics for majority-vote ensembles.

With W the per-sample fraction of members that vote wrongly, the ensemble
is competent on a sample population when

    C(t) = P(W in [t, 1/2)) - P(W in [1/2, 1 - t]) >= 0   for all t in [0, 1/2).

Competence restricted to the positives of each group is the condition under
which majority voting cannot lose recall anywhere; the population is always
a restriction of a labeled sample set (all samples, positives, negatives,
or one group's positives/negatives).

Two computation paths exist. ``competence_curve`` evaluates C on float
values of W at arbitrary grid points, matching the definition directly.
The groupwise check and the improvement report instead work on integer
wrong-vote counts, so interval membership and the theorem bounds are decided
by exact integer/rational arithmetic with no float tolerance at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyRestriction, LengthMismatch, ZeroMemberError

_KINDS = ("all", "positives", "negatives", "group-positives", "group-negatives")


@dataclass(frozen=True)
class Restriction:
    """A named subpopulation of a labeled sample set."""

    kind: str = "all"
    group: str | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown restriction kind {self.kind!r}")
        needs_group = self.kind.startswith("group-")
        if needs_group and self.group is None:
            raise ValueError(f"restriction {self.kind!r} needs a group")
        if not needs_group and self.group is not None:
            raise ValueError(f"restriction {self.kind!r} takes no group")

    @classmethod
    def all_samples(cls) -> "Restriction":
        return cls(kind="all")

    @classmethod
    def positives(cls) -> "Restriction":
        return cls(kind="positives")

    @classmethod
    def negatives(cls) -> "Restriction":
        return cls(kind="negatives")

    @classmethod
    def group_positives(cls, group: str) -> "Restriction":
        return cls(kind="group-positives", group=group)

    @classmethod
    def group_negatives(cls, group: str) -> "Restriction":
        return cls(kind="group-negatives", group=group)

    @property
    def name(self) -> str:
        if self.group is None:
            return self.kind
        return f"{self.kind}[{self.group}]"

    def mask(self, labels, groups=None) -> np.ndarray:
        labs = np.asarray(labels)
        if self.kind == "all":
            return np.ones(len(labs), dtype=bool)
        base = labs == (1 if "positives" in self.kind else 0)
        if self.group is None:
            return base
        if groups is None:
            raise ValueError(f"restriction {self.name} needs a groups vector")
        grp = np.asarray(groups)
        if grp.dtype.kind not in ("U", "S"):
            grp = grp.astype(str)
        if len(grp) != len(labs):
            raise LengthMismatch("labels and groups must have equal length")
        return base & (grp == self.group)


def standard_restrictions(group_names: Sequence[str]) -> tuple[Restriction, ...]:
    """All, positives, negatives, then each group's positives and negatives."""
    base = [Restriction.all_samples(), Restriction.positives(),
            Restriction.negatives()]
    for g in group_names:
        base.append(Restriction.group_positives(g))
    for g in group_names:
        base.append(Restriction.group_negatives(g))
    return tuple(base)


def _check_members_matrix(member_predictions) -> np.ndarray:
    mp = np.asarray(member_predictions)
    if mp.ndim != 2:
        raise ValueError("member_predictions must have shape "
                         "(n_members, n_samples)")
    if not np.isin(mp, (0, 1)).all():
        raise ValueError("member_predictions must contain only 0/1 values")
    return mp


def per_point_error(member_predictions, labels) -> np.ndarray:
    """W: per-sample fraction of members that predict the wrong class."""
    mp = _check_members_matrix(member_predictions)
    labs = np.asarray(labels)
    if mp.shape[1] != len(labs):
        raise LengthMismatch(
            f"{mp.shape[1]} prediction columns vs {len(labs)} labels"
        )
    return (mp != labs).mean(axis=0)


def wrong_counts(member_predictions, labels) -> np.ndarray:
    """Integer count of wrong member votes per sample."""
    mp = _check_members_matrix(member_predictions)
    labs = np.asarray(labels)
    if mp.shape[1] != len(labs):
        raise LengthMismatch(
            f"{mp.shape[1]} prediction columns vs {len(labs)} labels"
        )
    return (mp != labs).sum(axis=0).astype(np.int64)


@dataclass(frozen=True)
class CompetenceCurve:
    """C evaluated on a grid, with the worst violation.

    ``violation`` is max(0, -min_t C(t)); zero means competent on the grid.
    """

    restriction: Restriction | None
    t_grid: tuple[float, ...]
    c_values: tuple[float, ...]
    violation: float
    n_samples: int

    @property
    def competent(self) -> bool:
        return self.violation == 0.0


def default_t_grid(n_members: int) -> tuple[tuple[int, int], ...]:
    """Lossless grid of rational t values for N members.

    C is piecewise constant between attainable values of W, so the
    attainable multiples of 1/N below 1/2 cover almost all of [0, 1/2).
    For even N there is one more piece: for t just above (N/2-1)/N only the
    tie mass W = 1/2 is counted (negatively), so a probe at (N-1)/(2N) is
    appended to keep the grid lossless.
    """
    if n_members < 1:
        raise ValueError("n_members must be at least 1")
    grid: list[tuple[int, int]] = [(s, n_members)
                                   for s in range((n_members + 1) // 2)]
    if n_members % 2 == 0:
        grid.append((n_members - 1, 2 * n_members))
    return tuple(grid)


def curve_from_counts(
    counts,
    n_members: int,
    restriction: Restriction | None = None,
    t_grid: Sequence[tuple[int, int]] | None = None,
) -> CompetenceCurve:
    """Exact competence curve from integer wrong-vote counts.

    ``t_grid`` entries are rationals (numerator, denominator); membership
    of W = c/N in [t, 1/2) and [1/2, 1-t] is decided by integer
    cross-multiplication, so C values and the violation carry no float
    rounding (each C(t) is an exact multiple of 1/n_samples).
    """
    cnt = np.asarray(counts, dtype=np.int64)
    n = len(cnt)
    if n == 0:
        raise EmptyRestriction(
            f"restriction {restriction.name if restriction else 'all'} "
            "selects no samples"
        )
    if cnt.min() < 0 or cnt.max() > n_members:
        raise ValueError("wrong-vote counts out of range")
    grid = tuple(t_grid) if t_grid is not None else default_t_grid(n_members)
    t_values, c_values = [], []
    worst = 0
    for p, q in grid:
        # W >= t  <=>  c*q >= p*N ; W <= 1-t  <=>  c*q <= (q-p)*N
        below_half = 2 * cnt < n_members
        in_lower = below_half & (cnt * q >= p * n_members)
        in_upper = ~below_half & (cnt * q <= (q - p) * n_members)
        diff = int(in_lower.sum()) - int(in_upper.sum())
        t_values.append(p / q)
        c_values.append(diff / n)
        worst = min(worst, diff)
    return CompetenceCurve(
        restriction=restriction,
        t_grid=tuple(t_values),
        c_values=tuple(c_values),
        violation=-worst / n if worst < 0 else 0.0,
        n_samples=n,
    )


def competence_curve(w_values, t_grid) -> CompetenceCurve:
    """Competence curve from float W values at arbitrary grid points.

    Direct transcription of the definition; use the count-based path when
    exact zero-tolerance answers are needed.
    """
    w = np.asarray(w_values, dtype=np.float64)
    if len(w) == 0:
        raise EmptyRestriction("no W values supplied")
    if ((w < 0) | (w > 1)).any():
        raise ValueError("W values must lie in [0, 1]")
    ts = [float(t) for t in t_grid]
    if any(not 0.0 <= t < 0.5 for t in ts):
        raise ValueError("t grid values must lie in [0, 1/2)")
    n = len(w)
    below_half = w < 0.5
    c_values = []
    for t in ts:
        lower = (below_half & (w >= t)).sum()
        upper = (~below_half & (w <= 1.0 - t)).sum()
        c_values.append((int(lower) - int(upper)) / n)
    worst = min(c_values)
    return CompetenceCurve(
        restriction=None,
        t_grid=tuple(ts),
        c_values=tuple(c_values),
        violation=-worst if worst < 0 else 0.0,
        n_samples=n,
    )


@dataclass(frozen=True)
class GroupwiseCompetence:
    """Competence curves on every group's positives.

    Groups without positive samples cannot be checked; they are listed in
    ``skipped`` and do not block ``competent``.
    """

    curves: Mapping[str, CompetenceCurve]
    skipped: tuple[str, ...]

    @property
    def competent(self) -> bool:
        return all(c.competent for c in self.curves.values())

    @property
    def worst_violation(self) -> float:
        return max((c.violation for c in self.curves.values()), default=0.0)

    @property
    def mean_violation(self) -> float:
        if not self.curves:
            return 0.0
        return sum(c.violation for c in self.curves.values()) / len(self.curves)


def groupwise_competence(
    member_predictions,
    labels,
    groups,
    group_names: Sequence[str] | None = None,
) -> GroupwiseCompetence:
    """Check restricted groupwise competence: C >= 0 on every group's
    positives, using the exact count-based curve on the lossless grid."""
    mp = _check_members_matrix(member_predictions)
    labs = np.asarray(labels)
    grp = np.asarray(groups)
    if grp.dtype.kind not in ("U", "S"):
        grp = grp.astype(str)
    if group_names is None:
        names = [str(g) for g in np.unique(grp)]
    else:
        names = list(group_names)
    counts = wrong_counts(mp, labs)
    curves: dict[str, CompetenceCurve] = {}
    skipped = []
    for name in names:
        mask = (labs == 1) & (grp == name)
        if not mask.any():
            skipped.append(name)
            continue
        curves[name] = curve_from_counts(
            counts[mask], mp.shape[0],
            restriction=Restriction.group_positives(name),
        )
    return GroupwiseCompetence(curves=curves, skipped=tuple(skipped))


@dataclass(frozen=True)
class ImprovementReport:
    """Error improvement rate of the ensemble against its members.

    On a restriction with mean member error MW, ensemble error E, and mean
    pairwise member disagreement D (unordered distinct pairs):

        eir = (MW - E) / MW          der = D / MW

    ``bounds_hold`` verifies the guarantee that majority voting admits:
    eir <= der always, and eir >= max((1 - 1/N) * der - 1, 0) whenever the
    ensemble is competent on the restriction. The (1 - 1/N) factor converts
    the distinct-pair average into the average over pairs drawn
    independently with replacement (self-pairs included), which is the
    quantity the lower guarantee is stated for; the distinct-pair form
    der - 1 overshoots for finite ensembles. Two samples, one with 1 of 3
    members wrong and one with 2 of 3 wrong, give a competent ensemble with
    eir = 0 and der = 4/3, so der - 1 = 1/3 would falsely flag it while
    the certified bound max((2/3)(4/3) - 1, 0) = 0 holds with equality.
    The lower bound also genuinely requires competence: a single sample
    where 2 of 3 members are wrong has eir = -1/2.

    ``lower_bound`` reports the plain max(der - 1, 0) simplification for
    reference (the two coincide as N grows); ``certified_lower_bound`` is
    the finite-ensemble guarantee, or None when the restriction is not
    competent and no lower guarantee exists. All comparisons are made in
    exact rational arithmetic. The bounds describe majority-vote
    predictions; feeding an unrelated ensemble_predictions vector voids
    them.
    """

    restriction: Restriction
    n_samples: int
    n_members: int
    mean_member_error: float
    ensemble_error: float
    eir: float
    der: float
    lower_bound: float
    upper_bound: float
    certified_lower_bound: float | None
    restriction_competent: bool
    bounds_hold: bool


def improvement_report(
    member_predictions,
    ensemble_predictions,
    labels,
    groups=None,
    restriction: Restriction | None = None,
) -> ImprovementReport:
    """Compute EIR/DER on a restriction and verify the theorem bounds.

    Raises EmptyRestriction when the restriction selects no samples and
    ZeroMemberError when the mean member error is zero (the ratios are
    undefined; callers should then verify the ensemble error is zero too).
    """
    restriction = restriction or Restriction.all_samples()
    mp = _check_members_matrix(member_predictions)
    ens = np.asarray(ensemble_predictions)
    labs = np.asarray(labels)
    if mp.shape[1] != len(labs) or len(ens) != len(labs):
        raise LengthMismatch("predictions and labels must align")
    mask = restriction.mask(labs, groups)
    if not mask.any():
        raise EmptyRestriction(f"restriction {restriction.name} selects "
                               "no samples")
    n_members = mp.shape[0]
    counts = wrong_counts(mp[:, mask], labs[mask])
    n = len(counts)

    total_wrong = int(counts.sum())
    if total_wrong == 0:
        raise ZeroMemberError(
            f"mean member error is zero on restriction {restriction.name}; "
            "improvement ratios are undefined"
        )
    mw = Fraction(total_wrong, n_members * n)
    ens_wrong = int((ens[mask] != labs[mask]).sum())
    e = Fraction(ens_wrong, n)
    # each sample contributes c*(N-c) disagreeing pairs out of C(N, 2)
    if n_members >= 2:
        disagree = int((counts * (n_members - counts)).sum())
        pairs = n_members * (n_members - 1) // 2
        d = Fraction(disagree, pairs * n)
    else:
        d = Fraction(0)
    eir = (mw - e) / mw
    der = d / mw
    lower = max(der - 1, Fraction(0))
    competent = curve_from_counts(counts, n_members,
                                  restriction=restriction).competent
    certified = (max(der * Fraction(n_members - 1, n_members) - 1,
                     Fraction(0))
                 if competent else None)
    holds = eir <= der and (certified is None or eir >= certified)
    return ImprovementReport(
        restriction=restriction,
        n_samples=n,
        n_members=n_members,
        mean_member_error=float(mw),
        ensemble_error=float(e),
        eir=float(eir),
        der=float(der),
        lower_bound=float(lower),
        upper_bound=float(der),
        certified_lower_bound=None if certified is None else float(certified),
        restriction_competent=competent,
        bounds_hold=holds,
    )
