"""Majority-vote ensembles of per-member fairness policies.

Each member votes through its own fitted policy; the ensemble predicts the
majority class, with ties (only possible for even member counts) resolved
by the configured tie break. One fold per member: member i's policy is
fitted on fold i, so every policy is selected on data its own scores did
not overfit through the fitting procedure itself.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dataio import FoldAssignment, ScoreTable
from .errors import (
    FairvoteError,
    FoldMemberMismatch,
    GroupSetMismatch,
    InvariantViolation,
    MalformedFile,
)
from .fairfit import (
    FairnessConstraint,
    FitDiagnostics,
    GridSpec,
    MemberPolicy,
    apply_policy,
    fit_member,
)
from .metrics import MetricReport

_TIE_BREAKS = ("positive", "negative")
_FORMAT = "fairvote-ensemble/1"


@dataclass(frozen=True)
class FairEnsemble:
    """A committee of fitted member policies with a tie-break rule."""

    members: tuple[MemberPolicy, ...]
    tie_break: str = "positive"
    diagnostics: tuple[FitDiagnostics | None, ...] | None = None

    def __post_init__(self):
        if not self.members:
            raise InvariantViolation("an ensemble needs at least one member")
        if self.tie_break not in _TIE_BREAKS:
            raise ValueError(f"tie_break must be one of {_TIE_BREAKS}")
        ids = [m.member_id for m in self.members]
        if ids != list(range(len(ids))):
            raise InvariantViolation(
                f"member ids must be exactly 0..{len(ids) - 1}, got {ids}"
            )
        names = {m.group_names for m in self.members}
        if len(names) != 1:
            raise InvariantViolation("members disagree on the group set")
        if self.diagnostics is not None and \
                len(self.diagnostics) != len(self.members):
            raise InvariantViolation("diagnostics do not align with members")

    @property
    def n_members(self) -> int:
        return len(self.members)

    @property
    def group_names(self) -> tuple[str, ...]:
        return self.members[0].group_names

    @classmethod
    def thresholding(cls, group_names, n_members: int,
                     tie_break: str = "positive") -> "FairEnsemble":
        """Zero-weight ensemble: every member plain-thresholds at 0.5.

        The unfitted baseline; useful for diagnostics and as the reference
        point fairness surgery is compared against.
        """
        constraint = FairnessConstraint.none()
        members = tuple(
            MemberPolicy(
                member_id=i,
                group_names=tuple(group_names),
                weights=(0.0,) * len(tuple(group_names)),
                constraint=constraint,
            )
            for i in range(n_members)
        )
        return cls(members=members, tie_break=tie_break)


def majority_vote(member_predictions, tie_break: str = "positive") -> np.ndarray:
    """Combine an (n_members, n_samples) 0/1 prediction matrix by majority.

    Strict majority decides; an exact tie goes to the tie-break class.
    """
    if tie_break not in _TIE_BREAKS:
        raise ValueError(f"tie_break must be one of {_TIE_BREAKS}")
    mp = np.asarray(member_predictions)
    if mp.ndim != 2:
        raise ValueError("member_predictions must be 2-dimensional")
    if not np.isin(mp, (0, 1)).all():
        raise ValueError("member_predictions must contain only 0/1 values")
    n = mp.shape[0]
    votes = mp.sum(axis=0)
    preds = votes * 2 > n
    if tie_break == "positive":
        preds |= votes * 2 == n
    return preds.astype(np.int8)


def build_ensemble(
    table: ScoreTable,
    folds: FoldAssignment,
    constraint: FairnessConstraint,
    grid: GridSpec | None = None,
    *,
    tie_break: str = "positive",
    workers: int = 1,
) -> FairEnsemble:
    """Fit every member on its own fold and assemble the ensemble.

    Requires one fold per member. Fitting errors are re-raised with the
    offending member id prefixed.
    """
    if folds.n_folds != table.n_members:
        raise FoldMemberMismatch(
            f"{folds.n_folds} folds for {table.n_members} members; "
            "one fold per member is required"
        )
    fold_vec = folds.fold_vector(table)
    nontest = table.nontest_indices()
    unassigned = nontest[fold_vec[nontest] < 0]
    if len(unassigned):
        raise InvariantViolation(
            f"{len(unassigned)} non-test samples have no fold assignment "
            f"(first: {table.sample_ids[unassigned[0]]!r})"
        )
    if fold_vec.max(initial=-1) >= folds.n_folds:
        raise InvariantViolation("fold index out of range")

    members, diags = [], []
    for i in range(table.n_members):
        fold_table = table.subset(np.flatnonzero(fold_vec == i))
        try:
            policy, diag = fit_member(
                fold_table, i, constraint, grid, fold_id=i, workers=workers)
        except FairvoteError as exc:
            raise type(exc)(f"member {i}: {exc}") from exc
        members.append(policy)
        diags.append(diag)
    return FairEnsemble(
        members=tuple(members),
        tie_break=tie_break,
        diagnostics=tuple(diags),
    )


def member_predictions(ensemble: FairEnsemble, table: ScoreTable) -> np.ndarray:
    """Every member's policy predictions, shape (n_members, n_samples)."""
    _check_compatible(ensemble, table)
    out = np.empty((ensemble.n_members, table.n_samples), dtype=np.int8)
    for i, policy in enumerate(ensemble.members):
        out[i] = apply_policy(policy, table.task[:, i], table.gscores[:, i, :])
    return out


@dataclass(frozen=True)
class VoteRecord:
    """Vote tallies aligned with the predicted samples.

    ``w_point`` is the per-sample fraction of members that voted wrongly;
    it is None unless every predicted sample is labeled.
    """

    sample_ids: tuple[str, ...]
    votes: np.ndarray
    predictions: np.ndarray
    w_point: np.ndarray | None


def _check_compatible(ensemble: FairEnsemble, table: ScoreTable) -> None:
    if tuple(table.group_names) != ensemble.group_names:
        raise GroupSetMismatch(
            f"ensemble groups {ensemble.group_names} != table groups "
            f"{tuple(table.group_names)}"
        )
    if table.n_members != ensemble.n_members:
        raise FoldMemberMismatch(
            f"ensemble has {ensemble.n_members} members but table has "
            f"{table.n_members}"
        )


def predict(
    ensemble: FairEnsemble,
    table: ScoreTable,
    split: str = "test",
) -> tuple[np.ndarray, VoteRecord]:
    """Predict one split of a table; returns predictions and vote records."""
    idx = table.split_indices(split)
    sub = table.subset(idx)
    mp = member_predictions(ensemble, sub)
    votes = mp.sum(axis=0).astype(np.int64)
    preds = majority_vote(mp, ensemble.tie_break)
    w_point = None
    if sub.n_samples and sub.fully_labeled:
        n = ensemble.n_members
        wrong = np.where(sub.labels == 1, n - votes, votes)
        w_point = wrong / n
    record = VoteRecord(
        sample_ids=sub.sample_ids,
        votes=votes,
        predictions=preds,
        w_point=w_point,
    )
    return preds, record


# -- serialization -------------------------------------------------------------

def _report_to_json(report: MetricReport | None):
    return None if report is None else report.to_dict()


def _report_from_json(obj) -> MetricReport | None:
    if obj is None:
        return None
    return MetricReport(
        accuracy=obj["accuracy"],
        recalls=dict(obj["recalls"]),
        min_recall=obj["min_recall"],
        eo_gap=obj["eo_gap"],
        undefined_groups=tuple(obj["undefined_groups"]),
    )


def save_ensemble(ensemble: FairEnsemble, path) -> None:
    """Write an ensemble to JSON (stable key order, newline-terminated)."""
    diags = ensemble.diagnostics or (None,) * ensemble.n_members
    payload = {
        "format": _FORMAT,
        "group_names": list(ensemble.group_names),
        "tie_break": ensemble.tie_break,
        "members": [
            {
                "member_id": m.member_id,
                "weights": list(m.weights),
                "constraint": {"kind": m.constraint.kind,
                               "bound": m.constraint.bound},
                "fitted_on": m.fitted_on,
                "achieved": _report_to_json(m.achieved),
                "diagnostics": None if d is None else {
                    "feasible": d.feasible,
                    "candidates_evaluated": d.candidates_evaluated,
                    "fallback_used": d.fallback_used,
                    "constraint_slack": d.constraint_slack,
                },
            }
            for m, d in zip(ensemble.members, diags)
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_ensemble(path) -> FairEnsemble:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise MalformedFile(f"{path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{path}: {exc}") from None
    if payload.get("format") != _FORMAT:
        raise InvariantViolation(
            f"{path}: unsupported ensemble format {payload.get('format')!r}"
        )
    group_names = tuple(payload["group_names"])
    members, diags = [], []
    for m in payload["members"]:
        members.append(MemberPolicy(
            member_id=m["member_id"],
            group_names=group_names,
            weights=tuple(m["weights"]),
            constraint=FairnessConstraint(kind=m["constraint"]["kind"],
                                          bound=m["constraint"]["bound"]),
            fitted_on=m["fitted_on"],
            achieved=_report_from_json(m["achieved"]),
        ))
        d = m.get("diagnostics")
        diags.append(None if d is None else FitDiagnostics(
            feasible=d["feasible"],
            candidates_evaluated=d["candidates_evaluated"],
            fallback_used=d["fallback_used"],
            constraint_slack=d["constraint_slack"],
        ))
    return FairEnsemble(
        members=tuple(members),
        tie_break=payload["tie_break"],
        diagnostics=tuple(diags),
    )
