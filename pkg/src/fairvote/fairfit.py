"""Per-member fairness policy fitting.

A policy reshapes one member's decision rule: the sample is classified
positive when task_score + sum_g w_g * group_score_g >= 0.5 (ties predict
positive). The zero weight vector reproduces plain 0.5 thresholding. Weights
are fitted on the member's validation fold by maximizing fold accuracy over
a symmetric grid, subject to a groupwise fairness constraint evaluated
against the true groups of the fold.

The constraint sees true groups; the decision rule only ever consumes the
member's predicted group scores, so deployment needs no group labels.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np

from ._kernels import grid_counts
from .dataio import ScoreTable
from .errors import (
    DimensionMismatch,
    EmptyFold,
    EvenResolution,
    InvariantViolation,
    NoPositives,
)
from .metrics import MetricReport, confusion_by_group, metric_report

_CONSTRAINT_KINDS = ("min-recall", "equal-opportunity", "none")
# Full Cartesian grids are only tractable for small group counts; beyond
# this, fitting switches to coordinate descent over one axis at a time.
_FULL_GRID_MAX_GROUPS = 3
_CD_MAX_SWEEPS = 10
_EVAL_BLOCK = 512


@dataclass(frozen=True)
class GridSpec:
    """Symmetric candidate grid for group-score weights.

    ``resolution`` points per group, evenly spaced over [-w_max, +w_max].
    The resolution must be odd so that 0 is always on the grid and the
    unconstrained decision rule is always a candidate.
    """

    resolution: int = 101
    w_max: float = 1.0

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("grid resolution must be at least 2")
        if self.resolution % 2 == 0:
            raise EvenResolution(
                f"grid resolution must be odd so weight 0 is on the grid, "
                f"got {self.resolution}"
            )
        if not self.w_max > 0:
            raise ValueError("grid range must be positive")

    def values(self) -> np.ndarray:
        """Grid values, exactly symmetric around an exact 0.0."""
        half = np.linspace(0.0, self.w_max, (self.resolution + 1) // 2)
        return np.concatenate([-half[:0:-1], half])


def grid_candidates(spec: GridSpec, n_groups: int) -> Iterator[tuple[float, ...]]:
    """All candidate weight vectors in lexicographic order.

    Yields resolution**n_groups tuples; the first axis varies slowest, so
    candidate order equals the row order of ``grid_matrix``.
    """
    if n_groups < 1:
        raise ValueError("n_groups must be at least 1")
    values = [float(v) for v in spec.values()]
    return itertools.product(values, repeat=n_groups)


def grid_matrix(spec: GridSpec, n_groups: int) -> np.ndarray:
    """Candidate weights as a (resolution**n_groups, n_groups) array."""
    if n_groups < 1:
        raise ValueError("n_groups must be at least 1")
    values = spec.values()
    mesh = np.meshgrid(*([values] * n_groups), indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, n_groups)


@dataclass(frozen=True)
class FairnessConstraint:
    """Groupwise constraint enforced during fitting.

    kinds: ``min-recall`` requires every group's recall >= bound;
    ``equal-opportunity`` requires max recall - min recall <= bound;
    ``none`` disables the constraint (bound ignored).
    """

    kind: str = "none"
    bound: float = 0.0

    def __post_init__(self):
        if self.kind not in _CONSTRAINT_KINDS:
            raise ValueError(
                f"unknown constraint kind {self.kind!r}; "
                f"expected one of {_CONSTRAINT_KINDS}"
            )
        if self.kind == "min-recall" and not 0.0 <= self.bound <= 1.0:
            raise ValueError("min-recall bound must lie in [0, 1]")
        if self.kind == "equal-opportunity" and self.bound < 0.0:
            raise ValueError("equal-opportunity bound must be non-negative")

    @classmethod
    def min_recall(cls, bound: float) -> "FairnessConstraint":
        return cls(kind="min-recall", bound=bound)

    @classmethod
    def equal_opportunity(cls, bound: float) -> "FairnessConstraint":
        return cls(kind="equal-opportunity", bound=bound)

    @classmethod
    def none(cls) -> "FairnessConstraint":
        return cls(kind="none", bound=0.0)


@dataclass(frozen=True)
class MemberPolicy:
    """One member's fitted decision rule."""

    member_id: int
    group_names: tuple[str, ...]
    weights: tuple[float, ...]
    constraint: FairnessConstraint
    fitted_on: int | None = None
    achieved: MetricReport | None = None


@dataclass(frozen=True)
class FitDiagnostics:
    """How the fit went: feasibility, effort, and slack.

    ``constraint_slack`` is achieved-minus-bound for min-recall and
    bound-minus-achieved for equal-opportunity (positive means satisfied
    with room); it is 0.0 for the none constraint. ``fallback_used`` marks
    fits where no candidate was feasible and the policy instead maximizes
    the constrained quantity itself.
    """

    feasible: bool
    candidates_evaluated: int
    fallback_used: bool
    constraint_slack: float


def apply_policy(policy: MemberPolicy, task_scores, group_scores) -> np.ndarray:
    """Classify samples with a fitted policy.

    The margin is accumulated exactly like the fitting kernels do (task
    plus one multiply-add per group, ascending group order), so policies
    reproduce the predictions their fit was selected on, bit for bit.
    """
    task = np.asarray(task_scores, dtype=np.float64)
    gs = np.asarray(group_scores, dtype=np.float64)
    if gs.ndim != 2 or gs.shape[0] != task.shape[0]:
        raise DimensionMismatch(
            f"group_scores must have shape (n_samples, n_groups), got {gs.shape}"
        )
    if gs.shape[1] != len(policy.weights):
        raise DimensionMismatch(
            f"policy has {len(policy.weights)} weights but scores have "
            f"{gs.shape[1]} group columns"
        )
    margins = task.copy()
    for g, w in enumerate(policy.weights):
        margins += w * gs[:, g]
    return (margins >= 0.5).astype(np.int8)


def _evaluate_candidates(task, gscores, labels, groups, weights, workers):
    """Run the counting kernel over all candidates, optionally threaded.

    Results are assembled in candidate order regardless of worker count.
    """
    n_cand = weights.shape[0]
    if workers <= 1 or n_cand <= _EVAL_BLOCK:
        return grid_counts(task, gscores, labels, groups, weights)
    spans = [(s, min(s + _EVAL_BLOCK, n_cand))
             for s in range(0, n_cand, _EVAL_BLOCK)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(
            lambda span: grid_counts(task, gscores, labels, groups,
                                     weights[span[0]:span[1]]),
            spans,
        ))
    correct = np.concatenate([p[0] for p in parts])
    tp = np.concatenate([p[1] for p in parts])
    return correct, tp


def _constraint_keys(tp, pos_counts, constraint):
    """Per-candidate feasibility plus (constrained quantity, slack).

    Recall is only evaluated on groups that have positives in the fold;
    groups without positives cannot constrain the fit.
    """
    defined = pos_counts > 0
    recalls = tp[:, defined] / pos_counts[defined]
    min_recall = recalls.min(axis=1)
    if defined.sum() >= 2:
        eo_gap = recalls.max(axis=1) - min_recall
    else:
        eo_gap = np.zeros(len(tp))
    if constraint.kind == "min-recall":
        feasible = min_recall >= constraint.bound
        quantity = min_recall
        slack = min_recall - constraint.bound
    elif constraint.kind == "equal-opportunity":
        feasible = eo_gap <= constraint.bound
        quantity = -eo_gap
        slack = constraint.bound - eo_gap
    else:
        feasible = np.ones(len(tp), dtype=bool)
        quantity = np.zeros(len(tp))
        slack = np.zeros(len(tp))
    return feasible, quantity, min_recall, slack


def _select(correct, feasible, quantity, min_recall):
    """Pick the winning candidate index.

    Feasible candidates win on (accuracy, min-recall, smallest index);
    when none is feasible the fallback maximizes the constrained quantity,
    then accuracy, then smallest index. Smallest index equals the
    lexicographically smallest weight vector because candidates are
    enumerated in lexicographic order.
    """
    if feasible.any():
        pool = feasible.copy()
        pool &= correct == correct[pool].max()
        pool &= min_recall == min_recall[pool].max()
        return int(np.flatnonzero(pool)[0]), True
    pool = quantity == quantity.max()
    pool &= correct == correct[pool].max()
    return int(np.flatnonzero(pool)[0]), False


def _fold_arrays(table: ScoreTable, member_id: int):
    if table.n_samples == 0:
        raise EmptyFold("fitting fold contains no samples")
    if not 0 <= member_id < table.n_members:
        raise ValueError(
            f"member_id {member_id} out of range 0..{table.n_members - 1}"
        )
    if not table.fully_labeled:
        raise InvariantViolation("fitting requires labels on every fold sample")
    labels = table.labels.astype(np.int8)
    if not (labels == 1).any():
        raise NoPositives("fitting fold has no positive samples")
    task = table.task[:, member_id]
    gscores = table.gscores[:, member_id, :]
    groups = table.groups
    pos_counts = np.asarray([
        int(((labels == 1) & (groups == g)).sum())
        for g in range(table.n_groups)
    ])
    return task, gscores, labels, groups, pos_counts


def fit_member(
    table: ScoreTable,
    member_id: int,
    constraint: FairnessConstraint,
    grid: GridSpec | None = None,
    *,
    fold_id: int | None = None,
    workers: int = 1,
) -> tuple[MemberPolicy, FitDiagnostics]:
    """Fit one member's group-weight policy on its validation fold.

    ``table`` must already be restricted to the fold. With up to three
    groups the full Cartesian grid is searched; above that, coordinate
    descent sweeps one group axis at a time (at most 10 sweeps, stopping
    when a sweep leaves the weights unchanged). Selection is deterministic,
    so refitting reproduces the same policy bit for bit.
    """
    grid = grid or GridSpec()
    task, gscores, labels, groups, pos_counts = _fold_arrays(table, member_id)

    if table.n_groups <= _FULL_GRID_MAX_GROUPS:
        weights = grid_matrix(grid, table.n_groups)
        correct, tp = _evaluate_candidates(
            task, gscores, labels, groups, weights, workers)
        feasible, quantity, min_recall, slack = _constraint_keys(
            tp, pos_counts, constraint)
        winner, ok = _select(correct, feasible, quantity, min_recall)
        chosen = weights[winner]
        evaluated = len(weights)
        fallback = not ok
        winner_slack = float(slack[winner])
    else:
        chosen, evaluated, ok, winner_slack = _coordinate_descent(
            task, gscores, labels, groups, pos_counts, constraint, grid,
            table.n_groups, workers)
        fallback = not ok

    policy = MemberPolicy(
        member_id=member_id,
        group_names=table.group_names,
        weights=tuple(float(w) for w in chosen),
        constraint=constraint,
        fitted_on=fold_id,
        achieved=None,
    )
    preds = apply_policy(policy, task, gscores)
    achieved = metric_report(confusion_by_group(
        preds, labels, table.group_name_array(), table.group_names))
    policy = replace(policy, achieved=achieved)
    diagnostics = FitDiagnostics(
        feasible=ok,
        candidates_evaluated=evaluated,
        fallback_used=fallback,
        constraint_slack=winner_slack,
    )
    return policy, diagnostics


def _coordinate_descent(task, gscores, labels, groups, pos_counts,
                        constraint, grid, n_groups, workers):
    """Axis-at-a-time search used when the full grid is intractable."""
    values = grid.values()
    zero_idx = (grid.resolution - 1) // 2
    current = np.full(n_groups, zero_idx)
    evaluated = 0
    for _ in range(_CD_MAX_SWEEPS):
        changed = False
        for axis in range(n_groups):
            cand = np.repeat(values[current][None, :], len(values), axis=0)
            cand[:, axis] = values
            correct, tp = _evaluate_candidates(
                task, gscores, labels, groups, cand, workers)
            evaluated += len(cand)
            feasible, quantity, min_recall, _ = _constraint_keys(
                tp, pos_counts, constraint)
            winner, _ok = _select(correct, feasible, quantity, min_recall)
            if winner != current[axis]:
                current[axis] = winner
                changed = True
        if not changed:
            break
    final = values[current][None, :]
    correct, tp = grid_counts(task, gscores, labels, groups, final)
    feasible, _, _, slack = _constraint_keys(tp, pos_counts, constraint)
    return values[current], evaluated, bool(feasible[0]), float(slack[0])
