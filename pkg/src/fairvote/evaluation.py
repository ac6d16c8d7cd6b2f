"""Accuracy-fairness frontiers and the area under them.

A frontier point is one deployable configuration evaluated on one split:
its accuracy and its fairness value r. For min-recall sweeps r is the
worst group recall; for equal-opportunity sweeps r = 1 - eo_gap, so r >= t
always reads "at least this fair". Every frontier carries the
constant-positive classifier (accuracy = prevalence, r = 1) so that any
fairness level is attainable and the area is always defined.

FairAUC averages, over a grid of fairness levels t in [1/2, 1], the best
accuracy among configurations with r >= t. Uncertainty comes from a
percentile bootstrap over evaluation samples.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .dataio import FoldAssignment, ScoreTable
from .ensemble import FairEnsemble, build_ensemble, majority_vote, predict
from .errors import (
    EmptyFrontier,
    EmptyTestSet,
    InvalidAlpha,
    InvariantViolation,
)
from .fairfit import FairnessConstraint, GridSpec
from .metrics import confusion_by_group, metric_report

_KINDS = ("min-recall", "equal-opportunity")
CONSTANT_POSITIVE = "constant-positive"


@dataclass(frozen=True)
class FrontierPoint:
    """One configuration's (accuracy, fairness) position on one split."""

    config: str
    source: str
    accuracy: float
    fairness_value: float


@dataclass(frozen=True)
class Frontier:
    """Ordered frontier points sharing one fairness metric."""

    kind: str
    points: tuple[FrontierPoint, ...]

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown fairness kind {self.kind!r}")

    def point(self, config: str) -> FrontierPoint:
        for p in self.points:
            if p.config == config:
                return p
        raise KeyError(config)


def save_frontier(frontier: Frontier, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["config", "source", "accuracy", "fairness_value"])
        for p in frontier.points:
            writer.writerow([p.config, p.source,
                             repr(p.accuracy), repr(p.fairness_value)])


def _point_metrics(preds, labels, groups, group_names, kind):
    report = metric_report(
        confusion_by_group(preds, labels, groups, group_names))
    if kind == "min-recall":
        return report.accuracy, report.min_recall
    return report.accuracy, 1.0 - report.eo_gap


def frontier_from_predictions(
    predictions: Mapping[str, np.ndarray],
    labels,
    groups,
    kind: str,
    group_names: Sequence[str] | None = None,
    indices=None,
) -> Frontier:
    """Build a frontier from cached per-config predictions.

    ``indices`` selects (with repetition allowed) the evaluation samples;
    this is what the bootstrap resamples. The constant-positive point is
    recomputed on the same indices, so its accuracy tracks prevalence.
    """
    labels = np.asarray(labels)
    groups = np.asarray(groups)
    idx = np.arange(len(labels)) if indices is None else np.asarray(indices)
    points = []
    for config, preds in predictions.items():
        acc, r = _point_metrics(np.asarray(preds)[idx], labels[idx],
                                groups[idx], group_names, kind)
        points.append(FrontierPoint(config=config, source="ensemble",
                                    accuracy=acc, fairness_value=r))
    ones = np.ones(len(idx), dtype=np.int8)
    acc, r = _point_metrics(ones, labels[idx], groups[idx], group_names, kind)
    points.append(FrontierPoint(config=CONSTANT_POSITIVE,
                                source=CONSTANT_POSITIVE,
                                accuracy=acc, fairness_value=r))
    return Frontier(kind=kind, points=tuple(points))


@dataclass(frozen=True)
class FrontierBuild:
    """Frontiers plus everything needed to reuse or resample them."""

    kind: str
    configs: tuple[str, ...]
    ensembles: Mapping[str, FairEnsemble]
    eval_frontier: Frontier
    select_frontier: Frontier
    eval_predictions: Mapping[str, np.ndarray]
    eval_labels: np.ndarray
    eval_groups: np.ndarray
    group_names: tuple[str, ...]


def config_label(constraint: FairnessConstraint) -> str:
    if constraint.kind == "none":
        return "unconstrained"
    return f"{constraint.kind}@{constraint.bound:g}"


def _split_eval_arrays(table: ScoreTable, split: str):
    idx = table.split_indices(split)
    if len(idx) == 0:
        raise EmptyTestSet(f"split {split!r} contains no samples")
    sub = table.subset(idx)
    if not sub.fully_labeled:
        raise InvariantViolation(
            f"split {split!r} must be fully labeled for evaluation"
        )
    return sub


def build_frontier(
    table: ScoreTable,
    folds: FoldAssignment,
    constraints: Sequence[FairnessConstraint],
    grid: GridSpec | None = None,
    *,
    kind: str | None = None,
    tie_break: str = "positive",
    workers: int = 1,
    select_split: str = "validation",
    eval_split: str = "test",
) -> FrontierBuild:
    """Fit one ensemble per constraint and place all of them on frontiers.

    Two frontiers are produced from the same configurations: one on
    ``select_split`` (used to pick a configuration honestly) and one on
    ``eval_split`` (used to report it). ``kind`` defaults to the kind of
    the first non-none constraint.
    """
    if not constraints:
        raise ValueError("at least one constraint configuration is required")
    if kind is None:
        kinds = [c.kind for c in constraints if c.kind != "none"]
        if not kinds:
            raise ValueError("kind is required when all constraints are "
                             "'none'")
        kind = kinds[0]
    if kind not in _KINDS:
        raise ValueError(f"unknown fairness kind {kind!r}")

    configs, ensembles = [], {}
    for c in constraints:
        label = config_label(c)
        if label in ensembles:
            raise ValueError(f"duplicate constraint configuration {label!r}")
        configs.append(label)
        ensembles[label] = build_ensemble(
            table, folds, c, grid, tie_break=tie_break, workers=workers)

    eval_sub = _split_eval_arrays(table, eval_split)
    select_sub = _split_eval_arrays(table, select_split)
    eval_preds = {
        label: predict(ens, table, eval_split)[0]
        for label, ens in ensembles.items()
    }
    select_preds = {
        label: predict(ens, table, select_split)[0]
        for label, ens in ensembles.items()
    }
    eval_frontier = frontier_from_predictions(
        eval_preds, eval_sub.labels, eval_sub.group_name_array(), kind,
        table.group_names)
    select_frontier = frontier_from_predictions(
        select_preds, select_sub.labels, select_sub.group_name_array(), kind,
        table.group_names)
    return FrontierBuild(
        kind=kind,
        configs=tuple(configs),
        ensembles=ensembles,
        eval_frontier=eval_frontier,
        select_frontier=select_frontier,
        eval_predictions=eval_preds,
        eval_labels=eval_sub.labels.copy(),
        eval_groups=eval_sub.group_name_array(),
        group_names=table.group_names,
    )


def global_threshold_frontier(
    table: ScoreTable,
    kind: str,
    taus: Sequence[float] | None = None,
    *,
    split: str = "test",
    tie_break: str = "positive",
) -> Frontier:
    """Baseline frontier: sweep one global threshold for every member.

    Each tau thresholds every member's task score, then majority-votes;
    tau = 0.5 is the unconstrained ensemble. No group information is used,
    so this is the no-surgery reference frontier. Exactly one point per
    tau is emitted; tau = 0 (in the default sweep) predicts positive
    everywhere and therefore plays the constant-positive role here.
    """
    if kind not in _KINDS:
        raise ValueError(f"unknown fairness kind {kind!r}")
    if taus is None:
        taus = [round(0.02 * i, 2) for i in range(51)]
    sub = _split_eval_arrays(table, split)
    groups = sub.group_name_array()
    points = []
    for tau in taus:
        member_preds = (sub.task.T >= tau).astype(np.int8)
        preds = majority_vote(member_preds, tie_break)
        acc, r = _point_metrics(preds, sub.labels, groups,
                                table.group_names, kind)
        points.append(FrontierPoint(config=f"tau@{tau:g}",
                                    source="global-threshold",
                                    accuracy=acc, fairness_value=r))
    return Frontier(kind=kind, points=tuple(points))


def default_fairness_levels() -> tuple[float, ...]:
    """The default FairAUC grid: 51 levels from 0.50 to 1.00."""
    return tuple(round(0.5 + 0.01 * i, 2) for i in range(51))


@dataclass(frozen=True)
class FairAucResult:
    """Mean best accuracy across fairness levels, with the choices made."""

    value: float
    kind: str
    t_grid: tuple[float, ...]
    configs: tuple[str, ...]
    accuracies: tuple[float, ...]


def fair_auc(frontier: Frontier, t_grid: Sequence[float] | None = None,
             ) -> FairAucResult:
    """Area under the accuracy-fairness frontier.

    For each fairness level t, take the best accuracy among points with
    r >= t (ties to the earliest point); the result is the mean over the
    grid. The constant-positive point guarantees a candidate at every t.
    """
    if not frontier.points:
        raise EmptyFrontier("frontier has no points")
    ts = tuple(float(t) for t in (t_grid or default_fairness_levels()))
    configs, accs = [], []
    for t in ts:
        best = None
        for p in frontier.points:
            if p.fairness_value >= t and (best is None
                                          or p.accuracy > best.accuracy):
                best = p
        if best is None:
            raise EmptyFrontier(
                f"no frontier point reaches fairness level {t}"
            )
        configs.append(best.config)
        accs.append(best.accuracy)
    return FairAucResult(
        value=float(sum(accs) / len(accs)),
        kind=frontier.kind,
        t_grid=ts,
        configs=tuple(configs),
        accuracies=tuple(accs),
    )


def fair_auc_selected(
    select_frontier: Frontier,
    eval_frontier: Frontier,
    t_grid: Sequence[float] | None = None,
) -> FairAucResult:
    """FairAUC with honest selection: choose per-level configurations on
    the selection frontier, score them with the evaluation frontier.

    Both frontiers must contain the same configurations.
    """
    if not select_frontier.points:
        raise EmptyFrontier("selection frontier has no points")
    ts = tuple(float(t) for t in (t_grid or default_fairness_levels()))
    configs, accs = [], []
    for t in ts:
        best = None
        for p in select_frontier.points:
            if p.fairness_value >= t and (best is None
                                          or p.accuracy > best.accuracy):
                best = p
        if best is None:
            raise EmptyFrontier(
                f"no selection point reaches fairness level {t}"
            )
        try:
            chosen = eval_frontier.point(best.config)
        except KeyError:
            raise ValueError(
                f"config {best.config!r} missing from evaluation frontier"
            ) from None
        configs.append(chosen.config)
        accs.append(chosen.accuracy)
    return FairAucResult(
        value=float(sum(accs) / len(accs)),
        kind=eval_frontier.kind,
        t_grid=ts,
        configs=tuple(configs),
        accuracies=tuple(accs),
    )


@dataclass(frozen=True)
class BootstrapCI:
    """Percentile bootstrap interval for a sample-indexed metric."""

    low: float
    high: float
    point_estimate: float
    level: float
    n_replicates: int


def bootstrap_ci(
    metric: Callable[[np.ndarray], float],
    n_samples: int,
    *,
    n_replicates: int = 200,
    level: float = 0.95,
    seed: int = 0,
) -> BootstrapCI:
    """Percentile bootstrap over sample indices.

    ``metric`` maps an index vector (resampled with replacement from
    0..n_samples-1) to a scalar. Deterministic for a fixed seed.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if n_replicates < 1:
        raise ValueError("n_replicates must be at least 1")
    if not 0.0 < level < 1.0:
        raise InvalidAlpha(f"confidence level must be in (0, 1), got {level}")
    rng = np.random.default_rng(seed)
    replicates = np.array([
        float(metric(rng.integers(0, n_samples, size=n_samples)))
        for _ in range(n_replicates)
    ])
    lo, hi = np.quantile(replicates, [(1.0 - level) / 2, (1.0 + level) / 2])
    return BootstrapCI(
        low=float(lo),
        high=float(hi),
        point_estimate=float(metric(np.arange(n_samples))),
        level=level,
        n_replicates=n_replicates,
    )
