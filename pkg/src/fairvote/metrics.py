"""Group-aware confusion counts and the fairness metrics derived from them.

All downstream fairness quantities (min-recall, equal-opportunity gap) are
computed from integer confusion counts so that repeated evaluations of the
same predictions are exactly reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import LengthMismatch, NoPositivesAnywhere


@dataclass(frozen=True)
class GroupCounts:
    """Confusion counts for one group."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def size(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def recall(self) -> float | None:
        """Recall, or None when the group has no positive samples."""
        pos = self.positives
        return self.tp / pos if pos else None


@dataclass(frozen=True)
class GroupConfusion:
    """Per-group confusion counts, keyed by group name in declared order."""

    counts: Mapping[str, GroupCounts]

    @property
    def n_samples(self) -> int:
        return sum(c.size for c in self.counts.values())

    @property
    def accuracy(self) -> float:
        correct = sum(c.tp + c.tn for c in self.counts.values())
        return correct / self.n_samples


def _as_binary(name: str, values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0/1 values")
    return arr.astype(np.int8)


def confusion_by_group(
    predictions,
    labels,
    groups,
    group_names: Sequence[str] | None = None,
) -> GroupConfusion:
    """Count tp/fp/fn/tn separately for every group.

    ``group_names`` fixes the group order of the result (and may include
    groups absent from ``groups``, which get all-zero counts); when omitted,
    the sorted distinct values of ``groups`` are used.
    """
    preds = _as_binary("predictions", predictions)
    labs = _as_binary("labels", labels)
    grp = np.asarray(groups)
    if grp.dtype.kind not in ("U", "S"):
        grp = grp.astype(str)
    if not (len(preds) == len(labs) == len(grp)):
        raise LengthMismatch(
            f"predictions ({len(preds)}), labels ({len(labs)}) and groups "
            f"({len(grp)}) must have equal length"
        )
    if group_names is None:
        names = [str(g) for g in np.unique(grp)] if len(grp) else []
    else:
        names = list(group_names)

    counts: dict[str, GroupCounts] = {}
    for name in names:
        mask = grp == name
        p, y = preds[mask], labs[mask]
        tp = int(np.count_nonzero((p == 1) & (y == 1)))
        fp = int(np.count_nonzero((p == 1) & (y == 0)))
        fn = int(np.count_nonzero((p == 0) & (y == 1)))
        tn = int(np.count_nonzero((p == 0) & (y == 0)))
        counts[name] = GroupCounts(tp=tp, fp=fp, fn=fn, tn=tn)
    return GroupConfusion(counts=counts)


@dataclass(frozen=True)
class MetricReport:
    """Accuracy and groupwise fairness metrics for one set of predictions.

    ``recalls`` maps every group to its recall, with None for groups that
    have no positives; those groups are listed in ``undefined_groups`` and
    excluded from ``min_recall`` and ``eo_gap``.
    """

    accuracy: float
    recalls: Mapping[str, float | None]
    min_recall: float
    eo_gap: float
    undefined_groups: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "recalls": dict(self.recalls),
            "min_recall": self.min_recall,
            "eo_gap": self.eo_gap,
            "undefined_groups": list(self.undefined_groups),
        }

    def to_text(self) -> str:
        lines = [f"accuracy={self.accuracy!r}"]
        for name, r in self.recalls.items():
            lines.append(f"recall[{name}]={'undefined' if r is None else repr(r)}")
        lines.append(f"min_recall={self.min_recall!r}")
        lines.append(f"eo_gap={self.eo_gap!r}")
        lines.append("undefined_groups=" + ",".join(self.undefined_groups))
        return "\n".join(lines) + "\n"


def metric_report(confusion: GroupConfusion) -> MetricReport:
    """Derive accuracy, per-group recalls, min-recall and the EO gap.

    Raises NoPositivesAnywhere when recall is undefined for every group,
    since min-recall then has no meaning. The EO gap is 0 when fewer than
    two groups have defined recall.
    """
    recalls = {name: c.recall for name, c in confusion.counts.items()}
    defined = [r for r in recalls.values() if r is not None]
    if not defined:
        raise NoPositivesAnywhere(
            "every group has zero positive samples; recall is undefined"
        )
    undefined = tuple(n for n, r in recalls.items() if r is None)
    eo_gap = max(defined) - min(defined) if len(defined) >= 2 else 0.0
    return MetricReport(
        accuracy=confusion.accuracy,
        recalls=recalls,
        min_recall=min(defined),
        eo_gap=eo_gap,
        undefined_groups=undefined,
    )
