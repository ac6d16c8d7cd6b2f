"""Score tables: ingestion, fold assignment, and synthetic generation.

A score table holds, for every sample, the task score and predicted-group
scores of each of N ensemble members. Tables are stored column-major in
numpy arrays for the fitting hot path, but are loaded from and saved to a
one-row-per-(sample, member) CSV with full round-trip float precision.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    EmptyCell,
    InvalidConfig,
    InvariantViolation,
    KTooLarge,
    MalformedFile,
    UnknownGroup,
)
from .theory import norm_ppf

SPLITS = ("train", "validation", "test")
_GROUP_SCORE_PREFIX = "group_score:"
_FIXED_COLUMNS = ("sample_id", "split", "label", "group",
                  "member_id", "task_score")
_SUM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class SampleRecord:
    """Identity, split, optional label, and true group of one sample."""

    sample_id: str
    split: str
    label: int | None
    group: str


@dataclass(frozen=True)
class MemberScores:
    """One member's scores for one sample.

    ``task_score`` is the member's positive-class score; ``group_scores``
    are its predicted-group probabilities in table group order.
    """

    member_id: int
    task_score: float
    group_scores: tuple[float, ...]


class ScoreTable:
    """Immutable container of per-member scores for a set of samples.

    Arrays: ``task`` has shape (n_samples, n_members), ``gscores`` has
    shape (n_samples, n_members, n_groups). ``labels`` uses -1 for missing.
    """

    def __init__(self, group_names, sample_ids, labels, groups, splits,
                 task, gscores, *, validate: bool = True):
        self.group_names: tuple[str, ...] = tuple(group_names)
        self.sample_ids: tuple[str, ...] = tuple(sample_ids)
        self.labels = np.asarray(labels, dtype=np.int8)
        self.groups = np.asarray(groups, dtype=np.int32)
        self.splits = np.asarray(splits, dtype=np.int8)
        self.task = np.asarray(task, dtype=np.float64)
        self.gscores = np.asarray(gscores, dtype=np.float64)
        for arr in (self.labels, self.groups, self.splits,
                    self.task, self.gscores):
            arr.setflags(write=False)
        if validate:
            self._validate()

    # -- shape and access ---------------------------------------------------

    @property
    def n_samples(self) -> int:
        return len(self.sample_ids)

    @property
    def n_members(self) -> int:
        return self.task.shape[1]

    @property
    def n_groups(self) -> int:
        return len(self.group_names)

    @property
    def labeled_mask(self) -> np.ndarray:
        return self.labels >= 0

    @property
    def fully_labeled(self) -> bool:
        return bool(self.labeled_mask.all())

    def group_name_array(self) -> np.ndarray:
        """Per-sample true group names as a string array."""
        return np.asarray(self.group_names, dtype=object)[self.groups]

    def split_indices(self, tag: str) -> np.ndarray:
        """Positions of the samples in one split ('all' selects every row)."""
        if tag == "all":
            return np.arange(self.n_samples)
        if tag not in SPLITS:
            raise ValueError(f"unknown split {tag!r}; expected one of "
                             f"{SPLITS + ('all',)}")
        return np.flatnonzero(self.splits == SPLITS.index(tag))

    def nontest_indices(self) -> np.ndarray:
        return np.flatnonzero(self.splits != SPLITS.index("test"))

    def subset(self, indices) -> "ScoreTable":
        idx = np.asarray(indices)
        return ScoreTable(
            self.group_names,
            [self.sample_ids[i] for i in idx],
            self.labels[idx],
            self.groups[idx],
            self.splits[idx],
            self.task[idx],
            self.gscores[idx],
            validate=False,
        )

    def records(self) -> Iterator[tuple[SampleRecord, tuple[MemberScores, ...]]]:
        for i, sid in enumerate(self.sample_ids):
            rec = SampleRecord(
                sample_id=sid,
                split=SPLITS[self.splits[i]],
                label=None if self.labels[i] < 0 else int(self.labels[i]),
                group=self.group_names[self.groups[i]],
            )
            members = tuple(
                MemberScores(
                    member_id=m,
                    task_score=float(self.task[i, m]),
                    group_scores=tuple(float(v) for v in self.gscores[i, m]),
                )
                for m in range(self.n_members)
            )
            yield rec, members

    def equals(self, other: "ScoreTable") -> bool:
        return (
            self.group_names == other.group_names
            and self.sample_ids == other.sample_ids
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.groups, other.groups)
            and np.array_equal(self.splits, other.splits)
            and np.array_equal(self.task, other.task)
            and np.array_equal(self.gscores, other.gscores)
        )

    # -- construction ---------------------------------------------------------

    @classmethod
    def from_records(
        cls,
        group_names: Sequence[str],
        records: Sequence[tuple[SampleRecord, Sequence[MemberScores]]],
    ) -> "ScoreTable":
        names = tuple(group_names)
        if not records:
            raise InvariantViolation("a score table needs at least one sample")
        n_members = len(records[0][1])
        n = len(records)
        sample_ids, labels = [], np.empty(n, np.int8)
        groups, splits = np.empty(n, np.int32), np.empty(n, np.int8)
        task = np.empty((n, n_members))
        gscores = np.empty((n, n_members, len(names)))
        for i, (rec, members) in enumerate(records):
            if rec.group not in names:
                raise UnknownGroup(
                    f"sample {rec.sample_id!r}: group {rec.group!r} is not in "
                    f"the declared group set {names}"
                )
            if rec.split not in SPLITS:
                raise MalformedFile(
                    f"sample {rec.sample_id!r}: invalid split {rec.split!r}"
                )
            ids = sorted(m.member_id for m in members)
            if ids != list(range(n_members)):
                raise InvariantViolation(
                    f"sample {rec.sample_id!r}: member ids {ids} are not "
                    f"exactly 0..{n_members - 1}"
                )
            sample_ids.append(rec.sample_id)
            labels[i] = -1 if rec.label is None else rec.label
            groups[i] = names.index(rec.group)
            splits[i] = SPLITS.index(rec.split)
            for m in sorted(members, key=lambda s: s.member_id):
                task[i, m.member_id] = m.task_score
                gscores[i, m.member_id] = m.group_scores
        return cls(names, sample_ids, labels, groups, splits, task, gscores)

    def _validate(self):
        n = self.n_samples
        if n == 0:
            raise InvariantViolation("a score table needs at least one sample")
        if len(set(self.sample_ids)) != n:
            raise InvariantViolation("duplicate sample_id")
        if not self.group_names:
            raise InvariantViolation("group set must not be empty")
        if len(set(self.group_names)) != len(self.group_names):
            raise InvariantViolation("duplicate group names")
        if self.task.shape != (n, self.n_members) or self.gscores.shape != (
                n, self.n_members, self.n_groups):
            raise InvariantViolation("score array shapes are inconsistent")
        if not np.isin(self.labels, (-1, 0, 1)).all():
            raise InvariantViolation("labels must be 0, 1, or missing")
        labeled = self.labels[self.labels >= 0]
        if len(labeled) and not ((labeled == 1).any() and (labeled == 0).any()):
            raise InvariantViolation(
                "labeled samples must include at least one positive and one "
                "negative"
            )
        if self.groups.min(initial=0) < 0 or \
                self.groups.max(initial=0) >= self.n_groups:
            raise InvariantViolation("group index out of range")
        if np.isnan(self.task).any() or ((self.task < 0) | (self.task > 1)).any():
            raise InvariantViolation("task scores must lie in [0, 1]")
        if np.isnan(self.gscores).any() or \
                ((self.gscores < 0) | (self.gscores > 1)).any():
            raise InvariantViolation("group scores must lie in [0, 1]")
        sums = self.gscores.sum(axis=2)
        if (np.abs(sums - 1.0) > _SUM_TOLERANCE).any():
            raise InvariantViolation(
                f"group scores must sum to 1 within {_SUM_TOLERANCE}"
            )


# -- CSV round trip -----------------------------------------------------------

def _format_float(x: float) -> str:
    return repr(float(x))


def load_score_table(path) -> ScoreTable:
    """Load a score table from its one-row-per-(sample, member) CSV form.

    Structural problems (missing file, bad header, wrong arity,
    unparseable fields, contradictory sample metadata) raise MalformedFile;
    well-formed content that breaks a domain invariant raises
    InvariantViolation or UnknownGroup.
    """
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise MalformedFile(f"{path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedFile(f"{path}: empty file") from None
        if tuple(header[: len(_FIXED_COLUMNS)]) != _FIXED_COLUMNS:
            raise MalformedFile(
                f"{path}: header must start with {','.join(_FIXED_COLUMNS)}"
            )
        gcols = header[len(_FIXED_COLUMNS):]
        if not gcols or any(not c.startswith(_GROUP_SCORE_PREFIX) for c in gcols):
            raise MalformedFile(
                f"{path}: expected one or more {_GROUP_SCORE_PREFIX}<name> "
                "columns after the fixed columns"
            )
        group_names = tuple(c[len(_GROUP_SCORE_PREFIX):] for c in gcols)
        if len(set(group_names)) != len(group_names):
            raise MalformedFile(f"{path}: duplicate group score columns")

        arity = len(header)
        meta: dict[str, tuple[str, str, str]] = {}
        rows: dict[str, dict[int, tuple[float, tuple[float, ...]]]] = {}
        order: list[str] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != arity:
                raise MalformedFile(
                    f"{path}:{lineno}: expected {arity} fields, got {len(row)}"
                )
            sid, split, label_s, group, member_s, task_s = row[:6]
            if not sid:
                raise MalformedFile(f"{path}:{lineno}: empty sample_id")
            if split not in SPLITS:
                raise MalformedFile(f"{path}:{lineno}: invalid split {split!r}")
            try:
                member_id = int(member_s)
                task_score = float(task_s)
                gs = tuple(float(v) for v in row[6:])
            except ValueError as exc:
                raise MalformedFile(f"{path}:{lineno}: {exc}") from None
            if member_id < 0:
                raise MalformedFile(f"{path}:{lineno}: negative member_id")
            if label_s not in ("", "0", "1"):
                raise InvariantViolation(
                    f"{path}:{lineno}: label must be 0, 1, or empty, "
                    f"got {label_s!r}"
                )
            if group not in group_names:
                raise UnknownGroup(
                    f"{path}:{lineno}: group {group!r} is not in the declared "
                    f"group set {group_names}"
                )
            if sid in meta:
                if meta[sid] != (split, label_s, group):
                    raise MalformedFile(
                        f"{path}:{lineno}: sample {sid!r} has contradictory "
                        "split/label/group across rows"
                    )
            else:
                meta[sid] = (split, label_s, group)
                rows[sid] = {}
                order.append(sid)
            if member_id in rows[sid]:
                raise InvariantViolation(
                    f"{path}:{lineno}: duplicate member {member_id} for "
                    f"sample {sid!r}"
                )
            rows[sid][member_id] = (task_score, gs)

    if not order:
        raise MalformedFile(f"{path}: no data rows")
    n_members = max(max(r) for r in rows.values()) + 1
    n, g = len(order), len(group_names)
    labels = np.empty(n, np.int8)
    groups = np.empty(n, np.int32)
    splits = np.empty(n, np.int8)
    task = np.empty((n, n_members))
    gscores = np.empty((n, n_members, g))
    for i, sid in enumerate(order):
        split, label_s, group = meta[sid]
        member_rows = rows[sid]
        if sorted(member_rows) != list(range(n_members)):
            raise InvariantViolation(
                f"{path}: sample {sid!r} has member ids "
                f"{sorted(member_rows)}, expected 0..{n_members - 1}"
            )
        labels[i] = -1 if label_s == "" else int(label_s)
        groups[i] = group_names.index(group)
        splits[i] = SPLITS.index(split)
        for m, (ts, gs) in member_rows.items():
            task[i, m] = ts
            gscores[i, m] = gs
    return ScoreTable(group_names, order, labels, groups, splits, task, gscores)


def save_score_table(table: ScoreTable, path) -> None:
    """Write a table in the CSV interchange format, bit round-trippable."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(_FIXED_COLUMNS)
                        + [_GROUP_SCORE_PREFIX + g for g in table.group_names])
        for rec, members in table.records():
            label_s = "" if rec.label is None else str(rec.label)
            for m in members:
                writer.writerow(
                    [rec.sample_id, rec.split, label_s, rec.group,
                     m.member_id, _format_float(m.task_score)]
                    + [_format_float(v) for v in m.group_scores]
                )


# -- fold assignment ----------------------------------------------------------

@dataclass(frozen=True)
class FoldAssignment:
    """Partition of the non-test samples into folds, one per member."""

    n_folds: int
    fold_of: Mapping[str, int]
    seed: int | None = None

    def fold_vector(self, table: ScoreTable) -> np.ndarray:
        """Per-sample fold index aligned with the table; -1 where unassigned."""
        return np.asarray(
            [self.fold_of.get(sid, -1) for sid in table.sample_ids],
            dtype=np.int32,
        )


def stratified_kfold(table: ScoreTable, k: int, seed: int) -> FoldAssignment:
    """Assign every non-test sample to one of ``k`` folds, stratified by
    (label, group) cell.

    Within each cell the samples are shuffled and dealt round-robin from a
    random starting fold, so per-cell fold sizes differ by at most one.
    Cells smaller than ``k`` leave some folds without that stratum; this is
    reported as a KTooLarge warning, not an error.
    """
    if k < 1:
        raise ValueError("fold count must be at least 1")
    nontest = table.nontest_indices()
    if len(nontest) == 0:
        raise EmptyCell("no non-test samples to assign")
    labels = table.labels[nontest]
    if (labels < 0).any():
        raise InvariantViolation(
            "fold assignment requires labels on all non-test samples"
        )
    rng = np.random.default_rng(seed)
    fold_of: dict[str, int] = {}
    for g_idx, g_name in enumerate(table.group_names):
        for label in (1, 0):
            cell = nontest[(table.groups[nontest] == g_idx)
                           & (table.labels[nontest] == label)]
            if len(cell) == 0:
                raise EmptyCell(
                    f"cell (group={g_name!r}, label={label}) has no non-test "
                    "samples"
                )
            if len(cell) < k:
                import warnings

                warnings.warn(
                    f"cell (group={g_name!r}, label={label}) has "
                    f"{len(cell)} samples, fewer than k={k}; some folds "
                    "will miss this stratum",
                    KTooLarge,
                )
            perm = rng.permutation(len(cell))
            offset = int(rng.integers(k))
            for pos, cell_pos in enumerate(perm):
                fold_of[table.sample_ids[cell[cell_pos]]] = (pos + offset) % k
    return FoldAssignment(n_folds=k, fold_of=fold_of, seed=seed)


def save_folds(assignment: FoldAssignment, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "fold"])
        for sid, fold in assignment.fold_of.items():
            writer.writerow([sid, fold])


def load_folds(path) -> FoldAssignment:
    fold_of: dict[str, int] = {}
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise MalformedFile(f"{path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["sample_id", "fold"]:
            raise MalformedFile(f"{path}: expected header sample_id,fold")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise MalformedFile(f"{path}:{lineno}: expected 2 fields")
            sid, fold_s = row
            try:
                fold = int(fold_s)
            except ValueError:
                raise MalformedFile(
                    f"{path}:{lineno}: fold must be an integer"
                ) from None
            if fold < 0:
                raise MalformedFile(f"{path}:{lineno}: negative fold")
            if sid in fold_of:
                raise MalformedFile(f"{path}:{lineno}: duplicate sample {sid!r}")
            fold_of[sid] = fold
    if not fold_of:
        raise MalformedFile(f"{path}: no fold assignments")
    return FoldAssignment(n_folds=max(fold_of.values()) + 1, fold_of=fold_of)


# -- synthetic generation -------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    """Configuration for the synthetic score generator.

    Per (group, label) cell sizes come from ``positives`` / ``negatives``.
    ``recall`` and ``specificity`` plant each member's probability of
    scoring on the correct side of 0.5, either per group (scalar) or per
    group and member (sequence of length ``n_members``).

    Two score mechanisms are supported. ``bernoulli`` draws correctness
    directly and emits fixed scores 0.75 / 0.25; ``latent`` draws scores
    from a normal with spread ``sigma`` whose mean is placed so the planted
    correctness probability is exact, then clips to [0, 1] (clipping cannot
    move a score across 0.5). ``correlation`` mixes a shared per-sample
    standard normal into every member's latent noise. ``group_score_mix``
    blends the true-group one-hot vector with a symmetric Dirichlet draw to
    mimic imperfect group prediction; 0 keeps exact one-hot scores.
    """

    group_names: tuple[str, ...]
    n_members: int
    positives: Mapping[str, int]
    negatives: Mapping[str, int]
    recall: float | Mapping[str, object] = 0.8
    specificity: float | Mapping[str, object] = 0.8
    mode: str = "latent"
    sigma: float = 0.15
    correlation: float = 0.0
    group_score_mix: float = 0.0
    test_fraction: float = 0.25
    seed: int = 0


def _prob_matrix(value, group_names, n_members, what) -> np.ndarray:
    """Normalize a planted-probability spec to a (n_groups, n_members) array."""
    out = np.empty((len(group_names), n_members))
    if isinstance(value, Mapping):
        missing = [g for g in group_names if g not in value]
        if missing:
            raise InvalidConfig(f"{what}: missing groups {missing}")
        for i, g in enumerate(group_names):
            out[i] = np.asarray(value[g], dtype=float)
    else:
        out[:] = float(value)
    if ((out < 0) | (out > 1)).any() or np.isnan(out).any():
        raise InvalidConfig(f"{what}: probabilities must lie in [0, 1]")
    return out


def synthesize(config: SynthConfig) -> ScoreTable:
    """Generate a score table with known per-member competence.

    Deterministic for a fixed seed: cells are generated in declared group
    order, positives before negatives, with a fixed draw order inside each
    cell (split assignment, then scores, then group scores).
    """
    names = tuple(config.group_names)
    if not names:
        raise InvalidConfig("group_names must not be empty")
    if config.n_members < 1:
        raise InvalidConfig("n_members must be at least 1")
    if config.mode not in ("latent", "bernoulli"):
        raise InvalidConfig(f"unknown mode {config.mode!r}")
    if not 0.0 <= config.test_fraction < 1.0:
        raise InvalidConfig("test_fraction must lie in [0, 1)")
    if not 0.0 <= config.correlation < 1.0:
        raise InvalidConfig("correlation must lie in [0, 1)")
    if not 0.0 <= config.group_score_mix < 1.0:
        raise InvalidConfig("group_score_mix must lie in [0, 1)")
    if config.sigma <= 0.0:
        raise InvalidConfig("sigma must be positive")
    for mapping, what in ((config.positives, "positives"),
                          (config.negatives, "negatives")):
        for g in names:
            if mapping.get(g, 0) < 1:
                raise InvalidConfig(f"{what}[{g!r}] must be at least 1")

    m = config.n_members
    recall = _prob_matrix(config.recall, names, m, "recall")
    specificity = _prob_matrix(config.specificity, names, m, "specificity")
    rng = np.random.default_rng(config.seed)

    ids: list[str] = []
    labels_l, groups_l, splits_l, task_l, gs_l = [], [], [], [], []
    counter = 0
    for g_idx, g in enumerate(names):
        for label in (1, 0):
            size = (config.positives if label else config.negatives)[g]
            probs = (recall if label else specificity)[g_idx]  # (m,)

            n_test = int(round(config.test_fraction * size))
            split = np.full(size, SPLITS.index("validation"), np.int8)
            split[rng.permutation(size)[:n_test]] = SPLITS.index("test")

            if config.mode == "bernoulli":
                correct = rng.random((size, m)) < probs
                toward_positive = correct == bool(label)
                scores = np.where(toward_positive, 0.75, 0.25)
            else:
                clamped = np.clip(probs, 1e-12, 1.0 - 1e-12)
                z = np.array([norm_ppf(p) for p in clamped])
                sign = 1.0 if label else -1.0
                mean = 0.5 + sign * config.sigma * z
                shared = rng.standard_normal((size, 1))
                own = rng.standard_normal((size, m))
                rho = config.correlation
                eps = np.sqrt(rho) * shared + np.sqrt(1.0 - rho) * own
                scores = np.clip(mean + config.sigma * eps, 0.0, 1.0)

            onehot = np.zeros(len(names))
            onehot[g_idx] = 1.0
            if config.group_score_mix > 0.0:
                noise = rng.dirichlet(np.ones(len(names)), size=(size, m))
                gs = ((1.0 - config.group_score_mix) * onehot
                      + config.group_score_mix * noise)
                gs /= gs.sum(axis=2, keepdims=True)
            else:
                gs = np.broadcast_to(onehot, (size, m, len(names))).copy()

            ids.extend(f"s{counter + i:06d}" for i in range(size))
            counter += size
            labels_l.append(np.full(size, label, np.int8))
            groups_l.append(np.full(size, g_idx, np.int32))
            splits_l.append(split)
            task_l.append(scores)
            gs_l.append(gs)

    return ScoreTable(
        names,
        ids,
        np.concatenate(labels_l),
        np.concatenate(groups_l),
        np.concatenate(splits_l),
        np.concatenate(task_l),
        np.concatenate(gs_l),
    )
