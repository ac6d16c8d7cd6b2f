"""Exception hierarchy shared by the library and the CLI.

Every error class carries a stable ``exit_code`` so command-line failures are
distinguishable in scripts; the mapping is part of the CLI contract and is
listed in ``fairvote --help``.
"""

from __future__ import annotations


class FairvoteError(Exception):
    """Base class for all fairvote errors."""

    exit_code: int = 1


# -- data ingestion ---------------------------------------------------------

class MalformedFile(FairvoteError):
    """Structurally invalid input file (header, arity, or field syntax)."""

    exit_code = 10


class InvariantViolation(FairvoteError):
    """Well-formed file whose contents break a domain invariant."""

    exit_code = 11


class UnknownGroup(FairvoteError):
    """A group value that is not part of the declared group set."""

    exit_code = 12


class EmptyCell(FairvoteError):
    """A (label, group) stratum required for fold assignment is empty."""

    exit_code = 13


class InvalidConfig(FairvoteError):
    """Synthetic-data configuration with out-of-range parameters."""

    exit_code = 14


class KTooLarge(UserWarning):
    """Fold count exceeds the size of some stratum; assignment proceeds."""


# -- metrics ----------------------------------------------------------------

class LengthMismatch(FairvoteError):
    """Prediction, label, and group vectors disagree in length."""

    exit_code = 20


class NoPositivesAnywhere(FairvoteError):
    """No group has a positive sample, so recall is undefined everywhere."""

    exit_code = 21


# -- policy fitting ---------------------------------------------------------

class EvenResolution(FairvoteError):
    """Grid resolution must be odd so that weight zero is on the grid."""

    exit_code = 30


class DimensionMismatch(FairvoteError):
    """Policy weight vector and per-group score vector disagree in length."""

    exit_code = 31


class EmptyFold(FairvoteError):
    """Fitting fold contains no samples."""

    exit_code = 32


class NoPositives(FairvoteError):
    """Fitting fold contains no positive samples in any group."""

    exit_code = 33


# -- ensembles --------------------------------------------------------------

class FoldMemberMismatch(FairvoteError):
    """Fold count differs from member count; one fold per member required."""

    exit_code = 40


class GroupSetMismatch(FairvoteError):
    """Ensemble and score table declare different group sets."""

    exit_code = 41


# -- competence diagnostics -------------------------------------------------

class EmptyRestriction(FairvoteError):
    """Restriction selects no samples."""

    exit_code = 50


class ZeroMemberError(FairvoteError):
    """Mean member error is zero, so improvement ratios are undefined."""

    exit_code = 51


# -- guarantee calculators --------------------------------------------------

class InvalidAlpha(FairvoteError):
    """Significance level outside (0, 1)."""

    exit_code = 60


class InvalidRate(FairvoteError):
    """Probability-like quantity outside its valid range."""

    exit_code = 61


class EmptyGroups(FairvoteError):
    """Groupwise bound requested with no groups supplied."""

    exit_code = 62


# -- evaluation -------------------------------------------------------------

class EmptyFrontier(FairvoteError):
    """Frontier with no points; area under it is undefined."""

    exit_code = 70


class EmptyTestSet(FairvoteError):
    """Requested evaluation split contains no samples."""

    exit_code = 71
