"""Fairness-guaranteed majority-vote ensembles over per-member scores.

The pipeline: load or synthesize a score table (dataio), fit one fairness
policy per member on its own validation fold (fairfit), combine members by
majority vote (ensemble), then verify the conditions under which the vote
provably preserves or improves groupwise recall (competence, theory) and
summarize the accuracy-fairness trade-off (evaluation).
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as _KERNEL_BACKEND
from .competence import (
    CompetenceCurve,
    GroupwiseCompetence,
    ImprovementReport,
    Restriction,
    competence_curve,
    curve_from_counts,
    default_t_grid,
    groupwise_competence,
    improvement_report,
    per_point_error,
    standard_restrictions,
    wrong_counts,
)
from .dataio import (
    FoldAssignment,
    MemberScores,
    SampleRecord,
    ScoreTable,
    SynthConfig,
    load_folds,
    load_score_table,
    save_folds,
    save_score_table,
    stratified_kfold,
    synthesize,
)
from .ensemble import (
    FairEnsemble,
    VoteRecord,
    build_ensemble,
    load_ensemble,
    majority_vote,
    member_predictions,
    predict,
    save_ensemble,
)
from .evaluation import (
    CONSTANT_POSITIVE,
    BootstrapCI,
    FairAucResult,
    Frontier,
    FrontierBuild,
    FrontierPoint,
    bootstrap_ci,
    build_frontier,
    config_label,
    default_fairness_levels,
    fair_auc,
    fair_auc_selected,
    frontier_from_predictions,
    global_threshold_frontier,
    save_frontier,
)
from .fairfit import (
    FairnessConstraint,
    FitDiagnostics,
    GridSpec,
    MemberPolicy,
    apply_policy,
    fit_member,
    grid_candidates,
    grid_matrix,
)
from .metrics import (
    GroupConfusion,
    GroupCounts,
    MetricReport,
    confusion_by_group,
    metric_report,
)
from .theory import (
    JuryInstance,
    JuryReport,
    ParityBound,
    SizeRequirement,
    jury_distribution,
    min_observed_recall,
    norm_ppf,
    parity_bound,
    verify_jury_competence,
)


def kernel_backend() -> str:
    """Which grid kernel is active: 'compiled' or 'python'."""
    return _KERNEL_BACKEND
