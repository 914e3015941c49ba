"""Gender-bias audit harness for reference-free translation quality scorers."""

__version__ = "0.1.0"

from .corpus import (
    EditDiff,
    EvaluationInstance,
    LanguagePair,
    load_dataset,
    save_native,
    validate_minimal_edit,
)
from .biasstats import (
    BiasSummary,
    GroupOutcome,
    Judgment,
    PhiUndefined,
    RatioSummary,
    aggregate_ratio,
    bootstrap_phi_test,
    error_rates,
    judge_instance,
    phi,
    score_ratio,
    tie_rate,
)
from .downstream import (
    CandidateSet,
    DeltaM,
    QualityBand,
    RetentionCurve,
    delta_m,
    gender_match,
    gt_filter,
    quality_band,
    rerank,
    retention_curve,
    sentence_bleu,
    unique_word_sets,
    wilcoxon_signed_rank,
)
from .scoring import (
    BiasedScorer,
    ConstantScorer,
    ContextStrategy,
    HashScorer,
    ScaleDescriptor,
    ScoreRecord,
    ScoreRequest,
    build_scored_inputs,
    normalize_score,
    score_batch,
    translate_batch,
)
from .report import (
    AuditConfig,
    AuditReport,
    ParetoPoint,
    emit,
    load_report,
    pareto_points,
    run_audit,
)
