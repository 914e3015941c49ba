"""Audit orchestration and report assembly.

run_audit drives corpus -> scoring -> biasstats for one (dataset, scorer,
strategy) configuration and returns a report with one cell per (language
pair, condition), plus unweighted cross-language means per condition.
Reports serialize to a structured JSON document (lossless round-trip),
CSV tables, or markdown tables whose columns mirror the audit statistics.

The same report container carries the outputs of the downstream
simulations (retention curves, reranking summaries, filter statistics) so
every command shares one emit path.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .biasstats import (
    BiasSummary,
    GroupOutcome,
    PhiUndefined,
    RatioSummary,
    aggregate_ratio,
    bootstrap_phi_test,
    error_rates,
    group_error_rate,
    judge_instance,
    phi,
    score_ratio,
    tie_rate,
)
from .cache import ScoreCache
from .corpus import CONDITION_LABELS, UNAMBIGUOUS_CONDITIONS, load_dataset
from .downstream import DeltaM, FilterStats, BandStats, RetentionCurve
from .errors import DatasetError, NotEstimableError
from .scoring import (
    ContextStrategy,
    ScaleDescriptor,
    ScoreRecord,
    build_scored_inputs,
    is_clamped,
    normalize_score,
    parse_scorer_spec,
    parse_translator_spec,
    request_id,
    score_batch,
)


@dataclass
class AuditConfig:
    dataset: str
    schema: str
    scorer: str
    seed: int
    condition: str | None = None
    scale: ScaleDescriptor | None = None
    strategy: ContextStrategy = field(default_factory=ContextStrategy)
    translator: str | None = None
    bootstrap_resamples: int = 1000
    bootstrap_two_sided: bool = False
    cache_dir: str | None = None
    timeout_secs: float = 30.0
    retries: int = 0


@dataclass(frozen=True)
class RunMetadata:
    scorer_name: str
    dataset: str
    schema: str
    condition: str | None
    strategy: str
    separator: str
    scale: str
    seed: int
    bootstrap_resamples: int
    bootstrap_two_sided: bool
    translator: str | None
    timestamp: str


@dataclass(frozen=True)
class AuditCell:
    language_pair: str
    condition: str
    n_instances: int
    summary: BiasSummary
    group_f: GroupOutcome | None = None
    group_m: GroupOutcome | None = None
    bootstrap_skipped: int | None = None


@dataclass(frozen=True)
class AggregateCell:
    """Unweighted mean of per-language cells for one condition."""

    condition: str
    languages: tuple[str, ...]
    phi_languages: tuple[str, ...]
    mean_er_total: float | None
    mean_er_f: float | None
    mean_er_m: float | None
    mean_phi: float | None
    mean_tie_rate: float | None
    mean_ratio: float | None


@dataclass(frozen=True)
class QadItem:
    instance_id: str
    best_index: int
    best_score: float
    label: str


@dataclass(frozen=True)
class QadSummary:
    delta: DeltaM
    fold_case: bool
    per_set: tuple[QadItem, ...]


@dataclass(frozen=True)
class ParetoPoint:
    metric_name: str
    er_total: float
    gap: float
    on_frontier: bool


@dataclass
class AuditReport:
    metadata: RunMetadata
    cells: tuple[AuditCell, ...] = ()
    aggregates: tuple[AggregateCell, ...] = ()
    retention: RetentionCurve | None = None
    qad: QadSummary | None = None
    filter_stats: FilterStats | None = None
    n_clamped: int = 0
    n_zero_denominator: int = 0
    cache_hits: int = 0
    cache_misses: int = 0


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


def _score_with_cache(scorer, requests, scale, cache_dir):
    """Batch-score requests, consulting the persistent cache first.

    Returns (records by request id, hits, misses).
    """
    cache = ScoreCache(cache_dir, scorer.name) if cache_dir else None
    hits = misses = 0
    records: list[ScoreRecord] = []
    if cache is None:
        if requests:
            records = score_batch(scorer, requests, scale)
        misses = len(requests)
    else:
        pending = [r for r in requests if cache.get(r.source_text, r.hypothesis_text) is None]
        hits = len(requests) - len(pending)
        misses = len(pending)
        if pending:
            fresh = score_batch(scorer, pending, scale)
            cache.add_many(
                (r.source_text, r.hypothesis_text, rec.raw) for r, rec in zip(pending, fresh)
            )
        for r in requests:
            raw = cache.get(r.source_text, r.hypothesis_text)
            records.append(ScoreRecord(id=r.id, raw=raw, normalized=normalize_score(raw, scale)))
    return {rec.id: rec for rec in records}, hits, misses


def _scored_records(config: AuditConfig, instances):
    """Score every (instance, variant) pair of an audit run.

    Returns (records by request id, scorer name, scale, hits, misses).
    """
    scorer = parse_scorer_spec(config.scorer, config.timeout_secs, config.retries)
    translator = None
    if config.strategy.kind == "concat_translated_context":
        if not config.translator:
            raise ValueError("strategy concat_translated_context requires --translator")
        translator = parse_translator_spec(config.translator, config.timeout_secs)
    scale = config.scale or scorer.declared_scale
    requests = []
    for inst in instances:
        for label in inst.contrast_labels():
            requests.append(build_scored_inputs(inst, label, config.strategy, translator))
    records, hits, misses = _score_with_cache(scorer, requests, scale, config.cache_dir)
    return records, scorer.name, scale, hits, misses


def _cell_from_instances(insts, records, config: AuditConfig) -> AuditCell:
    condition = insts[0].condition
    lang = str(insts[0].language_pair)
    if condition in UNAMBIGUOUS_CONDITIONS:
        judgments = []
        for inst in insts:
            correct = records[request_id(inst.id, inst.correct_variant)].normalized
            incorrect = records[request_id(inst.id, inst.incorrect_variant())].normalized
            judgments.append((inst.source_group, judge_instance(inst, correct, incorrect)))
        group_f, group_m, er_total = error_rates(judgments)
        er_f = group_error_rate(group_f)
        er_m = group_error_rate(group_m)
        phi_value = phi(er_f, er_m) if er_f is not None and er_m is not None else None
        try:
            boot = bootstrap_phi_test(
                judgments,
                resamples=config.bootstrap_resamples,
                seed=config.seed,
                two_sided=config.bootstrap_two_sided,
            )
            phi_p, skipped = boot.p_value, boot.n_skipped
        except NotEstimableError:
            phi_p, skipped = None, None
        summary = BiasSummary(
            er_total=er_total,
            er_f=er_f,
            er_m=er_m,
            phi=phi_value,
            phi_p_value=phi_p,
            tie_rate=tie_rate(j for _, j in judgments),
            ratio=None,
        )
        return AuditCell(lang, condition, len(insts), summary, group_f, group_m, skipped)
    numerator_label, denominator_label = CONDITION_LABELS[condition]
    ratios = []
    for inst in insts:
        num = records[request_id(inst.id, numerator_label)].normalized
        den = records[request_id(inst.id, denominator_label)].normalized
        ratios.append(score_ratio(num, den))
    summary = BiasSummary(
        er_total=None,
        er_f=None,
        er_m=None,
        phi=None,
        phi_p_value=None,
        tie_rate=None,
        ratio=aggregate_ratio(ratios),
    )
    return AuditCell(lang, condition, len(insts), summary)


def _mean(values) -> float | None:
    values = [v for v in values if v is not None]
    return sum(values) / len(values) if values else None


def _aggregate(cells) -> tuple[AggregateCell, ...]:
    by_condition: dict[str, list[AuditCell]] = {}
    for cell in cells:
        by_condition.setdefault(cell.condition, []).append(cell)
    out = []
    for condition in sorted(by_condition):
        group = by_condition[condition]
        phi_cells = [c for c in group if isinstance(c.summary.phi, float)]
        out.append(
            AggregateCell(
                condition=condition,
                languages=tuple(c.language_pair for c in group),
                phi_languages=tuple(c.language_pair for c in phi_cells),
                mean_er_total=_mean(c.summary.er_total for c in group),
                mean_er_f=_mean(c.summary.er_f for c in group),
                mean_er_m=_mean(c.summary.er_m for c in group),
                mean_phi=_mean(c.summary.phi for c in phi_cells),
                mean_tie_rate=_mean(c.summary.tie_rate for c in group),
                mean_ratio=_mean(
                    c.summary.ratio.mean for c in group if c.summary.ratio is not None
                ),
            )
        )
    return tuple(out)


def _metadata(config: AuditConfig, scorer_name: str, scale: ScaleDescriptor) -> RunMetadata:
    return RunMetadata(
        scorer_name=scorer_name,
        dataset=str(config.dataset),
        schema=config.schema,
        condition=config.condition,
        strategy=config.strategy.kind,
        separator=config.strategy.separator,
        scale=str(scale),
        seed=config.seed,
        bootstrap_resamples=config.bootstrap_resamples,
        bootstrap_two_sided=config.bootstrap_two_sided,
        translator=config.translator,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )


def _load_filtered(config: AuditConfig):
    instances = load_dataset(config.dataset, config.schema)
    if config.condition:
        instances = [i for i in instances if i.condition == config.condition]
    if not instances:
        raise DatasetError("no instances to audit after filtering")
    return instances


def run_audit(config: AuditConfig) -> AuditReport:
    """Score, judge, and aggregate one full audit run."""
    instances = _load_filtered(config)
    records, scorer_name, scale, hits, misses = _scored_records(config, instances)

    grouped: dict[tuple[str, str], list] = {}
    for inst in instances:
        grouped.setdefault((str(inst.language_pair), inst.condition), []).append(inst)
    cells = tuple(
        _cell_from_instances(grouped[key], records, config) for key in sorted(grouped)
    )
    n_clamped = sum(1 for rec in records.values() if is_clamped(rec.raw, scale))
    n_zero_den = sum(
        c.summary.ratio.n_excluded_zero_denominator for c in cells if c.summary.ratio is not None
    )
    return AuditReport(
        metadata=_metadata(config, scorer_name, scale),
        cells=cells,
        aggregates=_aggregate(cells),
        n_clamped=n_clamped,
        n_zero_denominator=n_zero_den,
        cache_hits=hits,
        cache_misses=misses,
    )


def run_filter_sim(config: AuditConfig, thresholds) -> AuditReport:
    """Retention-by-threshold simulation over the two variants of each instance."""
    from .downstream import retention_curve

    instances = _load_filtered(config)
    conditions = {inst.condition for inst in instances}
    if len(conditions) > 1:
        raise DatasetError(
            "filter-sim needs a single condition; pass --condition to select one"
        )
    records, scorer_name, scale, hits, misses = _scored_records(config, instances)
    labels = CONDITION_LABELS[next(iter(conditions))]
    scores_by_group = {
        label: [records[request_id(inst.id, label)].normalized for inst in instances]
        for label in labels
    }
    curve = retention_curve(scores_by_group, thresholds)
    n_clamped = sum(1 for rec in records.values() if is_clamped(rec.raw, scale))
    return AuditReport(
        metadata=_metadata(config, scorer_name, scale),
        retention=curve,
        n_clamped=n_clamped,
        cache_hits=hits,
        cache_misses=misses,
    )


@dataclass(frozen=True)
class QadInput:
    """One candidate set awaiting scores: parsed from the line-delimited file."""

    instance_id: str
    source: str
    candidates: tuple[str, ...]
    f_unique: frozenset[str]
    m_unique: frozenset[str]


def run_qad(config: AuditConfig, inputs: list[QadInput], fold_case: bool = False) -> AuditReport:
    """Rerank candidate sets by score and account for gender representation."""
    from .downstream import CandidateSet, delta_m, gender_match, rerank
    from .scoring import ScoreRequest

    if not inputs:
        raise DatasetError("no candidate sets to rerank")
    scorer = parse_scorer_spec(config.scorer, config.timeout_secs, config.retries)
    scale = config.scale or scorer.declared_scale

    requests = [
        ScoreRequest(id=f"{item.instance_id}#cand{i}", source_text=item.source, hypothesis_text=cand)
        for item in inputs
        for i, cand in enumerate(item.candidates)
    ]
    records, hits, misses = _score_with_cache(scorer, requests, scale, config.cache_dir)

    items = []
    labels = []
    for item in inputs:
        scores = tuple(
            records[f"{item.instance_id}#cand{i}"].normalized
            for i in range(len(item.candidates))
        )
        cset = CandidateSet(
            instance_id=item.instance_id,
            candidates=item.candidates,
            scores=scores,
            f_unique_words=item.f_unique,
            m_unique_words=item.m_unique,
        )
        best_index, best_text = rerank(cset)
        label = gender_match(best_text, item.f_unique, item.m_unique, fold_case=fold_case)
        labels.append(label)
        items.append(QadItem(item.instance_id, best_index, scores[best_index], label))
    summary = QadSummary(delta=delta_m(labels), fold_case=fold_case, per_set=tuple(items))
    n_clamped = sum(1 for rec in records.values() if is_clamped(rec.raw, scale))
    return AuditReport(
        metadata=_metadata(config, scorer.name, scale),
        qad=summary,
        n_clamped=n_clamped,
        cache_hits=hits,
        cache_misses=misses,
    )


# ---------------------------------------------------------------------------
# Pareto frontier
# ---------------------------------------------------------------------------


def pareto_points(points) -> list[ParetoPoint]:
    """Flag non-dominated points under joint (error rate, gap) minimization.

    A point is dominated if some other point is no worse on both
    coordinates and strictly better on at least one; coordinate duplicates
    therefore land on the frontier together. Order is preserved.
    """
    triples = [(str(name), float(er), float(gap)) for name, er, gap in points]
    for _, er, gap in triples:
        if gap < 0:
            raise ValueError("gaps must be >= 0")
    out = []
    for i, (name, er, gap) in enumerate(triples):
        dominated = any(
            (other_er <= er and other_gap <= gap and (other_er < er or other_gap < gap))
            for j, (_, other_er, other_gap) in enumerate(triples)
            if j != i
        )
        out.append(ParetoPoint(name, er, gap, not dominated))
    return out


def gap_from_parity(bias_value: float) -> float:
    """Distance of a ratio-style bias statistic from its parity value 1."""
    return abs(1.0 - bias_value)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _enc_phi(value):
    if isinstance(value, PhiUndefined):
        return value.value
    return value


def _dec_phi(value):
    if isinstance(value, str):
        return PhiUndefined(value)
    return value


def _enc_ratio(rs: RatioSummary | None):
    if rs is None:
        return None
    return {
        "n_used": rs.n_used,
        "n_excluded_zero_denominator": rs.n_excluded_zero_denominator,
        "mean": rs.mean,
        "ci95_low": rs.ci95_low,
        "ci95_high": rs.ci95_high,
        "t_p_value": rs.t_p_value,
        "direction": rs.direction,
        "log_t_p_value": rs.log_t_p_value,
    }


def _dec_ratio(d) -> RatioSummary | None:
    if d is None:
        return None
    return RatioSummary(**d)


def _enc_group(g: GroupOutcome | None):
    if g is None:
        return None
    return {"group": g.group, "n": g.n, "errors": g.errors, "ties": g.ties}


def _dec_group(d) -> GroupOutcome | None:
    return None if d is None else GroupOutcome(**d)


def _enc_cell(cell: AuditCell):
    s = cell.summary
    return {
        "language_pair": cell.language_pair,
        "condition": cell.condition,
        "n_instances": cell.n_instances,
        "summary": {
            "er_total": s.er_total,
            "er_f": s.er_f,
            "er_m": s.er_m,
            "phi": _enc_phi(s.phi),
            "phi_p_value": s.phi_p_value,
            "tie_rate": s.tie_rate,
            "ratio": _enc_ratio(s.ratio),
        },
        "group_f": _enc_group(cell.group_f),
        "group_m": _enc_group(cell.group_m),
        "bootstrap_skipped": cell.bootstrap_skipped,
    }


def _dec_cell(d) -> AuditCell:
    s = d["summary"]
    summary = BiasSummary(
        er_total=s["er_total"],
        er_f=s["er_f"],
        er_m=s["er_m"],
        phi=_dec_phi(s["phi"]),
        phi_p_value=s["phi_p_value"],
        tie_rate=s["tie_rate"],
        ratio=_dec_ratio(s["ratio"]),
    )
    return AuditCell(
        language_pair=d["language_pair"],
        condition=d["condition"],
        n_instances=d["n_instances"],
        summary=summary,
        group_f=_dec_group(d["group_f"]),
        group_m=_dec_group(d["group_m"]),
        bootstrap_skipped=d["bootstrap_skipped"],
    )


def _enc_retention(curve: RetentionCurve | None):
    if curve is None:
        return None
    return {
        "thresholds": list(curve.thresholds),
        "retained_fraction_by_group": {
            g: list(v) for g, v in curve.retained_fraction_by_group.items()
        },
        "gap": None if curve.gap is None else list(curve.gap),
    }


def _dec_retention(d) -> RetentionCurve | None:
    if d is None:
        return None
    return RetentionCurve(
        thresholds=tuple(d["thresholds"]),
        retained_fraction_by_group={
            g: tuple(v) for g, v in d["retained_fraction_by_group"].items()
        },
        gap=None if d["gap"] is None else tuple(d["gap"]),
    )


def _enc_qad(q: QadSummary | None):
    if q is None:
        return None
    return {
        "delta_m_percentage_points": q.delta.percentage_points,
        "count_f": q.delta.count_f,
        "count_m": q.delta.count_m,
        "count_both": q.delta.count_both,
        "count_none": q.delta.count_none,
        "n": q.delta.n,
        "fold_case": q.fold_case,
        "per_set": [
            {
                "instance_id": it.instance_id,
                "best_index": it.best_index,
                "best_score": it.best_score,
                "label": it.label,
            }
            for it in q.per_set
        ],
    }


def _dec_qad(d) -> QadSummary | None:
    if d is None:
        return None
    delta = DeltaM(
        percentage_points=d["delta_m_percentage_points"],
        count_f=d["count_f"],
        count_m=d["count_m"],
        count_both=d["count_both"],
        count_none=d["count_none"],
        n=d["n"],
    )
    per_set = tuple(
        QadItem(it["instance_id"], it["best_index"], it["best_score"], it["label"])
        for it in d["per_set"]
    )
    return QadSummary(delta=delta, fold_case=d["fold_case"], per_set=per_set)


def _enc_filter_stats(fs: FilterStats | None):
    if fs is None:
        return None
    return {
        "n_pairs_in": fs.n_pairs_in,
        "n_f_inflection_ok": fs.n_f_inflection_ok,
        "n_m_inflection_ok": fs.n_m_inflection_ok,
        "n_pairs_stage1": fs.n_pairs_stage1,
        "n_pairs_stage2": fs.n_pairs_stage2,
        "bands": [
            {
                "band": b.band,
                "n_f_stage1": b.n_f_stage1,
                "n_m_stage1": b.n_m_stage1,
                "n_pairs_stage2": b.n_pairs_stage2,
                "wilcoxon_p": b.wilcoxon_p,
            }
            for b in fs.bands
        ],
    }


def _dec_filter_stats(d) -> FilterStats | None:
    if d is None:
        return None
    return FilterStats(
        n_pairs_in=d["n_pairs_in"],
        n_f_inflection_ok=d["n_f_inflection_ok"],
        n_m_inflection_ok=d["n_m_inflection_ok"],
        n_pairs_stage1=d["n_pairs_stage1"],
        n_pairs_stage2=d["n_pairs_stage2"],
        bands=tuple(BandStats(**b) for b in d["bands"]),
    )


def report_to_dict(report: AuditReport) -> dict:
    m = report.metadata
    return {
        "metadata": {
            "scorer_name": m.scorer_name,
            "dataset": m.dataset,
            "schema": m.schema,
            "condition": m.condition,
            "strategy": m.strategy,
            "separator": m.separator,
            "scale": m.scale,
            "seed": m.seed,
            "bootstrap_resamples": m.bootstrap_resamples,
            "bootstrap_two_sided": m.bootstrap_two_sided,
            "translator": m.translator,
            "timestamp": m.timestamp,
        },
        "cells": [_enc_cell(c) for c in report.cells],
        "aggregates": [
            {
                "condition": a.condition,
                "languages": list(a.languages),
                "phi_languages": list(a.phi_languages),
                "mean_er_total": a.mean_er_total,
                "mean_er_f": a.mean_er_f,
                "mean_er_m": a.mean_er_m,
                "mean_phi": a.mean_phi,
                "mean_tie_rate": a.mean_tie_rate,
                "mean_ratio": a.mean_ratio,
            }
            for a in report.aggregates
        ],
        "retention": _enc_retention(report.retention),
        "qad": _enc_qad(report.qad),
        "filter_stats": _enc_filter_stats(report.filter_stats),
        "n_clamped": report.n_clamped,
        "n_zero_denominator": report.n_zero_denominator,
        "cache_hits": report.cache_hits,
        "cache_misses": report.cache_misses,
    }


def report_from_dict(d: dict) -> AuditReport:
    m = d["metadata"]
    return AuditReport(
        metadata=RunMetadata(**m),
        cells=tuple(_dec_cell(c) for c in d["cells"]),
        aggregates=tuple(
            AggregateCell(
                condition=a["condition"],
                languages=tuple(a["languages"]),
                phi_languages=tuple(a["phi_languages"]),
                mean_er_total=a["mean_er_total"],
                mean_er_f=a["mean_er_f"],
                mean_er_m=a["mean_er_m"],
                mean_phi=a["mean_phi"],
                mean_tie_rate=a["mean_tie_rate"],
                mean_ratio=a["mean_ratio"],
            )
            for a in d["aggregates"]
        ),
        retention=_dec_retention(d["retention"]),
        qad=_dec_qad(d["qad"]),
        filter_stats=_dec_filter_stats(d["filter_stats"]),
        n_clamped=d["n_clamped"],
        n_zero_denominator=d["n_zero_denominator"],
        cache_hits=d["cache_hits"],
        cache_misses=d["cache_misses"],
    )


FORMATS = ("structured", "csv_tables", "markdown_tables")


def emit(report: AuditReport, format: str) -> bytes:
    """Serialize a report deterministically in the requested format."""
    if format == "structured":
        return (
            json.dumps(report_to_dict(report), ensure_ascii=False, indent=2) + "\n"
        ).encode("utf-8")
    if format == "csv_tables":
        return _emit_csv(report)
    if format == "markdown_tables":
        return _emit_markdown(report)
    raise ValueError(f"unknown format {format!r}, expected one of {FORMATS}")


def load_report(data: bytes) -> AuditReport:
    return report_from_dict(json.loads(data.decode("utf-8")))


def _fmt(value, digits=None) -> str:
    if value is None:
        return ""
    if isinstance(value, PhiUndefined):
        return value.value
    if isinstance(value, float) and digits is not None:
        return f"{value:.{digits}f}"
    return str(value)


def _emit_csv(report: AuditReport) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if report.cells:
        writer.writerow(
            [
                "language_pair",
                "condition",
                "n_instances",
                "er_total",
                "er_f",
                "er_m",
                "phi",
                "phi_p_value",
                "tie_rate",
                "bootstrap_skipped",
                "ratio_mean",
                "ratio_ci95_low",
                "ratio_ci95_high",
                "ratio_t_p_value",
                "ratio_log_t_p_value",
                "ratio_n_used",
                "ratio_n_excluded_zero_denominator",
            ]
        )
        for c in report.cells:
            s = c.summary
            r = s.ratio
            writer.writerow(
                [
                    c.language_pair,
                    c.condition,
                    c.n_instances,
                    _fmt(s.er_total),
                    _fmt(s.er_f),
                    _fmt(s.er_m),
                    _fmt(_enc_phi(s.phi)),
                    _fmt(s.phi_p_value),
                    _fmt(s.tie_rate),
                    _fmt(c.bootstrap_skipped),
                    _fmt(r.mean if r else None),
                    _fmt(r.ci95_low if r else None),
                    _fmt(r.ci95_high if r else None),
                    _fmt(r.t_p_value if r else None),
                    _fmt(r.log_t_p_value if r else None),
                    _fmt(r.n_used if r else None),
                    _fmt(r.n_excluded_zero_denominator if r else None),
                ]
            )
    elif report.retention is not None:
        curve = report.retention
        groups = sorted(curve.retained_fraction_by_group)
        writer.writerow(["threshold", *groups, "gap_m_minus_f"])
        for i, t in enumerate(curve.thresholds):
            row = [t] + [curve.retained_fraction_by_group[g][i] for g in groups]
            row.append("" if curve.gap is None else curve.gap[i])
            writer.writerow(row)
    elif report.qad is not None:
        writer.writerow(["instance_id", "best_index", "best_score", "label"])
        for it in report.qad.per_set:
            writer.writerow([it.instance_id, it.best_index, it.best_score, it.label])
    elif report.filter_stats is not None:
        writer.writerow(["band", "n_f_stage1", "n_m_stage1", "n_pairs_stage2", "wilcoxon_p"])
        for b in report.filter_stats.bands:
            writer.writerow(
                [b.band, b.n_f_stage1, b.n_m_stage1, b.n_pairs_stage2, _fmt(b.wilcoxon_p)]
            )
    return buf.getvalue().encode("utf-8")


def _md_table(header, rows) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join(" --- " for _ in header) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return lines


def _emit_markdown(report: AuditReport) -> bytes:
    lines: list[str] = []
    name = report.metadata.scorer_name
    by_condition: dict[str, list[AuditCell]] = {}
    for cell in report.cells:
        by_condition.setdefault(cell.condition, []).append(cell)
    for condition in sorted(by_condition):
        cells = by_condition[condition]
        lines.append(f"### {condition}")
        lines.append("")
        if condition in UNAMBIGUOUS_CONDITIONS:
            rows = [
                [
                    f"{name} [{c.language_pair}]",
                    _fmt(c.summary.er_total, 4),
                    _fmt(_enc_phi(c.summary.phi), None)
                    if isinstance(c.summary.phi, PhiUndefined)
                    else _fmt(c.summary.phi, 4),
                    _fmt(c.summary.tie_rate, 4),
                    _fmt(c.summary.phi_p_value, 4),
                ]
                for c in cells
            ]
            agg = next((a for a in report.aggregates if a.condition == condition), None)
            if agg is not None:
                rows.append(
                    [
                        f"{name} (mean)",
                        _fmt(agg.mean_er_total, 4),
                        _fmt(agg.mean_phi, 4),
                        _fmt(agg.mean_tie_rate, 4),
                        "",
                    ]
                )
            lines.extend(_md_table(["Metric", "ER", "Φ", "tie_rate", "p"], rows))
        else:
            rows = [
                [
                    f"{name} [{c.language_pair}]",
                    _fmt(c.summary.ratio.mean, 4),
                    _fmt(c.summary.ratio.ci95_low, 4),
                    _fmt(c.summary.ratio.ci95_high, 4),
                    _fmt(c.summary.ratio.t_p_value, 4),
                    _fmt(c.summary.ratio.log_t_p_value, 4),
                ]
                for c in cells
            ]
            agg = next((a for a in report.aggregates if a.condition == condition), None)
            if agg is not None:
                rows.append([f"{name} (mean)", _fmt(agg.mean_ratio, 4), "", "", "", ""])
            lines.extend(
                _md_table(["Metric", "ratio", "ci95_low", "ci95_high", "p", "log_p"], rows)
            )
        lines.append("")
    if report.retention is not None:
        curve = report.retention
        groups = sorted(curve.retained_fraction_by_group)
        lines.append("### retention")
        lines.append("")
        rows = []
        for i, t in enumerate(curve.thresholds):
            row = [f"{t:g}"] + [f"{curve.retained_fraction_by_group[g][i]:.4f}" for g in groups]
            row.append("" if curve.gap is None else f"{curve.gap[i]:.4f}")
            rows.append(row)
        lines.extend(_md_table(["threshold", *groups, "gap"], rows))
        lines.append("")
    if report.qad is not None:
        q = report.qad
        lines.append("### reranking")
        lines.append("")
        lines.append(
            f"delta_M = {q.delta.percentage_points:.2f} points per 100 "
            f"(F {q.delta.count_f}, M {q.delta.count_m}, both {q.delta.count_both}, "
            f"none {q.delta.count_none}, n {q.delta.n})"
        )
        lines.append("")
        rows = [
            [it.instance_id, str(it.best_index), f"{it.best_score:.4f}", it.label]
            for it in q.per_set
        ]
        lines.extend(_md_table(["instance", "best_index", "best_score", "label"], rows))
        lines.append("")
    if report.filter_stats is not None:
        fs = report.filter_stats
        lines.append("### two-stage filter")
        lines.append("")
        lines.append(
            f"pairs in {fs.n_pairs_in}, inflection-correct F {fs.n_f_inflection_ok} / "
            f"M {fs.n_m_inflection_ok}, after stage 1 {fs.n_pairs_stage1}, "
            f"after stage 2 {fs.n_pairs_stage2}"
        )
        lines.append("")
        rows = [
            [
                b.band,
                str(b.n_f_stage1),
                str(b.n_m_stage1),
                str(b.n_pairs_stage2),
                _fmt(b.wilcoxon_p, 4),
            ]
            for b in fs.bands
        ]
        lines.extend(_md_table(["Band", "F", "M", "Retained", "wilcoxon_p"], rows))
        lines.append("")
    return ("\n".join(lines) + "\n").encode("utf-8")
