"""Figure rendering for report outputs.

Every command that emits delimited output can also render its figures to
files (--figures DIR). Rendering is file-based and headless; nothing here
feeds back into the statistics.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .downstream import RetentionCurve
from .report import AuditReport, ParetoPoint


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def render_ratio_figure(report: AuditReport, path) -> Path | None:
    """Mean score ratio with 95% CI per (language, condition) cell."""
    cells = [c for c in report.cells if c.summary.ratio and c.summary.ratio.mean is not None]
    if not cells:
        return None
    labels = [f"{c.language_pair}\n{c.condition}" for c in cells]
    means = [c.summary.ratio.mean for c in cells]
    err_low = [m - c.summary.ratio.ci95_low for m, c in zip(means, cells)]
    err_high = [c.summary.ratio.ci95_high - m for m, c in zip(means, cells)]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.0 + 0.8 * len(cells)), 3.5))
    xs = range(len(cells))
    ax.errorbar(xs, means, yerr=[err_low, err_high], fmt="o", capsize=4)
    ax.axhline(1.0, color="gray", linestyle="--", linewidth=1)
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("score ratio")
    ax.set_title(f"{report.metadata.scorer_name}: variant score ratio (parity = 1)")
    return _save(fig, Path(path))


def render_retention_figure(curve: RetentionCurve, path, title: str = "") -> Path:
    """Share of instances scoring at least each threshold, per group."""
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    for group in sorted(curve.retained_fraction_by_group):
        ax.plot(
            curve.thresholds,
            [100.0 * v for v in curve.retained_fraction_by_group[group]],
            label=group,
        )
    ax.set_xlabel("score threshold")
    ax.set_ylabel("retained (%)")
    ax.legend(title="group")
    if title:
        ax.set_title(title)
    return _save(fig, Path(path))


def render_pareto_figure(points: list[ParetoPoint], path) -> Path:
    """Error rate vs. gap from parity, with the non-dominated frontier dashed."""
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    for p in points:
        marker = "o" if p.on_frontier else "x"
        ax.scatter(p.gap, p.er_total, marker=marker)
        ax.annotate(p.metric_name, (p.gap, p.er_total), fontsize=7,
                    xytext=(3, 3), textcoords="offset points")
    frontier = sorted(
        ((p.gap, p.er_total) for p in points if p.on_frontier), key=lambda t: (t[0], t[1])
    )
    if len(frontier) > 1:
        ax.plot([g for g, _ in frontier], [e for _, e in frontier], "--", color="gray")
    ax.set_xlabel("gap from parity")
    ax.set_ylabel("total error rate")
    return _save(fig, Path(path))


def render_match_counts_figure(report: AuditReport, path) -> Path | None:
    """Reranking gender-match label counts."""
    if report.qad is None:
        return None
    d = report.qad.delta
    counts = {"F": d.count_f, "M": d.count_m, "both": d.count_both, "none": d.count_none}
    fig, ax = plt.subplots(figsize=(4.0, 3.0))
    ax.bar(list(counts), list(counts.values()))
    ax.set_ylabel("selected hypotheses")
    ax.set_title(f"delta_M = {d.percentage_points:.2f}")
    return _save(fig, Path(path))


def render_band_counts_figure(report: AuditReport, path) -> Path | None:
    """Quality-band counts for the two-stage filter."""
    if report.filter_stats is None:
        return None
    bands = report.filter_stats.bands
    names = [b.band for b in bands]
    xs = range(len(bands))
    width = 0.28
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    ax.bar([x - width for x in xs], [b.n_f_stage1 for b in bands], width, label="F (stage 1)")
    ax.bar(list(xs), [b.n_m_stage1 for b in bands], width, label="M (stage 1)")
    ax.bar([x + width for x in xs], [b.n_pairs_stage2 for b in bands], width, label="pairs (stage 2)")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(names, fontsize=8)
    ax.legend(fontsize=8)
    ax.set_ylabel("count")
    return _save(fig, Path(path))


def render_report_figures(report: AuditReport, directory) -> list[Path]:
    """Render every figure applicable to this report into a directory."""
    directory = Path(directory)
    out = []
    fig = render_ratio_figure(report, directory / "ratios.png")
    if fig:
        out.append(fig)
    if report.retention is not None:
        out.append(
            render_retention_figure(
                report.retention,
                directory / "retention.png",
                title=report.metadata.scorer_name,
            )
        )
    fig = render_match_counts_figure(report, directory / "match_counts.png")
    if fig:
        out.append(fig)
    fig = render_band_counts_figure(report, directory / "filter_bands.png")
    if fig:
        out.append(fig)
    return out
