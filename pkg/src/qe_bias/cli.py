"""Command-line surface.

Subcommands:
  validate    check a dataset file and print load diagnostics
  audit       full bias audit of a scorer over a contrastive dataset
  filter-sim  retention-by-threshold simulation per gender group
  gt-filter   two-stage inflection + BLEU-band filter for translation pairs
  qad         N-best reranking with gender-representation accounting
  pareto      flag the non-dominated (error rate, gap) points

Exit codes: 0 success, 2 input error, 3 endpoint error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .cache import CACHE_DIR_ENV, cache_dir_from_env
from .corpus import (
    CONDITIONS,
    SCHEMAS,
    UNAMBIGUOUS_INTRA,
    load_dataset,
    minimal_edit_diagnostics,
)
from .downstream import GtPair, gt_filter, threshold_grid, unique_word_sets
from .errors import DatasetError, EndpointError, HarnessError, NotEstimableError
from .report import (
    AuditConfig,
    AuditReport,
    FORMATS,
    QadInput,
    emit,
    pareto_points,
    run_audit,
    run_filter_sim,
    run_qad,
)
from .scoring import ContextStrategy, ScaleDescriptor

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_ENDPOINT = 3

_STRATEGY_NAMES = {
    "none": "none",
    "ctx": "concat_source_context",
    "ctx-translated": "concat_translated_context",
}


def _add_scorer_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scorer", required=True, help="endpoint spec: mock:..., cmd:..., tcp:host:port")
    p.add_argument("--scale", default=None, help="min:max:higher|lower (default: endpoint handshake)")
    p.add_argument("--scorer-timeout-secs", type=float, default=30.0)
    p.add_argument("--scorer-retries", type=int, default=0, choices=(0, 1))
    p.add_argument(
        "--cache-dir",
        default=None,
        help=f"raw-score cache directory (default: ${CACHE_DIR_ENV} if set)",
    )


def _add_output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--format", default="structured", choices=FORMATS)
    p.add_argument("--figures", default=None, help="directory for rendered figures")


def _add_strategy_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategy", default="none", choices=sorted(_STRATEGY_NAMES))
    p.add_argument("--context-separator", default=" ")
    p.add_argument("--translator", default=None, help="endpoint spec: identity or cmd:...")


def _build_config(args, dataset_required: bool = True) -> AuditConfig:
    return AuditConfig(
        dataset=getattr(args, "dataset", None),
        schema=getattr(args, "schema", None),
        scorer=args.scorer,
        seed=getattr(args, "seed", 0),
        condition=getattr(args, "condition", None),
        scale=ScaleDescriptor.parse(args.scale) if args.scale else None,
        strategy=ContextStrategy(
            kind=_STRATEGY_NAMES[getattr(args, "strategy", "none")],
            separator=getattr(args, "context_separator", " "),
        ),
        translator=getattr(args, "translator", None),
        bootstrap_resamples=getattr(args, "bootstrap", 1000),
        bootstrap_two_sided=getattr(args, "bootstrap_two_sided", False),
        cache_dir=args.cache_dir or cache_dir_from_env(),
        timeout_secs=args.scorer_timeout_secs,
        retries=args.scorer_retries,
    )


def _write_output(data: bytes, out: str | None) -> None:
    if out is None:
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_bytes(data)


def _finish_report(report: AuditReport, args) -> int:
    _write_output(emit(report, args.format), args.out)
    if args.figures:
        from .figures import render_report_figures

        render_report_figures(report, args.figures)
    return EXIT_OK


def _read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{line_no}: invalid JSON ({exc.msg})") from exc


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_validate(args) -> int:
    instances = load_dataset(args.dataset, args.schema)
    diagnostics = minimal_edit_diagnostics(instances)
    for diag in diagnostics:
        print(f"WARN {diag.instance_id}: {diag.kind}: {diag.message}")
    by_condition: dict[str, int] = {}
    for inst in instances:
        by_condition[inst.condition] = by_condition.get(inst.condition, 0) + 1
    counts = ", ".join(f"{c}={n}" for c, n in sorted(by_condition.items()))
    print(f"OK {len(instances)} instances ({counts}); {len(diagnostics)} warnings")
    return EXIT_OK


def _cmd_audit(args) -> int:
    report = run_audit(_build_config(args))
    return _finish_report(report, args)


def _cmd_filter_sim(args) -> int:
    try:
        start, stop, step = (float(x) for x in args.threshold_grid.split(":"))
    except ValueError as exc:
        raise DatasetError(f"bad --threshold-grid {args.threshold_grid!r}") from exc
    report = run_filter_sim(_build_config(args), threshold_grid(start, stop, step))
    return _finish_report(report, args)


def _cmd_gt_filter(args) -> int:
    instances = load_dataset(args.dataset, args.schema)
    by_id = {inst.id: inst for inst in instances if inst.condition == UNAMBIGUOUS_INTRA}
    pairs = []
    for line_no, rec in _read_jsonl(args.translations):
        where = f"{args.translations}:{line_no}"
        id_f = rec.get("id_f", f"{rec.get('id', '')}.F")
        id_m = rec.get("id_m", f"{rec.get('id', '')}.M")
        if id_f not in by_id or id_m not in by_id:
            raise DatasetError(f"{where}: no unambiguous_intra instances {id_f!r}/{id_m!r}")
        for key in ("translation_f", "translation_m", "inflection_ok_f", "inflection_ok_m"):
            if key not in rec:
                raise DatasetError(f"{where}: missing field {key!r}")
        pairs.append(
            GtPair(
                instance_f=by_id[id_f],
                instance_m=by_id[id_m],
                translation_f=rec["translation_f"],
                translation_m=rec["translation_m"],
                inflection_ok_f=bool(rec["inflection_ok_f"]),
                inflection_ok_m=bool(rec["inflection_ok_m"]),
            )
        )
    retained, stats = gt_filter(pairs)
    from datetime import datetime, timezone

    from .report import RunMetadata

    report = AuditReport(
        metadata=RunMetadata(
            scorer_name="-",
            dataset=args.dataset,
            schema=args.schema,
            condition=UNAMBIGUOUS_INTRA,
            strategy="none",
            separator=" ",
            scale="-",
            seed=0,
            bootstrap_resamples=0,
            bootstrap_two_sided=False,
            translator=None,
            timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        ),
        filter_stats=stats,
    )
    if args.retained_out:
        with open(args.retained_out, "w", encoding="utf-8") as fh:
            for rp in retained:
                fh.write(
                    json.dumps(
                        {
                            "id_f": rp.pair.instance_f.id,
                            "id_m": rp.pair.instance_m.id,
                            "bleu_f": rp.bleu_f,
                            "bleu_m": rp.bleu_m,
                            "band": rp.band,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
    return _finish_report(report, args)


def _cmd_qad(args) -> int:
    sources_by_id = {}
    if args.dataset:
        for inst in load_dataset(args.dataset, args.schema):
            sources_by_id[inst.id] = inst.source
    inputs = []
    for line_no, rec in _read_jsonl(args.nbest):
        where = f"{args.nbest}:{line_no}"
        for key in ("instance_id", "candidates"):
            if key not in rec:
                raise DatasetError(f"{where}: missing field {key!r}")
        source = rec.get("source") or sources_by_id.get(rec["instance_id"])
        if not source:
            raise DatasetError(
                f"{where}: no source text; add a 'source' field or pass --dataset"
            )
        if "f_unique" in rec or "m_unique" in rec:
            f_unique = frozenset(rec.get("f_unique", ()))
            m_unique = frozenset(rec.get("m_unique", ()))
        else:
            for key in ("h_f", "h_m"):
                if key not in rec:
                    raise DatasetError(f"{where}: missing field {key!r}")
            f_unique, m_unique = unique_word_sets(
                rec["h_f"], rec["h_m"], fold_case=args.fold_case
            )
        candidates = tuple(rec["candidates"])
        if not candidates:
            raise DatasetError(f"{where}: empty candidate list")
        inputs.append(
            QadInput(
                instance_id=rec["instance_id"],
                source=source,
                candidates=candidates,
                f_unique=f_unique,
                m_unique=m_unique,
            )
        )
    report = run_qad(_build_config(args), inputs, fold_case=args.fold_case)
    return _finish_report(report, args)


def _cmd_pareto(args) -> int:
    import csv

    rows = []
    with open(args.points, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            name = row.get("name") or row.get("metric")
            if name is None or "er_total" not in row or "gap" not in row:
                raise DatasetError(
                    f"{args.points}: need columns name (or metric), er_total, gap"
                )
            rows.append((name, float(row["er_total"]), float(row["gap"])))
    points = pareto_points(rows)
    if args.format == "structured":
        payload = [
            {
                "metric_name": p.metric_name,
                "er_total": p.er_total,
                "gap": p.gap,
                "on_frontier": p.on_frontier,
            }
            for p in points
        ]
        data = (json.dumps(payload, ensure_ascii=False, indent=2) + "\n").encode("utf-8")
    elif args.format == "csv_tables":
        import io

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["name", "er_total", "gap", "on_frontier"])
        for p in points:
            writer.writerow([p.metric_name, p.er_total, p.gap, int(p.on_frontier)])
        data = buf.getvalue().encode("utf-8")
    else:
        lines = ["| Metric | ER | gap | frontier |", "| --- | --- | --- | --- |"]
        for p in points:
            lines.append(
                f"| {p.metric_name} | {p.er_total:.4f} | {p.gap:.4f} | "
                f"{'yes' if p.on_frontier else ''} |"
            )
        data = ("\n".join(lines) + "\n").encode("utf-8")
    _write_output(data, args.out)
    if args.figures:
        from .figures import render_pareto_figure

        render_pareto_figure(points, Path(args.figures) / "pareto.png")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qe-bias", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a dataset file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--schema", required=True, choices=SCHEMAS)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("audit", help="run a bias audit")
    p.add_argument("--dataset", required=True)
    p.add_argument("--schema", required=True, choices=SCHEMAS)
    p.add_argument("--condition", default=None, choices=CONDITIONS)
    _add_scorer_args(p)
    _add_strategy_args(p)
    p.add_argument("--bootstrap", type=int, default=1000, help="bootstrap resamples")
    p.add_argument("--bootstrap-two-sided", action="store_true")
    p.add_argument("--seed", type=int, required=True)
    _add_output_args(p)
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("filter-sim", help="retention curve per gender group")
    p.add_argument("--dataset", required=True)
    p.add_argument("--schema", required=True, choices=SCHEMAS)
    p.add_argument("--condition", default=None, choices=CONDITIONS)
    _add_scorer_args(p)
    _add_strategy_args(p)
    p.add_argument("--threshold-grid", default="0:1:0.01", help="start:stop:step")
    p.add_argument("--seed", type=int, default=0)
    _add_output_args(p)
    p.set_defaults(func=_cmd_filter_sim)

    p = sub.add_parser("gt-filter", help="two-stage translation-pair filter")
    p.add_argument("--dataset", required=True)
    p.add_argument("--schema", required=True, choices=SCHEMAS)
    p.add_argument("--translations", required=True, help="JSONL with per-pair translations")
    p.add_argument("--retained-out", default=None, help="write retained pairs here (JSONL)")
    _add_output_args(p)
    p.set_defaults(func=_cmd_gt_filter)

    p = sub.add_parser("qad", help="rerank N-best lists and measure gender matches")
    p.add_argument("--nbest", required=True, help="JSONL candidate sets")
    p.add_argument("--dataset", default=None, help="dataset supplying source texts")
    p.add_argument("--schema", default="native", choices=SCHEMAS)
    p.add_argument("--fold-case", action="store_true")
    _add_scorer_args(p)
    p.add_argument("--seed", type=int, default=0)
    _add_output_args(p)
    p.set_defaults(func=_cmd_qad)

    p = sub.add_parser("pareto", help="flag non-dominated (error, gap) points")
    p.add_argument("--points", required=True, help="CSV with name,er_total,gap")
    _add_output_args(p)
    p.set_defaults(func=_cmd_pareto)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, NotEstimableError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EndpointError as exc:
        print(f"endpoint error: {exc}", file=sys.stderr)
        return EXIT_ENDPOINT
    except HarnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
