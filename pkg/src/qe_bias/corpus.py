"""Contrastive dataset model: loading, validation, and minimal-edit diffing.

A dataset is a sequence of evaluation instances. Each instance carries a
source sentence, an optional preceding context sentence, and exactly two
contrastive translation variants whose labels depend on the experimental
condition:

  ambiguous_fm        F / M   (no gender cue in the source)
  ambiguous_neutral   N / G   (gender-neutral vs. gendered phrasing)
  unambiguous_intra   F / M   (cue inside the source sentence)
  unambiguous_extra   F / M   (cue in the preceding context sentence)

Unambiguous instances additionally know which variant is correct and the
referent gender of the source (their group for error-rate accounting).

The native interchange format is UTF-8 JSON lines, one instance per line.
Adapters for three public corpus layouts (tab-separated, documented in the
README) map onto the same model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import DatasetError
from .tokenizer import tokenize

AMBIGUOUS_FM = "ambiguous_fm"
AMBIGUOUS_NEUTRAL = "ambiguous_neutral"
UNAMBIGUOUS_INTRA = "unambiguous_intra"
UNAMBIGUOUS_EXTRA = "unambiguous_extra"

CONDITIONS = (AMBIGUOUS_FM, AMBIGUOUS_NEUTRAL, UNAMBIGUOUS_INTRA, UNAMBIGUOUS_EXTRA)

UNAMBIGUOUS_CONDITIONS = (UNAMBIGUOUS_INTRA, UNAMBIGUOUS_EXTRA)

# Variant labels demanded by each condition, in canonical order.
CONDITION_LABELS = {
    AMBIGUOUS_FM: ("F", "M"),
    AMBIGUOUS_NEUTRAL: ("N", "G"),
    UNAMBIGUOUS_INTRA: ("F", "M"),
    UNAMBIGUOUS_EXTRA: ("F", "M"),
}

SCHEMAS = ("native", "mtgeneval", "gate", "mgente")

# Pairs whose variants differ in more than this fraction of token positions
# get flagged as suspicious in the load report. A warning, never a rejection.
MINIMAL_EDIT_FLAG_THRESHOLD = 0.5


@dataclass(frozen=True)
class LanguagePair:
    source: str
    target: str

    @classmethod
    def parse(cls, tag: str) -> "LanguagePair":
        parts = tag.split("-")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise DatasetError(f"bad language pair {tag!r}, expected e.g. 'en-it'")
        return cls(parts[0], parts[1])

    def __str__(self) -> str:
        return f"{self.source}-{self.target}"


@dataclass(frozen=True)
class EvaluationInstance:
    """One contrastive unit of evaluation."""

    id: str
    language_pair: LanguagePair
    source: str
    condition: str
    variants: dict[str, str]
    context: str | None = None
    correct_variant: str | None = None
    source_group: str | None = None
    metadata: dict[str, str] = field(default_factory=dict)

    def contrast_labels(self) -> tuple[str, str]:
        return CONDITION_LABELS[self.condition]

    def incorrect_variant(self) -> str:
        """The non-gold label of an unambiguous instance."""
        a, b = self.contrast_labels()
        return b if self.correct_variant == a else a


@dataclass(frozen=True)
class EditDiff:
    """Token-level minimal edit alignment between two variant texts."""

    substitutions: int
    insertions: int
    deletions: int
    changed_tokens: tuple[tuple[str | None, str | None], ...]
    diff_ratio: float


@dataclass(frozen=True)
class Diagnostic:
    instance_id: str
    kind: str
    message: str


def _check_instance(inst: EvaluationInstance, where: str) -> None:
    if not inst.id:
        raise DatasetError(f"{where}: empty id")
    if inst.condition not in CONDITIONS:
        raise DatasetError(f"{where}: unknown condition {inst.condition!r}")
    expected = set(CONDITION_LABELS[inst.condition])
    got = set(inst.variants)
    if got != expected:
        raise DatasetError(
            f"{where}: condition {inst.condition} requires variant labels "
            f"{sorted(expected)}, got {sorted(got)}"
        )
    if not inst.source:
        raise DatasetError(f"{where}: missing field 'source'")
    texts = list(inst.variants.values())
    for label, text in inst.variants.items():
        if not text:
            raise DatasetError(f"{where}: empty variant text for label {label}")
    if len(set(texts)) != len(texts):
        raise DatasetError(f"{where}: variant texts must be pairwise distinct")
    if inst.condition in UNAMBIGUOUS_CONDITIONS:
        if inst.correct_variant is None:
            raise DatasetError(f"{where}: missing field 'correct_variant'")
        if inst.correct_variant not in inst.variants:
            raise DatasetError(
                f"{where}: correct_variant {inst.correct_variant!r} is not a variant label"
            )
        if inst.source_group not in ("F", "M"):
            raise DatasetError(f"{where}: missing or bad field 'source_group'")
    if inst.condition == UNAMBIGUOUS_EXTRA and not inst.context:
        raise DatasetError(f"{where}: missing field 'context'")


# ---------------------------------------------------------------------------
# Minimal-edit diff
# ---------------------------------------------------------------------------


def _align(xs: list[str], ys: list[str]):
    """Unit-cost edit alignment of xs -> ys; returns (subs, dels, ins, changed)."""
    n, m = len(xs), len(ys)
    # DP table of edit distances.
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        dist[i][0] = i
    for j in range(m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = 0 if xs[i - 1] == ys[j - 1] else 1
            dist[i][j] = min(
                dist[i - 1][j - 1] + cost,
                dist[i - 1][j] + 1,
                dist[i][j - 1] + 1,
            )
    subs = dels = ins = 0
    changed: list[tuple[str | None, str | None]] = []
    i, j = n, m
    # Backtrace preference: diagonal, then deletion, then insertion.
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            cost = 0 if xs[i - 1] == ys[j - 1] else 1
            if dist[i][j] == dist[i - 1][j - 1] + cost:
                if cost:
                    subs += 1
                    changed.append((xs[i - 1], ys[j - 1]))
                i -= 1
                j -= 1
                continue
        if i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            dels += 1
            changed.append((xs[i - 1], None))
            i -= 1
            continue
        ins += 1
        changed.append((None, ys[j - 1]))
        j -= 1
    changed.reverse()
    return subs, dels, ins, changed


def validate_minimal_edit(a: str, b: str) -> EditDiff:
    """Token-level diff between two texts under the shared tokenizer.

    Counts are symmetric by construction: the alignment runs on a
    canonical ordering of the two token sequences, so substitutions(a, b)
    equals substitutions(b, a) and insertions(a, b) equals deletions(b, a).
    """
    ta, tb = tokenize(a), tokenize(b)
    swapped = (len(tb), tb) < (len(ta), ta)
    xs, ys = (tb, ta) if swapped else (ta, tb)
    subs, dels, ins, changed = _align(xs, ys)
    if swapped:
        dels, ins = ins, dels
        changed = [(y, x) for x, y in changed]
    denom = max(len(ta), len(tb))
    ratio = (subs + dels + ins) / denom if denom else 0.0
    return EditDiff(
        substitutions=subs,
        insertions=ins,
        deletions=dels,
        changed_tokens=tuple(changed),
        diff_ratio=ratio,
    )


def minimal_edit_diagnostics(
    instances: list[EvaluationInstance],
    threshold: float = MINIMAL_EDIT_FLAG_THRESHOLD,
) -> list[Diagnostic]:
    """Flag variant pairs that look like more than a minimal edit.

    Gender-neutral rewrites legitimately reach beyond token-level edits,
    so ambiguous_neutral instances are exempt.
    """
    out = []
    for inst in instances:
        if inst.condition == AMBIGUOUS_NEUTRAL:
            continue
        a, b = inst.contrast_labels()
        diff = validate_minimal_edit(inst.variants[a], inst.variants[b])
        if diff.diff_ratio > threshold:
            out.append(
                Diagnostic(
                    instance_id=inst.id,
                    kind="not_minimal_edit",
                    message=(
                        f"variants differ in {diff.diff_ratio:.0%} of token "
                        f"positions (> {threshold:.0%})"
                    ),
                )
            )
    return out


# ---------------------------------------------------------------------------
# Native JSONL format
# ---------------------------------------------------------------------------

_NATIVE_KEYS = {
    "id",
    "language_pair",
    "source",
    "context",
    "condition",
    "variants",
    "correct_variant",
    "source_group",
    "metadata",
}


def instance_to_record(inst: EvaluationInstance) -> dict:
    rec: dict = {
        "id": inst.id,
        "language_pair": str(inst.language_pair),
        "condition": inst.condition,
        "source": inst.source,
    }
    if inst.context is not None:
        rec["context"] = inst.context
    rec["variants"] = {label: inst.variants[label] for label in inst.contrast_labels()}
    if inst.correct_variant is not None:
        rec["correct_variant"] = inst.correct_variant
    if inst.source_group is not None:
        rec["source_group"] = inst.source_group
    if inst.metadata:
        rec["metadata"] = dict(inst.metadata)
    return rec


def record_to_instance(rec: dict, where: str) -> EvaluationInstance:
    if not isinstance(rec, dict):
        raise DatasetError(f"{where}: record is not an object")
    unknown = set(rec) - _NATIVE_KEYS
    if unknown:
        raise DatasetError(f"{where}: unknown fields {sorted(unknown)}")
    for key in ("id", "language_pair", "condition", "source", "variants"):
        if key not in rec:
            raise DatasetError(f"{where}: missing field {key!r}")
    variants = rec["variants"]
    if not isinstance(variants, dict):
        raise DatasetError(f"{where}: 'variants' must be an object")
    inst = EvaluationInstance(
        id=str(rec["id"]),
        language_pair=LanguagePair.parse(rec["language_pair"]),
        source=rec["source"],
        condition=rec["condition"],
        variants={str(k): str(v) for k, v in variants.items()},
        context=rec.get("context"),
        correct_variant=rec.get("correct_variant"),
        source_group=rec.get("source_group"),
        metadata={str(k): str(v) for k, v in rec.get("metadata", {}).items()},
    )
    _check_instance(inst, where)
    return inst


def save_native(instances: list[EvaluationInstance], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(instance_to_record(inst), ensure_ascii=False))
            fh.write("\n")


def _load_native(path) -> list[EvaluationInstance]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{line_no}"
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{where}: invalid JSON ({exc.msg})") from exc
            out.append(record_to_instance(rec, where))
    return out


# ---------------------------------------------------------------------------
# Public-corpus adapters (tab-separated, header row; layouts in README)
# ---------------------------------------------------------------------------


def _read_tsv(path):
    import csv

    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        if reader.fieldnames is None:
            return
        for line_no, row in enumerate(reader, start=2):
            yield line_no, {k: (v if v is not None else "") for k, v in row.items()}


def _require(row: dict, cols, where: str) -> None:
    for col in cols:
        if col not in row or row[col] == "":
            raise DatasetError(f"{where}: missing field {col!r}")


def _extras(row: dict, known) -> dict[str, str]:
    return {k: v for k, v in row.items() if k not in known and v not in (None, "")}


def _load_mtgeneval(path) -> list[EvaluationInstance]:
    known = {
        "id",
        "lang",
        "subset",
        "context",
        "source",
        "source_f",
        "source_m",
        "ref_f",
        "ref_m",
        "gold_gender",
    }
    out = []
    for line_no, row in _read_tsv(path):
        where = f"{path}:{line_no}"
        _require(row, ("id", "lang", "subset"), where)
        pair = LanguagePair("en", row["lang"])
        subset = row["subset"]
        meta = _extras(row, known)
        if subset == "counterfactual":
            _require(row, ("source_f", "source_m", "ref_f", "ref_m"), where)
            variants = {"F": row["ref_f"], "M": row["ref_m"]}
            for group, source in (("F", row["source_f"]), ("M", row["source_m"])):
                inst = EvaluationInstance(
                    id=f"{row['id']}.{group}",
                    language_pair=pair,
                    source=source,
                    condition=UNAMBIGUOUS_INTRA,
                    variants=dict(variants),
                    correct_variant=group,
                    source_group=group,
                    metadata=dict(meta),
                )
                _check_instance(inst, where)
                out.append(inst)
        elif subset == "contextual_amb":
            _require(row, ("source", "ref_f", "ref_m"), where)
            inst = EvaluationInstance(
                id=row["id"],
                language_pair=pair,
                source=row["source"],
                condition=AMBIGUOUS_FM,
                variants={"F": row["ref_f"], "M": row["ref_m"]},
                context=row.get("context") or None,
                metadata=meta,
            )
            _check_instance(inst, where)
            out.append(inst)
        elif subset == "contextual_disamb":
            _require(row, ("context", "source", "ref_f", "ref_m", "gold_gender"), where)
            gold = row["gold_gender"]
            inst = EvaluationInstance(
                id=row["id"],
                language_pair=pair,
                source=row["source"],
                condition=UNAMBIGUOUS_EXTRA,
                variants={"F": row["ref_f"], "M": row["ref_m"]},
                context=row["context"],
                correct_variant=gold,
                source_group=gold,
                metadata=meta,
            )
            _check_instance(inst, where)
            out.append(inst)
        else:
            raise DatasetError(f"{where}: unknown subset {subset!r}")
    return out


def _load_gate(path) -> list[EvaluationInstance]:
    known = {"id", "lang", "source", "translation_f", "translation_m"}
    out = []
    for line_no, row in _read_tsv(path):
        where = f"{path}:{line_no}"
        _require(row, ("id", "lang", "source", "translation_f", "translation_m"), where)
        inst = EvaluationInstance(
            id=row["id"],
            language_pair=LanguagePair("en", row["lang"]),
            source=row["source"],
            condition=AMBIGUOUS_FM,
            variants={"F": row["translation_f"], "M": row["translation_m"]},
            metadata=_extras(row, known),
        )
        _check_instance(inst, where)
        out.append(inst)
    return out


def _load_mgente(path) -> list[EvaluationInstance]:
    known = {"id", "lang", "source", "translation_neutral", "translation_gendered"}
    out = []
    for line_no, row in _read_tsv(path):
        where = f"{path}:{line_no}"
        _require(
            row, ("id", "lang", "source", "translation_neutral", "translation_gendered"), where
        )
        inst = EvaluationInstance(
            id=row["id"],
            language_pair=LanguagePair("en", row["lang"]),
            source=row["source"],
            condition=AMBIGUOUS_NEUTRAL,
            variants={"N": row["translation_neutral"], "G": row["translation_gendered"]},
            metadata=_extras(row, known),
        )
        _check_instance(inst, where)
        out.append(inst)
    return out


_LOADERS = {
    "native": _load_native,
    "mtgeneval": _load_mtgeneval,
    "gate": _load_gate,
    "mgente": _load_mgente,
}


def load_dataset(path, schema: str) -> list[EvaluationInstance]:
    """Load a dataset file, validating every instance.

    Preserves input order; ids must be unique within the file.
    """
    if schema not in _LOADERS:
        raise DatasetError(f"unknown schema {schema!r}, expected one of {SCHEMAS}")
    instances = _LOADERS[schema](path)
    seen: set[str] = set()
    for inst in instances:
        if inst.id in seen:
            raise DatasetError(f"{path}: duplicate id {inst.id!r}")
        seen.add(inst.id)
    return instances
