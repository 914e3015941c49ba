"""Scorer-facing layer: request construction, normalization, and mocks.

External scorers expose a single operation: map (source, hypothesis) text
pairs to raw scores on a declared scale. Everything the harness computes
downstream runs on normalized scores in [0, 1] where 1 is best, so the
orientation and range of each scorer live in one place, ScaleDescriptor.

The built-in mock scorers make the statistics testable at desk scale
without any neural model: a constant scorer, a text-hash scorer with no
gender signal, and a marker-word scorer with a configurable penalty.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass

from .corpus import EvaluationInstance
from .errors import DatasetError, EndpointError, ProtocolError
from .tokenizer import tokenize

STRATEGY_NONE = "none"
STRATEGY_CONCAT = "concat_source_context"
STRATEGY_CONCAT_TRANSLATED = "concat_translated_context"

STRATEGIES = (STRATEGY_NONE, STRATEGY_CONCAT, STRATEGY_CONCAT_TRANSLATED)


@dataclass(frozen=True)
class ScaleDescriptor:
    min: float
    max: float
    higher_is_better: bool

    def __post_init__(self):
        if not self.min < self.max:
            raise ValueError(f"scale min must be < max, got [{self.min}, {self.max}]")

    @classmethod
    def parse(cls, spec: str) -> "ScaleDescriptor":
        """Parse 'min:max:higher' or 'min:max:lower'."""
        parts = spec.split(":")
        if len(parts) != 3 or parts[2] not in ("higher", "lower"):
            raise ValueError(f"bad scale spec {spec!r}, expected e.g. '0:25:lower'")
        return cls(float(parts[0]), float(parts[1]), parts[2] == "higher")

    def __str__(self) -> str:
        return f"{self.min:g}:{self.max:g}:{'higher' if self.higher_is_better else 'lower'}"


UNIT_SCALE = ScaleDescriptor(0.0, 1.0, True)


@dataclass(frozen=True)
class ScoreRequest:
    id: str
    source_text: str
    hypothesis_text: str
    reference_text: str | None = None

    def __post_init__(self):
        if not self.source_text or not self.hypothesis_text:
            raise ValueError(f"request {self.id!r}: empty source or hypothesis text")


@dataclass(frozen=True)
class ScoreRecord:
    id: str
    raw: float
    normalized: float


@dataclass(frozen=True)
class ContextStrategy:
    kind: str = STRATEGY_NONE
    separator: str = " "

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.kind!r}")


def normalize_score(raw: float, scale: ScaleDescriptor) -> float:
    """Affine map of raw onto [0, 1] with 1 best; out-of-range input clamps."""
    u = (raw - scale.min) / (scale.max - scale.min)
    u = min(1.0, max(0.0, u))
    return u if scale.higher_is_better else 1.0 - u


def is_clamped(raw: float, scale: ScaleDescriptor) -> bool:
    return raw < scale.min or raw > scale.max


def request_id(instance_id: str, variant: str) -> str:
    return f"{instance_id}#{variant}"


def build_scored_inputs(
    instance: EvaluationInstance,
    variant: str,
    strategy: ContextStrategy,
    translator=None,
) -> ScoreRequest:
    """Construct the (source, hypothesis) pair to score for one variant.

    Context handling mirrors the inference-time strategies: the context
    sentence is prepended to both sides, either verbatim or, on the
    hypothesis side, machine-translated into the target language.
    """
    if variant not in instance.variants:
        raise DatasetError(f"instance {instance.id}: no variant {variant!r}")
    hypothesis = instance.variants[variant]
    rid = request_id(instance.id, variant)
    if strategy.kind == STRATEGY_NONE:
        return ScoreRequest(id=rid, source_text=instance.source, hypothesis_text=hypothesis)
    if not instance.context:
        raise DatasetError(
            f"instance {instance.id}: strategy {strategy.kind} requires a context sentence"
        )
    sep = strategy.separator
    source_side = instance.context + sep + instance.source
    if strategy.kind == STRATEGY_CONCAT:
        return ScoreRequest(
            id=rid, source_text=source_side, hypothesis_text=instance.context + sep + hypothesis
        )
    if translator is None:
        raise ValueError("strategy concat_translated_context requires a translator endpoint")
    translated = translate_batch(
        translator, [instance.context], instance.language_pair.target
    )[0]
    return ScoreRequest(
        id=rid, source_text=source_side, hypothesis_text=translated + sep + hypothesis
    )


def score_batch(scorer, requests: list[ScoreRequest], scale: ScaleDescriptor) -> list[ScoreRecord]:
    """Score a batch through an endpoint, matching responses by id.

    Output records follow request order regardless of the order responses
    arrive in. Any unknown, duplicate, or missing id is an error.
    """
    ids = [r.id for r in requests]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ValueError(f"duplicate request ids in batch: {dupes}")
    raw_by_id: dict[str, float] = {}
    for rid, raw in scorer.score_many(requests):
        if rid not in set(ids):
            raise ProtocolError(f"scorer responded for unknown id {rid!r}")
        if rid in raw_by_id:
            raise ProtocolError(f"scorer responded twice for id {rid!r}")
        if not isinstance(raw, (int, float)) or isinstance(raw, bool):
            raise ProtocolError(f"non-numeric score payload for id {rid!r}: {raw!r}")
        raw_by_id[rid] = float(raw)
    missing = [i for i in ids if i not in raw_by_id]
    if missing:
        from .errors import ScoreTimeoutError

        raise ScoreTimeoutError(missing)
    return [
        ScoreRecord(id=i, raw=raw_by_id[i], normalized=normalize_score(raw_by_id[i], scale))
        for i in ids
    ]


def translate_batch(translator, texts: list[str], target_language: str) -> list[str]:
    """Translate texts positionally, caching by (text, target language).

    The cache lives on the translator object and is shared across calls;
    repeated texts hit the cache instead of the endpoint.
    """
    cache = getattr(translator, "_translation_cache", None)
    if cache is None:
        cache = {}
        lock = threading.Lock()
        translator._translation_cache = cache
        translator._translation_cache_lock = lock
    else:
        lock = translator._translation_cache_lock
    pending: list[str] = []
    seen: set[str] = set()
    with lock:
        for text in texts:
            key = (text, target_language)
            if key not in cache and text not in seen:
                pending.append(text)
                seen.add(text)
    if pending:
        translated = translator.translate_many(pending, target_language)
        if len(translated) != len(pending):
            raise EndpointError(
                f"translator returned {len(translated)} items for {len(pending)} inputs"
            )
        for pos, (text, out) in enumerate(zip(pending, translated)):
            if not out:
                raise EndpointError(f"empty translation at position {pos}")
        with lock:
            for text, out in zip(pending, translated):
                cache[(text, target_language)] = out
    with lock:
        return [cache[(text, target_language)] for text in texts]


# ---------------------------------------------------------------------------
# Built-in mock endpoints (in-process)
# ---------------------------------------------------------------------------


class _MockScorer:
    declared_scale = UNIT_SCALE

    def score_pair(self, source: str, hypothesis: str) -> float:
        raise NotImplementedError

    def score_many(self, requests):
        return [(r.id, self.score_pair(r.source_text, r.hypothesis_text)) for r in requests]


class ConstantScorer(_MockScorer):
    """Returns the same raw value for every request. Scale is the unit scale."""

    def __init__(self, value: float):
        self.value = float(value)
        self.name = f"constant:{self.value:g}"

    def score_pair(self, source, hypothesis):
        return self.value


class HashScorer(_MockScorer):
    """Deterministic pseudo-uniform score from the request texts only.

    No gender signal: the value is a pure function of (source, hypothesis),
    so symmetric inputs get exchangeable scores.
    """

    name = "hash"

    def score_pair(self, source, hypothesis):
        digest = hashlib.sha256(
            source.encode("utf-8") + b"\x1f" + hypothesis.encode("utf-8")
        ).digest()
        return int.from_bytes(digest[:8], "big") / 2**64


class BiasedScorer(_MockScorer):
    """Base score, minus a penalty when the hypothesis contains a marker word."""

    def __init__(self, base: float, penalty: float, markers):
        self.base = float(base)
        self.penalty = float(penalty)
        self.markers = frozenset(markers)
        self.name = f"biased:{self.base:g}:{self.penalty:g}:{','.join(sorted(self.markers))}"

    def score_pair(self, source, hypothesis):
        hit = any(tok in self.markers for tok in tokenize(hypothesis))
        return self.base - self.penalty if hit else self.base


class IdentityTranslator:
    """Stub translator returning its inputs unchanged."""

    name = "identity"

    def translate_many(self, texts, target_language):
        return list(texts)


class MappingTranslator:
    """Stub translator backed by an explicit text mapping (tests)."""

    name = "mapping"

    def __init__(self, mapping: dict[str, str]):
        self.mapping = dict(mapping)
        self.calls = 0

    def translate_many(self, texts, target_language):
        self.calls += 1
        try:
            return [self.mapping[t] for t in texts]
        except KeyError as exc:
            raise EndpointError(f"no translation for {exc.args[0]!r}") from exc


def parse_scorer_spec(spec: str, timeout_secs: float = 30.0, retries: int = 0):
    """Build a scorer endpoint from a CLI spec string.

    Forms: 'mock:constant:V', 'mock:hash', 'mock:biased:BASE:PEN:w1,w2',
    'cmd:<command line>', 'tcp:HOST:PORT'.
    """
    if spec == "mock:hash":
        return HashScorer()
    if spec.startswith("mock:constant:"):
        return ConstantScorer(float(spec.split(":", 2)[2]))
    if spec.startswith("mock:biased:"):
        parts = spec.split(":")
        if len(parts) != 5:
            raise ValueError(f"bad biased mock spec {spec!r}")
        markers = [w for w in parts[4].split(",") if w]
        return BiasedScorer(float(parts[2]), float(parts[3]), markers)
    if spec.startswith("cmd:"):
        from .protocol import SubprocessScorer

        return SubprocessScorer(spec[4:], timeout_secs=timeout_secs, retries=retries)
    if spec.startswith("tcp:"):
        from .protocol import TcpScorer

        _, host, port = spec.split(":")
        return TcpScorer(host, int(port), timeout_secs=timeout_secs, retries=retries)
    raise ValueError(f"unknown scorer endpoint spec {spec!r}")


def parse_translator_spec(spec: str, timeout_secs: float = 30.0):
    if spec == "identity":
        return IdentityTranslator()
    if spec.startswith("cmd:"):
        from .protocol import SubprocessTranslator

        return SubprocessTranslator(spec[4:], timeout_secs=timeout_secs)
    raise ValueError(f"unknown translator endpoint spec {spec!r}")
