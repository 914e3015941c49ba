"""Persistent raw-score cache.

Scores are the expensive resource; everything downstream of a raw score is
cheap to recompute. Records are stored as JSON lines keyed by
(scorer name, source, hypothesis), one file per scorer under the cache
directory (flag --cache-dir or env QE_BIAS_CACHE_DIR).
"""

from __future__ import annotations

import json
import os
import re
from pathlib import Path

CACHE_DIR_ENV = "QE_BIAS_CACHE_DIR"


def cache_dir_from_env() -> str | None:
    return os.environ.get(CACHE_DIR_ENV) or None


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", name).strip("-") or "scorer"


class ScoreCache:
    def __init__(self, directory, scorer_name: str):
        self.path = Path(directory) / f"scores-{_slug(scorer_name)}.jsonl"
        self.scorer_name = scorer_name
        self._scores: dict[tuple[str, str], float] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    rec = json.loads(line)
                    if rec.get("scorer") != scorer_name:
                        continue
                    self._scores[(rec["source"], rec["hypothesis"])] = float(rec["raw"])

    def get(self, source: str, hypothesis: str) -> float | None:
        return self._scores.get((source, hypothesis))

    def __len__(self) -> int:
        return len(self._scores)

    def add_many(self, records) -> None:
        """records: iterable of (source, hypothesis, raw). Appends to disk."""
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            for source, hypothesis, raw in records:
                key = (source, hypothesis)
                if key in self._scores:
                    continue
                self._scores[key] = raw
                fh.write(
                    json.dumps(
                        {
                            "scorer": self.scorer_name,
                            "source": source,
                            "hypothesis": hypothesis,
                            "raw": raw,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
