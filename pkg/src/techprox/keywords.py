"""Keyword assignments: loaded from a CSV file or produced by a frequency extractor.

The frequency extractor stands in for an embedding model. Its similarity is
the term frequency normalised by the most frequent term, so the top keyword
of every non-empty text scores exactly 1.0.
"""
from __future__ import annotations

import csv
import io
import logging
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from techprox.corpus import KeywordAssignment, PaperRecord
from techprox.errors import MalformedInputError

log = logging.getLogger(__name__)

# A compact English list; callers can pass their own through ExtractorSpec.
DEFAULT_STOPWORDS = frozenset(
    """
    a about above after again against all also am an and any are as at be because been
    before being below between both but by can could did do does doing down during each
    few for from further had has have having he her here hers him his how i if in into is
    it its itself just may me might more most must my no nor not now of off on once only
    or other our ours out over own same she should so some such than that the their them
    then there these they this those through to too under until up upon us use used using
    very via was we were what when where which while who whom why will with within without
    would you your based paper propose proposed approach method methods results show study
    new novel however thus therefore one two three
    """.split()
)

_TOKEN = re.compile(r"[a-z0-9]+(?:[-'][a-z0-9]+)*")


def normalize_keyword(text: str) -> str:
    return " ".join(text.casefold().split())


@dataclass(frozen=True)
class ExtractorSpec:
    mode: str = "frequency-fallback"
    top_k: int = 5
    stopwords: frozenset[str] = field(default=DEFAULT_STOPWORDS, repr=False)

    def __post_init__(self):
        if self.mode not in ("load-file", "frequency-fallback"):
            raise ValueError(f"unknown extractor mode {self.mode!r}")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")

    @classmethod
    def with_stopword_file(cls, path: str | Path, **kwargs) -> "ExtractorSpec":
        words = Path(path).read_text(encoding="utf-8").split()
        return cls(stopwords=frozenset(w.casefold() for w in words), **kwargs)


def tokenize(text: str, stopwords: frozenset[str] = DEFAULT_STOPWORDS) -> list[list[str]]:
    """Runs of consecutive non-stopword tokens; bigrams never span a stopword."""
    runs: list[list[str]] = [[]]
    for tok in _TOKEN.findall(text.casefold()):
        if tok in stopwords or tok.isdigit():
            if runs[-1]:
                runs.append([])
            continue
        runs[-1].append(tok)
    return [r for r in runs if r]


def annotate_fallback(record: PaperRecord, spec: ExtractorSpec = ExtractorSpec()) -> list[KeywordAssignment]:
    text = " ".join(t for t in (record.title, record.abstract) if t)
    counts: Counter[str] = Counter()
    for run in tokenize(text, spec.stopwords):
        counts.update(run)
        counts.update(f"{a} {b}" for a, b in zip(run, run[1:]))
    if not counts:
        return []
    # ties: unigrams before bigrams, then lexicographic
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0].count(" "), kv[0]))
    top = ranked[0][1]
    return [KeywordAssignment(term, tf / top) for term, tf in ranked[: spec.top_k]]


def annotate_corpus(corpus: Iterable[PaperRecord], spec: ExtractorSpec = ExtractorSpec()) -> list[PaperRecord]:
    return [replace(r, keyword_assignments=tuple(annotate_fallback(r, spec))) for r in corpus]


@dataclass
class LoadStats:
    rows: int = 0
    attached: int = 0
    unknown_work: int = 0
    out_of_range: int = 0


def load_assignments(
    path: str | Path, corpus: Sequence[PaperRecord]
) -> tuple[list[PaperRecord], LoadStats]:
    """Attach ``work_id,keyword,similarity`` rows to the corpus.

    Rows for unknown works or with similarity outside [0, 1] are skipped and
    tallied; a row that cannot be parsed at all raises with its line number.
    Records missing from the file get no assignments.
    """
    stats = LoadStats()
    known = {r.work_id for r in corpus}
    attached: dict[str, list[KeywordAssignment]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return [replace(r, keyword_assignments=()) for r in corpus], stats
        if [h.strip() for h in header] != ["work_id", "keyword", "similarity"]:
            raise MalformedInputError(f"{path}:1: expected header work_id,keyword,similarity")
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise MalformedInputError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            work_id, keyword, sim_text = (c.strip() for c in row)
            keyword = normalize_keyword(keyword)
            try:
                sim = float(sim_text)
            except ValueError:
                raise MalformedInputError(f"{path}:{lineno}: similarity {sim_text!r} is not a number") from None
            if not work_id or not keyword:
                raise MalformedInputError(f"{path}:{lineno}: empty work_id or keyword")
            stats.rows += 1
            if not 0.0 <= sim <= 1.0:
                stats.out_of_range += 1
                continue
            if work_id not in known:
                stats.unknown_work += 1
                continue
            attached.setdefault(work_id, []).append(KeywordAssignment(keyword, sim))
            stats.attached += 1
    if stats.unknown_work or stats.out_of_range:
        log.warning(
            "keyword file: %d rows for unknown works, %d similarities out of range",
            stats.unknown_work, stats.out_of_range,
        )
    out = [replace(r, keyword_assignments=tuple(attached.get(r.work_id, ()))) for r in corpus]
    return out, stats


def export_assignments(corpus: Iterable[PaperRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["work_id", "keyword", "similarity"])
    for r in corpus:
        for a in r.keyword_assignments:
            w.writerow([r.work_id, a.keyword, repr(a.similarity)])
    return buf.getvalue()


__all__ = [
    "ExtractorSpec",
    "KeywordAssignment",
    "annotate_corpus",
    "annotate_fallback",
    "export_assignments",
    "load_assignments",
    "normalize_keyword",
]
