"""Work records, the technology catalog and corpus refinement.

Raw works arrive in the OpenAlex schema. Refinement drops works without
references or without any catalog concept, merges duplicate ids, spreads the
January-1st default-date artifact over the year and buckets the survivors
by month.
"""
from __future__ import annotations

import datetime as dt
import hashlib
import json
from collections import defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from techprox.errors import MalformedInputError

OPENALEX_PREFIX = "https://openalex.org/"


def short_id(value: str | None) -> str:
    """Strip the OpenAlex URL prefix from an entity id."""
    if not value:
        return ""
    value = str(value)
    if value.startswith(OPENALEX_PREFIX):
        return value[len(OPENALEX_PREFIX):]
    return value


@dataclass(frozen=True, order=True)
class MonthKey:
    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month must be in 1..12, got {self.month}")

    @property
    def ordinal(self) -> int:
        return self.year * 12 + self.month - 1

    @classmethod
    def from_ordinal(cls, ordinal: int) -> "MonthKey":
        year, month0 = divmod(ordinal, 12)
        return cls(year, month0 + 1)

    @classmethod
    def parse(cls, text: str) -> "MonthKey":
        year, month = str(text).strip().split("-")[:2]
        return cls(int(year), int(month))

    def __sub__(self, other: "MonthKey") -> int:
        return self.ordinal - other.ordinal

    def shift(self, months: int) -> "MonthKey":
        return MonthKey.from_ordinal(self.ordinal + months)

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


def month_range(start: MonthKey, end: MonthKey) -> list[MonthKey]:
    """Inclusive list of months from ``start`` to ``end``."""
    return [MonthKey.from_ordinal(o) for o in range(start.ordinal, end.ordinal + 1)]


@dataclass(frozen=True)
class TechnologyCatalog:
    technologies: tuple[tuple[str, str], ...]
    start: MonthKey = MonthKey(2002, 1)
    end: MonthKey = MonthKey(2022, 12)

    def __post_init__(self):
        ids = [t for t, _ in self.technologies]
        if len(set(ids)) != len(ids):
            raise ValueError("technology ids must be unique")
        if self.end < self.start:
            raise ValueError("catalog range ends before it starts")

    @property
    def ids(self) -> list[str]:
        return [t for t, _ in self.technologies]

    def label(self, tech_id: str) -> str:
        return dict(self.technologies).get(tech_id, tech_id)

    def months(self) -> list[MonthKey]:
        return month_range(self.start, self.end)

    def __len__(self) -> int:
        return len(self.technologies)

    def __contains__(self, month: MonthKey) -> bool:
        return self.start <= month <= self.end


@dataclass(frozen=True)
class KeywordAssignment:
    keyword: str
    similarity: float

    def __post_init__(self):
        if not self.keyword:
            raise ValueError("keyword must be non-empty")
        if not 0.0 <= self.similarity <= 1.0:
            raise ValueError(f"similarity {self.similarity} outside [0, 1]")


@dataclass(frozen=True)
class RawWork:
    work_id: str
    title: str | None = None
    abstract_inverted_index: Mapping[str, list[int]] | None = None
    publication_date: str = ""
    authorships: tuple[tuple[str, str], ...] = ()
    referenced_works: tuple[str, ...] = ()
    concepts: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if not self.work_id:
            raise MalformedInputError("work_id must be non-empty")
        for cid, score in self.concepts:
            if not 0.0 <= score <= 1.0:
                raise MalformedInputError(
                    f"{self.work_id}: concept {cid} score {score} outside [0, 1]"
                )

    @classmethod
    def from_openalex(cls, payload: Mapping) -> "RawWork":
        authorships = []
        for a in payload.get("authorships") or ():
            author = a.get("author") or {}
            aid = short_id(author.get("id"))
            if aid:
                authorships.append((aid, author.get("display_name") or ""))
        concepts = tuple(
            (short_id(c.get("id")), float(c.get("score", 0.0)))
            for c in payload.get("concepts") or ()
            if c.get("id")
        )
        return cls(
            work_id=short_id(payload.get("id")),
            title=payload.get("title") or payload.get("display_name"),
            abstract_inverted_index=payload.get("abstract_inverted_index") or None,
            publication_date=str(payload.get("publication_date") or ""),
            authorships=tuple(authorships),
            referenced_works=tuple(short_id(r) for r in payload.get("referenced_works") or ()),
            concepts=concepts,
        )

    def to_openalex(self) -> dict:
        return {
            "id": OPENALEX_PREFIX + self.work_id,
            "title": self.title,
            "abstract_inverted_index": dict(self.abstract_inverted_index or {}) or None,
            "publication_date": self.publication_date,
            "authorships": [
                {"author": {"id": OPENALEX_PREFIX + aid, "display_name": name}}
                for aid, name in self.authorships
            ],
            "referenced_works": [OPENALEX_PREFIX + r for r in self.referenced_works],
            "concepts": [
                {"id": OPENALEX_PREFIX + cid, "score": score} for cid, score in self.concepts
            ],
        }

    def completeness(self) -> int:
        """Number of non-empty fields among title, abstract, authors, references, concepts."""
        return sum(
            bool(x)
            for x in (
                self.title,
                self.abstract_inverted_index,
                self.authorships,
                self.referenced_works,
                self.concepts,
            )
        )


@dataclass(frozen=True)
class PaperRecord:
    work_id: str
    title: str
    abstract: str
    month: MonthKey
    authors: tuple[str, ...]
    referenced_works: tuple[str, ...]
    tech_scores: Mapping[str, float]
    keyword_assignments: tuple[KeywordAssignment, ...] = ()
    publication_date: str = ""

    def score(self, tech_id: str) -> float:
        return self.tech_scores.get(tech_id, 0.0)

    def to_dict(self) -> dict:
        return {
            "work_id": self.work_id,
            "title": self.title,
            "abstract": self.abstract,
            "publication_date": self.publication_date,
            "year": self.month.year,
            "month": self.month.month,
            "authors": list(self.authors),
            "referenced_works": list(self.referenced_works),
            "tech_scores": {k: self.tech_scores[k] for k in sorted(self.tech_scores)},
            "keywords": [[a.keyword, a.similarity] for a in self.keyword_assignments],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PaperRecord":
        return cls(
            work_id=d["work_id"],
            title=d.get("title") or "",
            abstract=d.get("abstract") or "",
            month=MonthKey(int(d["year"]), int(d["month"])),
            authors=tuple(d.get("authors") or ()),
            referenced_works=tuple(d.get("referenced_works") or ()),
            tech_scores={k: float(v) for k, v in (d.get("tech_scores") or {}).items()},
            keyword_assignments=tuple(
                KeywordAssignment(k, float(s)) for k, s in d.get("keywords") or ()
            ),
            publication_date=d.get("publication_date") or "",
        )

    def to_raw(self) -> RawWork:
        """Inverse of refinement, used to re-refine an already refined corpus."""
        inverted: dict[str, list[int]] = defaultdict(list)
        for pos, word in enumerate(self.abstract.split()):
            inverted[word].append(pos)
        return RawWork(
            work_id=self.work_id,
            title=self.title or None,
            abstract_inverted_index=dict(inverted) or None,
            publication_date=self.publication_date or f"{self.month}-15",
            authorships=tuple((a, "") for a in self.authors),
            referenced_works=self.referenced_works,
            concepts=tuple(self.tech_scores.items()),
        )


@dataclass
class CorpusStats:
    input_size: int = 0
    no_refs: int = 0
    no_concepts: int = 0
    bad_date: int = 0
    dupes_merged: int = 0
    out_of_range: int = 0
    redistributed: int = 0
    malformed_abstracts: int = 0
    survivors: int = 0

    @property
    def dropped(self) -> int:
        return self.no_refs + self.no_concepts + self.bad_date + self.dupes_merged + self.out_of_range

    def is_balanced(self) -> bool:
        return self.dropped + self.survivors == self.input_size

    def to_dict(self) -> dict:
        return asdict(self)


def reconstruct_abstract(inverted_index: Mapping[str, Iterable[int]] | None) -> str:
    """Rebuild abstract text from an OpenAlex inverted index.

    >>> reconstruct_abstract({"a": [0, 2], "b": [1]})
    'a b a'
    """
    if not inverted_index:
        return ""
    slots: dict[int, str] = {}
    for word, positions in inverted_index.items():
        for pos in positions:
            pos = int(pos)
            if pos < 0:
                raise MalformedInputError(f"negative position {pos} for word {word!r}")
            if pos in slots:
                raise MalformedInputError(
                    f"position {pos} claimed by both {slots[pos]!r} and {word!r}"
                )
            slots[pos] = word
    return " ".join(slots[p] for p in sorted(slots))


def redistributed_month(work_id: str, seed: int) -> int:
    """Deterministic month in 1..12 for a work dated January 1st."""
    digest = hashlib.sha256(f"{work_id}|{seed}".encode()).hexdigest()
    return int(digest, 16) % 12 + 1


def _parse_date(text: str) -> dt.date | None:
    try:
        return dt.date.fromisoformat(text.strip()[:10])
    except (ValueError, AttributeError):
        return None


def refine_corpus(
    works: Iterable[RawWork],
    catalog: TechnologyCatalog,
    seed: int,
    threshold: float = 0.0,
) -> tuple[list[PaperRecord], CorpusStats]:
    """Filter, deduplicate and month-bucket raw works.

    Rules run in a fixed order: drop works without references, drop works
    with no catalog concept scoring above ``threshold``, drop unparseable
    dates, merge duplicate ids (most complete wins, first in input order on
    ties), move January-1st works to a hashed month of the same year, and
    finally drop works outside the catalog range.
    """
    stats = CorpusStats()
    catalog_ids = set(catalog.ids)
    kept: dict[str, tuple[RawWork, dict[str, float], dt.date]] = {}
    order: list[str] = []
    for work in works:
        stats.input_size += 1
        if not work.referenced_works:
            stats.no_refs += 1
            continue
        scores: dict[str, float] = {}
        for cid, score in work.concepts:
            if cid in catalog_ids and score > threshold:
                scores[cid] = max(score, scores.get(cid, 0.0))
        if not scores:
            stats.no_concepts += 1
            continue
        date = _parse_date(work.publication_date)
        if date is None:
            stats.bad_date += 1
            continue
        if work.work_id in kept:
            stats.dupes_merged += 1
            if work.completeness() > kept[work.work_id][0].completeness():
                kept[work.work_id] = (work, scores, date)
            continue
        kept[work.work_id] = (work, scores, date)
        order.append(work.work_id)

    records = []
    for wid in order:
        work, scores, date = kept[wid]
        month = MonthKey(date.year, date.month)
        if date.month == 1 and date.day == 1:
            new_month = redistributed_month(wid, seed)
            if new_month != 1:
                stats.redistributed += 1
            month = MonthKey(date.year, new_month)
        if month not in catalog:
            stats.out_of_range += 1
            continue
        try:
            abstract = reconstruct_abstract(work.abstract_inverted_index)
        except MalformedInputError:
            stats.malformed_abstracts += 1
            abstract = ""
        records.append(
            PaperRecord(
                work_id=wid,
                title=work.title or "",
                abstract=abstract,
                month=month,
                authors=tuple(dict.fromkeys(a for a, _ in work.authorships)),
                referenced_works=tuple(dict.fromkeys(work.referenced_works)),
                tech_scores=scores,
                publication_date=work.publication_date,
            )
        )
    stats.survivors = len(records)
    return records, stats


def month_bucket(
    corpus: Iterable[PaperRecord], catalog: TechnologyCatalog | None = None
) -> dict[MonthKey, list[PaperRecord]]:
    buckets: dict[MonthKey, list[PaperRecord]] = defaultdict(list)
    for rec in corpus:
        if catalog is not None and rec.month not in catalog:
            continue
        buckets[rec.month].append(rec)
    return {m: buckets[m] for m in sorted(buckets)}


# -- JSONL helpers -----------------------------------------------------------

def iter_raw_works(path: str | Path) -> Iterator[RawWork]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedInputError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
            yield RawWork.from_openalex(payload)


def dump_jsonl(rows: Iterable[Mapping]) -> str:
    return "".join(json.dumps(r, ensure_ascii=False, sort_keys=False) + "\n" for r in rows)


def read_records(path: str | Path) -> list[PaperRecord]:
    with open(path, encoding="utf-8") as fh:
        return [PaperRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


def records_to_jsonl(records: Iterable[PaperRecord]) -> str:
    return dump_jsonl(r.to_dict() for r in records)


def raw_to_jsonl(works: Iterable[RawWork]) -> str:
    return dump_jsonl(w.to_openalex() for w in works)


__all__ = [
    "CorpusStats",
    "KeywordAssignment",
    "MonthKey",
    "PaperRecord",
    "RawWork",
    "TechnologyCatalog",
    "month_bucket",
    "month_range",
    "reconstruct_abstract",
    "refine_corpus",
    "short_id",
]
