"""Within-corpus h-indices in four variants (monthly/yearly x incremental/not)."""
from __future__ import annotations

import bisect
import csv
import io
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Hashable, Iterable, Sequence

from techprox.corpus import MonthKey, PaperRecord


def h_index(citation_counts: Iterable[int]) -> int:
    """Largest h such that at least h of the counts are >= h."""
    counts = sorted(citation_counts, reverse=True)
    h = 0
    for i, c in enumerate(counts, 1):
        if c >= i:
            h = i
        else:
            break
    return h


class Granularity(str, Enum):
    MONTHLY = "monthly"
    YEARLY = "yearly"


class Accumulation(str, Enum):
    INCREMENTAL = "incremental"
    NON_INCREMENTAL = "non-incremental"


@dataclass(frozen=True)
class HVariant:
    granularity: Granularity
    accumulation: Accumulation

    @property
    def name(self) -> str:
        return f"{self.granularity.value}-{self.accumulation.value}"

    def period(self, month: MonthKey) -> Hashable:
        return month if self.granularity is Granularity.MONTHLY else month.year


MONTHLY_INCREMENTAL = HVariant(Granularity.MONTHLY, Accumulation.INCREMENTAL)
MONTHLY_NON_INCREMENTAL = HVariant(Granularity.MONTHLY, Accumulation.NON_INCREMENTAL)
YEARLY_INCREMENTAL = HVariant(Granularity.YEARLY, Accumulation.INCREMENTAL)
YEARLY_NON_INCREMENTAL = HVariant(Granularity.YEARLY, Accumulation.NON_INCREMENTAL)
ALL_VARIANTS = (
    MONTHLY_INCREMENTAL,
    MONTHLY_NON_INCREMENTAL,
    YEARLY_INCREMENTAL,
    YEARLY_NON_INCREMENTAL,
)


@dataclass
class HIndexTable:
    """h per (author, period) for one variant.

    Incremental tables are step functions stored as change points, so
    ``get`` answers for any period at or after the author's first paper.
    Non-incremental tables only hold periods in which the author published.
    """

    variant: HVariant
    _steps: dict[str, tuple[list, list[int]]] = field(default_factory=dict)
    _points: dict[tuple[str, Hashable], int] = field(default_factory=dict)
    unknown_references: int = 0

    def get(self, author_id: str, period: Hashable) -> int:
        if self.variant.accumulation is Accumulation.NON_INCREMENTAL:
            return self._points.get((author_id, period), 0)
        steps = self._steps.get(author_id)
        if steps is None:
            return 0
        keys, values = steps
        i = bisect.bisect_right(keys, period)
        return values[i - 1] if i else 0

    def has_entry(self, author_id: str, period: Hashable) -> bool:
        if self.variant.accumulation is Accumulation.NON_INCREMENTAL:
            return (author_id, period) in self._points
        steps = self._steps.get(author_id)
        return bool(steps) and steps[0][0] <= period

    def authors(self) -> list[str]:
        if self.variant.accumulation is Accumulation.NON_INCREMENTAL:
            return sorted({a for a, _ in self._points})
        return sorted(self._steps)

    def rows(self, periods: Sequence[Hashable] | None = None) -> list[tuple[str, Hashable, int]]:
        """(author, period, h) rows; incremental tables list change points unless ``periods`` given."""
        out = []
        if self.variant.accumulation is Accumulation.NON_INCREMENTAL:
            for (a, p), h in sorted(self._points.items(), key=lambda kv: (kv[0][0], kv[0][1])):
                out.append((a, p, h))
            return out
        for a in sorted(self._steps):
            keys, values = self._steps[a]
            if periods is None:
                out.extend((a, k, v) for k, v in zip(keys, values))
            else:
                out.extend((a, p, self.get(a, p)) for p in periods if p >= keys[0])
        return out


def _citation_events(corpus: Sequence[PaperRecord]):
    by_id = {p.work_id: p for p in corpus}
    cited_by: dict[str, list[MonthKey]] = defaultdict(list)
    unknown = 0
    for p in corpus:
        for ref in p.referenced_works:
            if ref in by_id:
                cited_by[ref].append(p.month)
            else:
                unknown += 1
    return by_id, cited_by, unknown


def build_h_tables(corpus: Sequence[PaperRecord], variant: HVariant) -> HIndexTable:
    """h-index table for one variant, citations counted inside the corpus only.

    Incremental at period p: the author's papers published up to p, each
    cited by the corpus papers published up to p. Non-incremental at p: the
    author's papers published in p, with all of their corpus citations.
    """
    by_id, cited_by, unknown = _citation_events(corpus)
    table = HIndexTable(variant, unknown_references=unknown)
    papers_by_author: dict[str, list[PaperRecord]] = defaultdict(list)
    for p in corpus:
        for a in p.authors:
            papers_by_author[a].append(p)

    if variant.accumulation is Accumulation.NON_INCREMENTAL:
        for author, papers in papers_by_author.items():
            per_period: dict[Hashable, list[int]] = defaultdict(list)
            for p in papers:
                per_period[variant.period(p.month)].append(len(cited_by[p.work_id]))
            for period, counts in per_period.items():
                table._points[(author, period)] = h_index(counts)
        return table

    for author, papers in papers_by_author.items():
        # events: a paper entering the author's set, or a citation landing on one
        events: dict[Hashable, list[tuple[str, str]]] = defaultdict(list)
        for p in papers:
            events[variant.period(p.month)].append(("paper", p.work_id))
            for citing_month in cited_by[p.work_id]:
                events[variant.period(citing_month)].append(("cite", p.work_id))
        published: set[str] = set()
        received: dict[str, int] = defaultdict(int)
        keys: list = []
        values: list[int] = []
        for period in sorted(events):
            for kind, wid in events[period]:
                if kind == "paper":
                    published.add(wid)
                else:
                    received[wid] += 1
            if not published:
                continue
            h = h_index(received[w] for w in published)
            if not values or values[-1] != h:
                keys.append(period)
                values.append(h)
        table._steps[author] = (keys, values)
    return table


def build_all_tables(corpus: Sequence[PaperRecord]) -> dict[str, HIndexTable]:
    return {v.name: build_h_tables(corpus, v) for v in ALL_VARIANTS}


def tables_to_csv(tables: dict[str, HIndexTable]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["author_id", "period", "variant", "h"])
    for name in sorted(tables):
        for author, period, h in tables[name].rows():
            w.writerow([author, str(period), name, h])
    return buf.getvalue()
