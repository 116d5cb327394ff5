"""Monthly proximity indices between ordered technology pairs.

Five kinds are produced per pair: citations t1->t2, citations t2->t1,
collaboration weighted by incremental and by non-incremental monthly
h-index, and shared keywords. A month where one side has no related paper
is missing (NaN); a populated month without any bridge is a true zero.
"""
from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from techprox.corpus import MonthKey, PaperRecord, TechnologyCatalog, month_bucket
from techprox.hindex import MONTHLY_INCREMENTAL, MONTHLY_NON_INCREMENTAL, HIndexTable


class IndexKind(str, Enum):
    CITATION_FWD = "citation_fwd"
    CITATION_REV = "citation_rev"
    COLLAB_INCREMENTAL = "collab_incremental"
    COLLAB_NON_INCREMENTAL = "collab_non_incremental"
    KEYWORD = "keyword"

    @property
    def number(self) -> int:
        """Column number in the median-SMAPE tables (Index 1..5)."""
        return list(IndexKind).index(self) + 1

    @property
    def symmetric(self) -> bool:
        return self not in (IndexKind.CITATION_FWD, IndexKind.CITATION_REV)


@dataclass(frozen=True, order=True)
class TechPair:
    t1: str
    t2: str

    def swapped(self) -> "TechPair":
        return TechPair(self.t2, self.t1)

    def __str__(self) -> str:
        return f"{self.t1},{self.t2}"


@dataclass
class IndexSeries:
    pair: TechPair
    kind: IndexKind
    start: MonthKey
    values: np.ndarray  # NaN marks a month without data

    @property
    def series_id(self) -> str:
        return f"{self.pair.t1}|{self.pair.t2}|{self.kind.value}"

    @property
    def months(self) -> list[MonthKey]:
        return [self.start.shift(i) for i in range(len(self.values))]

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    def get(self, month: MonthKey) -> float | None:
        i = month - self.start
        if not 0 <= i < len(self.values) or np.isnan(self.values[i]):
            return None
        return float(self.values[i])


def _related(p: PaperRecord, tech: str) -> bool:
    return p.tech_scores.get(tech, 0.0) > 0.0


def _pair_weight(p: PaperRecord, pair: TechPair) -> float:
    return (p.score(pair.t1) + p.score(pair.t2)) / 2


def keyword_index(bucket: Sequence[PaperRecord], pair: TechPair) -> float | None:
    """Shared-keyword proximity for one month: sum over common keywords of N * C * A."""
    rel1 = [p for p in bucket if _related(p, pair.t1)]
    rel2 = [p for p in bucket if _related(p, pair.t2)]
    if not rel1 or not rel2:
        return None
    kw1 = {a.keyword for p in rel1 for a in p.keyword_assignments}
    kw2 = {a.keyword for p in rel2 for a in p.keyword_assignments}
    either = [p for p in bucket if _related(p, pair.t1) or _related(p, pair.t2)]
    total = 0.0
    for kw in sorted(kw1 & kw2):
        papers = []
        sims = []
        for p in either:
            s = [a.similarity for a in p.keyword_assignments if a.keyword == kw]
            if s:
                papers.append(p)
                sims.extend(s)
        n = (sum(_related(p, pair.t1) for p in papers) + sum(_related(p, pair.t2) for p in papers)) / 2
        c = sum(sims) / len(sims)
        a = sum(_pair_weight(p, pair) for p in papers) / len(papers)
        total += n * c * a
    return total


@dataclass
class CitationTally:
    outside_corpus: int = 0


def citation_index(
    corpus: Mapping[str, PaperRecord] | Sequence[PaperRecord],
    bucket: Sequence[PaperRecord],
    pair: TechPair,
    tally: CitationTally | None = None,
) -> float | None:
    """Citation flow from t1 papers of this month to t2 papers anywhere in the corpus."""
    by_id = corpus if isinstance(corpus, Mapping) else {p.work_id: p for p in corpus}
    citing = [p for p in bucket if _related(p, pair.t1)]
    if not citing:
        return None
    total = 0.0
    for p in citing:
        for ref in p.referenced_works:
            q = by_id.get(ref)
            if q is None:
                if tally is not None:
                    tally.outside_corpus += 1
                continue
            if _related(q, pair.t2):
                total += (p.score(pair.t1) + q.score(pair.t2)) / 2
    return total


def collaboration_index(
    bucket: Sequence[PaperRecord],
    pair: TechPair,
    h_table: HIndexTable,
) -> float | None:
    """Bridging-author proximity for one month: sum over bridging authors of N * H * A."""
    rel1 = [p for p in bucket if _related(p, pair.t1)]
    rel2 = [p for p in bucket if _related(p, pair.t2)]
    if not rel1 or not rel2:
        return None
    period = h_table.variant.period(bucket[0].month)
    by_author: dict[str, list[PaperRecord]] = defaultdict(list)
    for p in bucket:
        if _related(p, pair.t1) or _related(p, pair.t2):
            for a in p.authors:
                by_author[a].append(p)
    total = 0.0
    for author in sorted(by_author):
        papers = by_author[author]
        n1 = sum(_related(p, pair.t1) for p in papers)
        n2 = sum(_related(p, pair.t2) for p in papers)
        if not n1 or not n2:
            continue
        h = h_table.get(author, period)
        a = sum(_pair_weight(p, pair) for p in papers) / len(papers)
        total += (n1 + n2) / 2 * h * a
    return total


def _nan(v: float | None) -> float:
    return np.nan if v is None else v


def build_all_series(
    corpus: Sequence[PaperRecord],
    catalog: TechnologyCatalog,
    h_tables: Mapping[str, HIndexTable],
    tally: CitationTally | None = None,
) -> list[IndexSeries]:
    """Every ordered pair of distinct catalog technologies times the five kinds."""
    months = catalog.months()
    buckets = month_bucket(corpus, catalog)
    by_id = {p.work_id: p for p in corpus}
    inc = h_tables[MONTHLY_INCREMENTAL.name]
    non_inc = h_tables[MONTHLY_NON_INCREMENTAL.name]
    ids = catalog.ids
    n = len(months)

    symmetric: dict[tuple[str, str], dict[IndexKind, np.ndarray]] = {}
    citations: dict[tuple[str, str], np.ndarray] = {}
    for i, t1 in enumerate(ids):
        for t2 in ids[i + 1:]:
            pair = TechPair(t1, t2)
            arrays = {k: np.full(n, np.nan) for k in (
                IndexKind.KEYWORD, IndexKind.COLLAB_INCREMENTAL, IndexKind.COLLAB_NON_INCREMENTAL)}
            for j, m in enumerate(months):
                bucket = buckets.get(m, [])
                arrays[IndexKind.KEYWORD][j] = _nan(keyword_index(bucket, pair))
                arrays[IndexKind.COLLAB_INCREMENTAL][j] = _nan(collaboration_index(bucket, pair, inc))
                arrays[IndexKind.COLLAB_NON_INCREMENTAL][j] = _nan(collaboration_index(bucket, pair, non_inc))
            symmetric[(t1, t2)] = arrays
    for t1 in ids:
        for t2 in ids:
            if t1 == t2:
                continue
            pair = TechPair(t1, t2)
            citations[(t1, t2)] = np.array(
                [_nan(citation_index(by_id, buckets.get(m, []), pair, tally)) for m in months]
            )

    out = []
    for t1 in ids:
        for t2 in ids:
            if t1 == t2:
                continue
            pair = TechPair(t1, t2)
            sym = symmetric.get((t1, t2)) or symmetric[(t2, t1)]
            for kind in IndexKind:
                if kind is IndexKind.CITATION_FWD:
                    values = citations[(t1, t2)]
                elif kind is IndexKind.CITATION_REV:
                    values = citations[(t2, t1)]
                else:
                    values = sym[kind]
                out.append(IndexSeries(pair, kind, catalog.start, values.copy()))
    return out


def series_to_csv(series: Iterable[IndexSeries]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t1", "t2", "kind", "year", "month", "value", "is_missing"])
    for s in series:
        for m, v in zip(s.months, s.values):
            missing = bool(np.isnan(v))
            w.writerow([s.pair.t1, s.pair.t2, s.kind.value, m.year, m.month,
                        "" if missing else repr(float(v)), int(missing)])
    return buf.getvalue()


def series_from_csv(text: str) -> list[IndexSeries]:
    rows: dict[tuple[str, str, str], list[tuple[MonthKey, float]]] = defaultdict(list)
    order = []
    for row in csv.DictReader(io.StringIO(text)):
        key = (row["t1"], row["t2"], row["kind"])
        if key not in rows:
            order.append(key)
        v = np.nan if row["is_missing"] == "1" else float(row["value"])
        rows[key].append((MonthKey(int(row["year"]), int(row["month"])), v))
    out = []
    for key in order:
        pts = sorted(rows[key])
        out.append(IndexSeries(TechPair(key[0], key[1]), IndexKind(key[2]), pts[0][0],
                               np.array([v for _, v in pts], dtype=float)))
    return out
