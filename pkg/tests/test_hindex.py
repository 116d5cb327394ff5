import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import h_brute, h_incremental, h_non_incremental, random_corpus
from techprox.corpus import MonthKey, PaperRecord, month_range
from techprox.hindex import (
    MONTHLY_INCREMENTAL,
    MONTHLY_NON_INCREMENTAL,
    YEARLY_INCREMENTAL,
    YEARLY_NON_INCREMENTAL,
    build_all_tables,
    build_h_tables,
    h_index,
    tables_to_csv,
)


def paper(wid, month, authors=("A",), refs=()):
    return PaperRecord(wid, "", "", MonthKey(2020, month), tuple(authors), tuple(refs), {"T": 1.0})


def test_h_index_examples():
    assert h_index([]) == 0
    assert h_index([3, 0, 6, 1, 5]) == 3
    assert h_index([10, 10, 10]) == 3


@given(st.lists(st.integers(0, 60), max_size=50))
def test_h_index_matches_brute_force_and_ignores_order(counts):
    assert h_index(counts) == h_brute(counts)
    shuffled = counts[:]
    random.Random(0).shuffle(shuffled)
    assert h_index(shuffled) == h_index(counts)


def test_two_paper_trace():
    corpus = [paper("P1", 1), paper("P2", 2, refs=("P1",))]
    inc = build_h_tables(corpus, MONTHLY_INCREMENTAL)
    assert inc.get("A", MonthKey(2020, 1)) == 0
    assert inc.get("A", MonthKey(2020, 2)) == 1
    assert inc.get("A", MonthKey(2020, 9)) == 1
    non = build_h_tables(corpus, MONTHLY_NON_INCREMENTAL)
    assert non.get("A", MonthKey(2020, 1)) == 1
    assert non.get("A", MonthKey(2020, 2)) == 0
    assert not non.has_entry("A", MonthKey(2020, 3))


def test_no_citations_gives_zero_everywhere():
    corpus = [paper(f"P{i}", i, authors=("A", f"B{i}"), refs=("EXT",)) for i in range(1, 6)]
    for table in build_all_tables(corpus).values():
        for _, _, h in table.rows():
            assert h == 0
        assert table.unknown_references == 5


def test_yearly_periods():
    corpus = [paper("P1", 1), paper("P2", 7, authors=("B",), refs=("P1",))]
    inc = build_h_tables(corpus, YEARLY_INCREMENTAL)
    assert inc.get("A", 2020) == 1 and inc.get("A", 2019) == 0
    non = build_h_tables(corpus, YEARLY_NON_INCREMENTAL)
    assert non.get("A", 2020) == 1


@pytest.mark.parametrize("seed", range(40))
def test_monthly_tables_match_definition(seed):
    corpus, catalog = random_corpus(np.random.default_rng(seed))
    months = month_range(catalog.start, catalog.end)
    inc = build_h_tables(corpus, MONTHLY_INCREMENTAL)
    non = build_h_tables(corpus, MONTHLY_NON_INCREMENTAL)
    authors = sorted({a for p in corpus for a in p.authors})
    for a in authors:
        previous = 0
        for m in months:
            expected = h_incremental(corpus, a, m)
            assert inc.get(a, m) == expected
            assert expected >= previous
            previous = expected
            assert non.get(a, m) == h_non_incremental(corpus, a, m)


def test_csv_export_header_and_variants():
    text = tables_to_csv(build_all_tables([paper("P1", 1), paper("P2", 2, refs=("P1",))]))
    lines = text.splitlines()
    assert lines[0] == "author_id,period,variant,h"
    variants = {line.split(",")[2] for line in lines[1:]}
    assert variants == {"monthly-incremental", "monthly-non-incremental",
                        "yearly-incremental", "yearly-non-incremental"}
