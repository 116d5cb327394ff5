import collections

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from techprox.corpus import (
    MonthKey,
    PaperRecord,
    RawWork,
    TechnologyCatalog,
    month_bucket,
    records_to_jsonl,
    reconstruct_abstract,
    redistributed_month,
    refine_corpus,
)
from techprox.errors import MalformedInputError

CATALOG = TechnologyCatalog((("C1", "one"), ("C2", "two")), MonthKey(2015, 1), MonthKey(2020, 12))


def work(wid, refs=("R1",), concepts=(("C1", 0.5),), date="2017-05-10", title="t", authors=()):
    return RawWork(wid, title, {"word": [0]}, date, authors, tuple(refs), tuple(concepts))


def ten_record_fixture():
    return [
        work("W1", refs=()),
        work("W2", refs=()),
        work("W3", refs=()),
        work("W4", refs=()),
        work("W5", concepts=(("C1", 0.0), ("C9", 0.7))),
        work("W6", title=None),
        work("W6", authors=(("A1", "x"),)),
        work("W7"),
        work("W8"),
        work("W9"),
    ]


def test_reconstruct_abstract_examples():
    assert reconstruct_abstract({"hello": [0], "world": [1]}) == "hello world"
    assert reconstruct_abstract({}) == ""
    assert reconstruct_abstract({"a": [0, 2], "b": [1]}) == "a b a"


def test_reconstruct_abstract_rejects_shared_position():
    with pytest.raises(MalformedInputError, match="position 1"):
        reconstruct_abstract({"a": [0, 1], "b": [1]})


@given(st.lists(st.text(alphabet="abcxyz", min_size=1, max_size=4), max_size=30))
def test_reconstruct_abstract_inverts_the_inverted_index(words):
    index = collections.defaultdict(list)
    for pos, w in enumerate(words):
        index[w].append(pos)
    assert reconstruct_abstract(index) == " ".join(words)


def test_refine_ten_record_fixture():
    records, stats = refine_corpus(ten_record_fixture(), CATALOG, seed=0)
    assert [r.work_id for r in records] == ["W6", "W7", "W8", "W9"]
    assert (stats.no_refs, stats.no_concepts, stats.dupes_merged) == (4, 1, 1)
    assert stats.survivors == 4 and stats.is_balanced()
    # the more complete duplicate (title and author present) wins
    assert records[0].authors == ("A1",)


def test_duplicate_tie_keeps_first_in_input_order():
    a = work("W1", title="first")
    b = work("W1", title="second")
    records, _ = refine_corpus([a, b], CATALOG, seed=0)
    assert records[0].title == "first"


def test_refine_is_deterministic():
    first = records_to_jsonl(refine_corpus(ten_record_fixture(), CATALOG, seed=3)[0])
    second = records_to_jsonl(refine_corpus(ten_record_fixture(), CATALOG, seed=3)[0])
    assert first == second


def test_bad_date_is_counted_not_raised():
    records, stats = refine_corpus([work("W1", date="not-a-date"), work("W2")], CATALOG, seed=0)
    assert stats.bad_date == 1 and len(records) == 1


def test_out_of_range_month_dropped():
    records, stats = refine_corpus([work("W1", date="2030-03-03")], CATALOG, seed=0)
    assert records == [] and stats.out_of_range == 1 and stats.is_balanced()


def test_no_january_first_means_identity_on_months():
    works = [work(f"W{i}", date=f"2018-{m:02d}-15") for i, m in enumerate(range(1, 13))]
    records, stats = refine_corpus(works, CATALOG, seed=5)
    assert [r.month for r in records] == [MonthKey(2018, m) for m in range(1, 13)]
    assert stats.redistributed == 0


def test_january_first_redistribution_keeps_year_and_count():
    works = [work(f"W{i}", date=f"{2016 + i % 3}-01-01") for i in range(60)]
    records, _ = refine_corpus(works, CATALOG, seed=11)
    per_year = collections.Counter(r.month.year for r in records)
    assert per_year == collections.Counter(2016 + i % 3 for i in range(60))
    for r in records:
        assert r.month.month == redistributed_month(r.work_id, 11)
    assert len({r.month.month for r in records}) > 6


def random_works(rng, n=40):
    out = []
    for i in range(n):
        wid = f"W{int(rng.integers(0, n // 2))}"
        refs = tuple(f"R{j}" for j in range(int(rng.integers(0, 3))))
        concepts = tuple((c, float(rng.choice([0.0, 0.3, 0.8]))) for c in ("C1", "C2", "C9")
                         if rng.random() < 0.6)
        date = str(rng.choice(["2016-01-01", "2017-04-09", "bad", "2019-12-31", "2031-01-02"]))
        title = None if rng.random() < 0.3 else "x"
        out.append(RawWork(wid, title, None, date, (), refs, concepts))
    return out


@pytest.mark.parametrize("seed", range(20))
def test_conservation_and_idempotence(seed):
    rng = np.random.default_rng(seed)
    works = random_works(rng)
    records, stats = refine_corpus(works, CATALOG, seed=seed)
    assert stats.input_size == len(works)
    assert stats.dropped + stats.survivors == stats.input_size
    assert len({r.work_id for r in records}) == len(records)
    for r in records:
        assert r.referenced_works and r.tech_scores
        assert all(v > 0 for v in r.tech_scores.values())
    again, _ = refine_corpus([r.to_raw() for r in records], CATALOG, seed=seed)
    assert again == records


def test_month_bucket_partition():
    def rec(wid, y, m):
        return PaperRecord(wid, "", "", MonthKey(y, m), (), ("R",), {"C1": 1.0})

    corpus = [rec("a", 2017, 5), rec("b", 2017, 5), rec("c", 2017, 5), rec("d", 2017, 6)]
    buckets = month_bucket(corpus)
    assert {k: len(v) for k, v in buckets.items()} == {MonthKey(2017, 5): 3, MonthKey(2017, 6): 1}
    assert month_bucket([]) == {}
    outside = month_bucket(corpus + [rec("e", 2001, 1)], CATALOG)
    assert sum(len(v) for v in outside.values()) == 4


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(2015, 2020), st.integers(1, 12)), max_size=40))
def test_month_bucket_union_is_corpus(months):
    corpus = [PaperRecord(f"W{i}", "", "", MonthKey(y, m), (), ("R",), {"C1": 1.0})
              for i, (y, m) in enumerate(months)]
    buckets = month_bucket(corpus, CATALOG)
    flat = sorted(r.work_id for v in buckets.values() for r in v)
    assert flat == sorted(r.work_id for r in corpus)
    assert all(r.month == k for k, v in buckets.items() for r in v)


def test_record_round_trip():
    rec = PaperRecord("W1", "t", "a b", MonthKey(2019, 3), ("A",), ("R",), {"C1": 0.4})
    assert PaperRecord.from_dict(rec.to_dict()) == rec


def test_month_key_arithmetic():
    assert MonthKey(2020, 12).shift(1) == MonthKey(2021, 1)
    assert MonthKey(2021, 1) - MonthKey(2020, 11) == 2
    assert str(MonthKey.parse("2017-03")) == "2017-03"
    with pytest.raises(ValueError):
        MonthKey(2020, 13)
