import pytest

from mock_openalex import MockWorks, make_work
from techprox.corpus import MonthKey, TechnologyCatalog
from techprox.errors import ConfigurationError, IngestionError
from techprox.openalex import OpenAlexClient, fetch_works

CATALOG = TechnologyCatalog((("C1", "one"),), MonthKey(2019, 1), MonthKey(2019, 12))


def no_sleep(_):
    pass


def test_two_pages_of_two_works():
    pages = [[make_work("W1"), make_work("W2")], [make_work("W3"), make_work("W4")]]
    with MockWorks(pages) as server:
        works = list(fetch_works(CATALOG, server.url, contact="me@example.org", sleep=no_sleep))
    assert [w.work_id for w in works] == ["W1", "W2", "W3", "W4"]
    assert len(server.requests) == 2
    assert all(q["mailto"] == "me@example.org" for q in server.requests)
    assert server.requests[0]["cursor"] == "*" and server.requests[1]["cursor"] == "1"
    assert "concepts.id:C1" in server.requests[0]["filter"]
    assert "from_publication_date:2019-01-01" in server.requests[0]["filter"]
    assert "to_publication_date:2019-12-31" in server.requests[0]["filter"]


def test_abstract_fields_survive_parsing():
    with MockWorks([[make_work("W1", words=("a", "b"))]]) as server:
        (w,) = fetch_works(CATALOG, server.url, sleep=no_sleep)
    assert w.abstract_inverted_index == {"a": [0], "b": [1]}
    assert w.referenced_works == ("W999",)
    assert w.concepts == (("C1", 0.6),)
    assert w.authorships == (("A1", "Ann"),)


def test_retry_after_429():
    delays = []
    with MockWorks([[make_work("W1")]], faults=[429]) as server:
        works = list(fetch_works(CATALOG, server.url, sleep=delays.append, backoff=0.5))
    assert len(works) == 1
    assert len(server.requests) == 2
    assert delays == [0.5]


def test_backoff_grows_exponentially_and_is_bounded():
    delays = []
    with MockWorks([[make_work("W1")]], faults=[503] * 4) as server:
        list(fetch_works(CATALOG, server.url, sleep=delays.append, backoff=1.0, max_backoff=5.0))
    assert delays == [1.0, 2.0, 4.0, 5.0]


def test_empty_result_set():
    with MockWorks([[]]) as server:
        assert list(fetch_works(CATALOG, server.url, sleep=no_sleep)) == []
    assert len(server.requests) == 1


def test_client_error_is_configuration_error():
    with MockWorks([[make_work("W1")]], status_always=400) as server:
        with pytest.raises(ConfigurationError, match="HTTP 400"):
            list(fetch_works(CATALOG, server.url, sleep=no_sleep))
        assert len(server.requests) == 1


def test_exhausted_retries_name_the_cursor():
    with MockWorks([[make_work("W1")]], status_always=500) as server:
        with pytest.raises(IngestionError, match=r"cursor '\*'"):
            list(fetch_works(CATALOG, server.url, sleep=no_sleep, max_retries=2))
        assert len(server.requests) == 3


def test_cached_rerun_is_offline(tmp_path):
    pages = [[make_work("W1"), make_work("W2")], [make_work("W3")]]
    with MockWorks(pages) as server:
        first = list(fetch_works(CATALOG, server.url, cache_dir=tmp_path, sleep=no_sleep))
        url = server.url
    # the server is gone: any network call would now fail
    client = OpenAlexClient(url, cache_dir=tmp_path, sleep=no_sleep, max_retries=0)
    second = list(client.iter_works(CATALOG))
    assert second == first
    assert client.requests_made == 0 and client.cache_hits == 2


def test_cache_key_ignores_contact(tmp_path):
    with MockWorks([[make_work("W1")]]) as server:
        list(fetch_works(CATALOG, server.url, contact="a@x.org", cache_dir=tmp_path, sleep=no_sleep))
        client = OpenAlexClient(server.url, contact="b@y.org", cache_dir=tmp_path, sleep=no_sleep)
        list(client.iter_works(CATALOG))
        assert len(server.requests) == 1
    assert client.cache_hits == 1


def test_work_tagged_with_two_concepts_yielded_once():
    catalog = TechnologyCatalog((("C1", "one"), ("C2", "two")), MonthKey(2019, 1), MonthKey(2019, 12))
    with MockWorks([[make_work("W1")]]) as server:
        works = list(fetch_works(catalog, server.url, sleep=no_sleep))
    assert [w.work_id for w in works] == ["W1"]
    assert len(server.requests) == 2


def test_empty_catalog_rejected():
    with pytest.raises(ConfigurationError):
        fetch_works(TechnologyCatalog(()), "http://127.0.0.1:1/works")
