"""Cursor-paginated client for the OpenAlex works endpoint with an on-disk cache."""
from __future__ import annotations

import calendar
import hashlib
import json
import logging
import os
import time
from pathlib import Path
from typing import Callable, Iterator

import requests

from techprox.corpus import RawWork, TechnologyCatalog
from techprox.errors import ConfigurationError, IngestionError

log = logging.getLogger(__name__)

DEFAULT_ENDPOINT = "https://api.openalex.org/works"
CONTACT_ENV = "TECHPROX_MAILTO"
RETRY_STATUSES = frozenset({429, 500, 502, 503, 504})


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


class OpenAlexClient:
    """Fetch works page by page, retrying transient failures.

    Every successful page is stored under ``cache_dir`` keyed by a hash of the
    endpoint and query parameters (the contact address excluded), so a rerun
    with the same catalog never touches the network.
    """

    def __init__(
        self,
        endpoint: str = DEFAULT_ENDPOINT,
        contact: str | None = None,
        cache_dir: str | Path | None = None,
        per_page: int = 200,
        max_retries: int = 5,
        backoff: float = 1.0,
        max_backoff: float = 60.0,
        timeout: float = 30.0,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint
        self.contact = contact if contact is not None else os.environ.get(CONTACT_ENV)
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.per_page = per_page
        self.max_retries = max_retries
        self.backoff = backoff
        self.max_backoff = max_backoff
        self.timeout = timeout
        self.session = session or requests.Session()
        self.sleep = sleep
        self.requests_made = 0
        self.cache_hits = 0

    def _cache_path(self, params: dict) -> Path | None:
        if self.cache_dir is None:
            return None
        key = json.dumps({"endpoint": self.endpoint, "params": params}, sort_keys=True)
        return self.cache_dir / (hashlib.sha256(key.encode()).hexdigest() + ".json")

    def get_page(self, params: dict) -> dict:
        path = self._cache_path(params)
        if path is not None and path.exists():
            self.cache_hits += 1
            return json.loads(path.read_text(encoding="utf-8"))
        query = dict(params)
        if self.contact:
            query["mailto"] = self.contact
        payload = self._request(query)
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            _atomic_write_text(path, json.dumps(payload))  # keep server key order
        return payload

    def _request(self, query: dict) -> dict:
        last_error = ""
        for attempt in range(self.max_retries + 1):
            if attempt:
                self.sleep(min(self.backoff * 2 ** (attempt - 1), self.max_backoff))
            self.requests_made += 1
            try:
                resp = self.session.get(self.endpoint, params=query, timeout=self.timeout)
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_error = str(exc)
                log.warning("request failed (%s), attempt %d", exc, attempt + 1)
                continue
            if resp.status_code in RETRY_STATUSES:
                last_error = f"HTTP {resp.status_code}"
                log.warning("transient %s, attempt %d", last_error, attempt + 1)
                continue
            if 400 <= resp.status_code < 500:
                raise ConfigurationError(
                    f"works endpoint rejected the query with HTTP {resp.status_code}: "
                    f"{resp.text[:200]}"
                )
            resp.raise_for_status()
            return resp.json()
        raise IngestionError(
            f"retry budget exhausted at cursor {query.get('cursor')!r} ({last_error})"
        )

    def iter_concept(self, concept_id: str, catalog: TechnologyCatalog) -> Iterator[dict]:
        last_day = calendar.monthrange(catalog.end.year, catalog.end.month)[1]
        flt = (
            f"concepts.id:{concept_id},"
            f"from_publication_date:{catalog.start}-01,"
            f"to_publication_date:{catalog.end}-{last_day:02d}"
        )
        cursor = "*"
        while cursor:
            page = self.get_page({"filter": flt, "per-page": self.per_page, "cursor": cursor})
            results = page.get("results") or []
            yield from results
            cursor = (page.get("meta") or {}).get("next_cursor")
            if not results:
                break

    def iter_works(self, catalog: TechnologyCatalog) -> Iterator[RawWork]:
        """Works tagged with any catalog concept, each id yielded once."""
        seen: set[str] = set()
        for concept_id in catalog.ids:
            for payload in self.iter_concept(concept_id, catalog):
                work = RawWork.from_openalex(payload)
                if work.work_id in seen:
                    continue
                seen.add(work.work_id)
                yield work


def fetch_works(
    catalog: TechnologyCatalog,
    endpoint: str = DEFAULT_ENDPOINT,
    contact: str | None = None,
    **client_kwargs,
) -> Iterator[RawWork]:
    if not len(catalog):
        raise ConfigurationError("technology catalog is empty")
    client = OpenAlexClient(endpoint=endpoint, contact=contact, **client_kwargs)
    return client.iter_works(catalog)
