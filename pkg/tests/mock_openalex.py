"""A scripted local HTTP server standing in for the works endpoint."""
from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse


def make_work(wid: str, concept: str = "C1", words=("hello", "world")) -> dict:
    return {
        "id": f"https://openalex.org/{wid}",
        "title": f"title {wid}",
        "abstract_inverted_index": {w: [i] for i, w in enumerate(words)},
        "publication_date": "2019-05-04",
        "authorships": [{"author": {"id": "https://openalex.org/A1", "display_name": "Ann"}}],
        "referenced_works": ["https://openalex.org/W999"],
        "concepts": [{"id": f"https://openalex.org/{concept}", "score": 0.6}],
    }


class MockWorks:
    """Serves ``pages`` (lists of works) chained by cursor.

    ``faults`` is a list of status codes returned, in order, before any real
    page. Every request's query is recorded in ``requests``.
    """

    def __init__(self, pages, faults=(), status_always=None):
        self.pages = list(pages)
        self.faults = list(faults)
        self.status_always = status_always
        self.requests: list[dict] = []
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_GET(self):
                query = {k: v[0] for k, v in parse_qs(urlparse(self.path).query).items()}
                outer.requests.append(query)
                status = outer.status_always or (outer.faults.pop(0) if outer.faults else 200)
                if status != 200:
                    self._send(status, {"error": "scripted"})
                    return
                cursor = query.get("cursor", "*")
                idx = 0 if cursor == "*" else int(cursor)
                results = outer.pages[idx] if idx < len(outer.pages) else []
                nxt = str(idx + 1) if idx + 1 < len(outer.pages) else None
                self._send(200, {"meta": {"count": sum(map(len, outer.pages)), "next_cursor": nxt},
                                 "results": results})

            def _send(self, status, body):
                data = json.dumps(body).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.server.server_address[1]}/works"

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()
