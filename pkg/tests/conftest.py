import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest
from hypothesis import strategies as st

from trendscribe.ledger import Observation, ObservationSet, example_table_path

FIXTURES = Path(__file__).parent / "fixtures"

LABELS_PL = ["A", "B", "CC", "CC Other", "Service", "Bio Reactors", "Other 3rd party products"]
LABELS_REGION = ["X", "Y", "EMEA - EMEA", "APAC - Asia/Pacific", "US"]


@pytest.fixture
def table3_path() -> Path:
    return example_table_path()


@st.composite
def observation_sets(draw, max_rows=200):
    """Observation sets over two periods with cent-valued amounts."""
    n = draw(st.integers(0, max_rows))
    rows = []
    for _ in range(n):
        rows.append(
            Observation(
                business_area=draw(st.sampled_from(["BA1", "BA2"])),
                product_line=draw(st.sampled_from(LABELS_PL)),
                region=draw(st.sampled_from(LABELS_REGION)),
                period=draw(st.sampled_from(["P1", "P2"])),
                value=draw(st.integers(-10**9, 10**9)) / 100,
            )
        )
    return ObservationSet(tuple(rows), frozenset({"P1", "P2"}))


class StubServer:
    """Records raw request bodies and replies with queued (status, body) pairs."""

    def __init__(self):
        self.requests: list[dict] = []
        self.replies: list[tuple[int, bytes]] = []
        self.default: tuple[int, bytes] = (200, b"{}")
        self.delay = 0.0
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = self.rfile.read(length)
                time.sleep(stub.delay)
                stub.requests.append({"path": self.path, "headers": dict(self.headers), "body": body})
                status, payload = stub.replies.pop(0) if stub.replies else stub.default
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address
        return f"http://{host}:{port}"

    def reply(self, status: int, body) -> None:
        payload = body if isinstance(body, bytes) else json.dumps(body).encode()
        self.replies.append((status, payload))


@pytest.fixture
def stub_server():
    server = StubServer()
    server.thread.start()
    yield server
    server.httpd.shutdown()
    server.httpd.server_close()
