import json
import re
import socket

import pytest

from trendscribe import gateway
from trendscribe.claims import build_lexicon
from trendscribe.faults import FAULT_CLASSES, FaultProfile
from trendscribe.gateway import (AuthMissing, BackendConfig, FixtureMissing, ProtocolError, RequestTimeout,
                                 TransportError, complete, mock_complete, request_digest, write_fixture)
from trendscribe.ledger import load_delta_table, render_prompt_table
from trendscribe.oracle import analyze, baseline_summary
from trendscribe.prompts import load_template

from conftest import FIXTURES

WIRE = FIXTURES / "wire"
MESSAGES = [
    {"role": "system", "content": "You are a financial analyst."},
    {"role": "user", "content": "Data: CCVE up."},
]


@pytest.fixture(autouse=True)
def no_sleep(monkeypatch):
    delays = []
    monkeypatch.setattr(gateway, "_sleep", delays.append)
    return delays


@pytest.fixture
def api_key(monkeypatch):
    monkeypatch.setenv("TRENDSCRIBE_TEST_KEY", "sk-test")
    return "TRENDSCRIBE_TEST_KEY"


def cloud(url, **kw):
    kw.setdefault("credential_env", "TRENDSCRIBE_TEST_KEY")
    return BackendConfig(kind="cloud", endpoint=url, model="gpt-4o", max_tokens=256, **kw)


def local(url, **kw):
    return BackendConfig(kind="local", endpoint=url, model="llama3.1:8b", **kw)


def closed_port_url():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    return f"http://127.0.0.1:{port}"


def table3_messages(table3_path):
    text = render_prompt_table(load_delta_table(table3_path))
    return load_template("cycle2_singleshot").render_messages({"data_block": text})


# cloud protocol

def test_cloud_wire_conformance(stub_server, api_key):
    stub_server.reply(200, (WIRE / "cloud_response.json").read_bytes())
    result = complete(cloud(stub_server.url), MESSAGES)
    (req,) = stub_server.requests
    assert req["path"] == "/v1/chat/completions"
    assert req["headers"]["Authorization"] == "Bearer sk-test"
    assert set(json.loads(req["body"])) == {"model", "messages", "temperature", "max_tokens"}
    assert req["body"] == (WIRE / "cloud_request.json").read_bytes()
    assert result.content == "CCVE in AMER - Americas as main growth driver."
    assert result.request_digest == gateway.digest_bytes(req["body"])
    assert re.fullmatch(r"[0-9a-f]{64}", result.request_digest)


def test_cloud_without_credential(monkeypatch, stub_server):
    monkeypatch.delenv("TRENDSCRIBE_TEST_KEY", raising=False)
    with pytest.raises(AuthMissing):
        complete(cloud(stub_server.url), MESSAGES)
    assert stub_server.requests == []


def test_unreachable_endpoint_no_retry(api_key, no_sleep):
    with pytest.raises(TransportError) as err:
        complete(cloud(closed_port_url(), retries=0), MESSAGES)
    assert err.value.attempts == 1
    assert no_sleep == []


@pytest.mark.parametrize("retries", [0, 1, 3, 5])
def test_retry_bound_on_5xx(stub_server, api_key, no_sleep, retries):
    stub_server.default = (503, b'{"error": "busy"}')
    with pytest.raises(ProtocolError) as err:
        complete(cloud(stub_server.url, retries=retries, backoff_base=0.1), MESSAGES)
    assert len(stub_server.requests) == retries + 1
    assert err.value.status == 503
    assert no_sleep == [0.1 * 2 ** i for i in range(retries)]


def test_recovers_after_transient_5xx(stub_server, api_key):
    stub_server.reply(500, b"{}")
    stub_server.reply(200, (WIRE / "cloud_response.json").read_bytes())
    result = complete(cloud(stub_server.url, retries=2), MESSAGES)
    assert result.attempts == 2 and len(stub_server.requests) == 2


def test_no_retry_on_4xx(stub_server, api_key):
    stub_server.default = (401, b'{"error": "bad key"}')
    with pytest.raises(ProtocolError) as err:
        complete(cloud(stub_server.url, retries=5), MESSAGES)
    assert err.value.status == 401
    assert "bad key" in err.value.body_excerpt
    assert len(stub_server.requests) == 1


def test_timeout(stub_server, api_key):
    stub_server.delay = 0.5
    with pytest.raises(RequestTimeout):
        complete(cloud(stub_server.url, retries=0, timeout=0.05), MESSAGES)


def test_malformed_response(stub_server, api_key):
    stub_server.reply(200, b'{"choices": []}')
    with pytest.raises(ProtocolError):
        complete(cloud(stub_server.url, retries=0), MESSAGES)


# local protocol

def test_local_wire_conformance(stub_server):
    stub_server.reply(200, (WIRE / "local_response.json").read_bytes())
    result = complete(local(stub_server.url), MESSAGES)
    (req,) = stub_server.requests
    body = json.loads(req["body"])
    assert req["path"] == "/api/chat"
    assert set(body) == {"model", "messages", "stream", "options"}
    assert body["stream"] is False
    assert req["body"] == (WIRE / "local_request.json").read_bytes()
    assert result.content == "CCSE up in all regions."
    assert "Authorization" not in req["headers"]


def test_local_stream_always_false(stub_server):
    stub_server.default = (200, (WIRE / "local_response.json").read_bytes())
    for temperature in (0.0, 0.7):
        complete(local(stub_server.url, temperature=temperature), MESSAGES)
    assert all(json.loads(r["body"])["stream"] is False for r in stub_server.requests)


# config and messages

@pytest.mark.parametrize("kwargs", [dict(kind="cloud"), dict(kind="mock", retries=6), dict(kind="mock", temperature=-1),
                                    dict(kind="bogus"), dict(kind="mock", max_tokens=0)])
def test_bad_backend_config(kwargs):
    with pytest.raises(ValueError):
        BackendConfig(**kwargs)


@pytest.mark.parametrize("messages", [[], [{"role": "assistant", "content": "x"}], [{"role": "user", "content": ""}],
                                      [{"role": "wizard", "content": "x"}]])
def test_bad_messages(messages):
    with pytest.raises(ValueError):
        complete(BackendConfig(), messages)


# mock backend

def test_mock_oracle_returns_baseline(table3_path):
    result = complete(BackendConfig(), table3_messages(table3_path))
    assert result.content == baseline_summary(analyze(load_delta_table(table3_path)))
    assert result.backend == "mock" and result.faults == ()


def test_mock_relays_fenced_input():
    messages = [{"role": "user", "content": 'Input:\n"""\nAnything at all.\n"""'}]
    assert complete(BackendConfig(), messages).content == "Anything at all."


def test_mock_is_deterministic(table3_path):
    profile = FaultProfile(**{f: 0.5 for f in FAULT_CLASSES}, seed=3)
    messages = table3_messages(table3_path)
    runs = {mock_complete("oracle", None, profile, messages).content for _ in range(5)}
    assert len(runs) == 1


def test_mock_numeral_fault(table3_path):
    result = mock_complete("oracle", None, FaultProfile.only("inject_numeral"), table3_messages(table3_path))
    lexicon = build_lexicon(load_delta_table(table3_path))
    masked = result.content
    for m in reversed(lexicon.mentions(masked)):
        masked = masked[:m.start] + masked[m.end:]
    assert re.search(r"\d", masked)
    assert result.faults == ("inject_numeral",)


def test_fault_seed_changes_stream(table3_path):
    messages = table3_messages(table3_path)
    outputs = {mock_complete("oracle", None, FaultProfile(inject_ungrounded_entity=1.0, seed=s), messages).content
               for s in range(10)}
    assert len(outputs) > 1


def test_replay_fixture(tmp_path):
    cfg = BackendConfig(mock_mode="replay", fixture_dir=str(tmp_path))
    digest = request_digest(BackendConfig(), MESSAGES)
    with pytest.raises(FixtureMissing) as err:
        complete(cfg, MESSAGES)
    assert err.value.digest == digest
    write_fixture(tmp_path, digest, "Stored reply, verbatim.  ")
    assert complete(cfg, MESSAGES).content == "Stored reply, verbatim.  "
