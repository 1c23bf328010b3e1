"""Chat-completion access to cloud, local-runtime and mock backends.

All three kinds take the same list of ``{"role", "content"}`` messages and
return a :class:`Completion`. Request bodies are serialised canonically
(sorted keys, compact separators) and the SHA-256 of those exact bytes is
the request digest used for replay fixtures and for seeding the mock.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import httpx
import numpy as np

from .claims import build_lexicon
from .faults import FaultProfile, apply_faults
from .ledger import parse_prompt_table
from .oracle import OracleConfig, analyze, baseline_summary

logger = logging.getLogger(__name__)

Kind = Literal["cloud", "local", "mock"]
MAX_RETRIES = 5


class BackendError(Exception):
    attempts: int = 0


class TransportError(BackendError):
    def __init__(self, detail: str, attempts: int = 1):
        super().__init__(f"transport failure after {attempts} attempt(s): {detail}")
        self.detail = detail
        self.attempts = attempts


class RequestTimeout(BackendError):
    def __init__(self, attempts: int = 1):
        super().__init__(f"request timed out after {attempts} attempt(s)")
        self.attempts = attempts


class ProtocolError(BackendError):
    def __init__(self, status: int, body_excerpt: str, attempts: int = 1):
        super().__init__(f"HTTP {status}: {body_excerpt}")
        self.status = status
        self.body_excerpt = body_excerpt
        self.attempts = attempts


class AuthMissing(BackendError):
    def __init__(self, variable: str):
        super().__init__(f"environment variable {variable} with the API credential is not set")
        self.variable = variable


class FixtureMissing(BackendError):
    def __init__(self, digest: str):
        super().__init__(f"no replay fixture for request {digest}")
        self.digest = digest


@dataclass(frozen=True)
class BackendConfig:
    kind: Kind = "mock"
    endpoint: str | None = None
    model: str = "mock-oracle"
    temperature: float = 0.0
    max_tokens: int = 512
    timeout: float = 60.0
    retries: int = 2
    backoff_base: float = 0.5
    credential_env: str = "OPENAI_API_KEY"
    mock_mode: Literal["replay", "oracle"] = "oracle"
    fixture_dir: str | None = None
    fault_profile: FaultProfile | None = None
    mock_max_sentences: int = 4

    def __post_init__(self):
        if self.kind not in ("cloud", "local", "mock"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind != "mock" and not self.endpoint:
            raise ValueError(f"{self.kind} backend requires an endpoint")
        if not 0 <= self.retries <= MAX_RETRIES:
            raise ValueError(f"retries must be in [0, {MAX_RETRIES}]")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if self.mock_mode not in ("replay", "oracle"):
            raise ValueError(f"unknown mock mode {self.mock_mode!r}")


@dataclass(frozen=True)
class Completion:
    content: str
    latency: float
    backend: str
    model: str
    request_digest: str
    attempts: int = 1
    faults: tuple[str, ...] = field(default=())


def canonical_json(body: dict) -> bytes:
    return json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def digest_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _check_messages(messages: list[dict[str, str]]) -> list[dict[str, str]]:
    if not messages:
        raise ValueError("messages must not be empty")
    if messages[0]["role"] not in ("system", "user"):
        raise ValueError("first message must be a system or user message")
    out = []
    for m in messages:
        role, content = m["role"], m["content"]
        if role not in ("system", "user", "assistant"):
            raise ValueError(f"unknown role {role!r}")
        if role in ("system", "user") and not content:
            raise ValueError(f"{role} message content must not be empty")
        out.append({"role": role, "content": content})
    return out


def cloud_body(cfg: BackendConfig, messages: list[dict[str, str]]) -> dict:
    return {"model": cfg.model, "messages": messages, "temperature": cfg.temperature, "max_tokens": cfg.max_tokens}


def local_body(cfg: BackendConfig, messages: list[dict[str, str]]) -> dict:
    return {"model": cfg.model, "messages": messages, "stream": False, "options": {"temperature": cfg.temperature}}


def request_body(cfg: BackendConfig, messages: list[dict[str, str]]) -> dict:
    return local_body(cfg, messages) if cfg.kind == "local" else cloud_body(cfg, messages)


def request_digest(cfg: BackendConfig, messages: list[dict[str, str]]) -> str:
    return digest_bytes(canonical_json(request_body(cfg, _check_messages(messages))))


def _sleep(seconds: float) -> None:
    time.sleep(seconds)


def _post_with_retry(cfg: BackendConfig, url: str, payload: bytes, headers: dict[str, str],
                     client: httpx.Client | None) -> tuple[dict, int]:
    """POST with exponential backoff on transport failures and 5xx replies.

    4xx replies are returned as ``ProtocolError`` immediately.
    """
    own = client is None
    client = client or httpx.Client(timeout=cfg.timeout)
    attempt = 0
    try:
        while True:
            attempt += 1
            logger.debug("POST %s attempt %d", url, attempt)
            try:
                resp = client.post(url, content=payload, headers=headers, timeout=cfg.timeout)
            except httpx.TimeoutException as exc:
                error: BackendError = RequestTimeout(attempt)
                logger.warning("attempt %d timed out: %s", attempt, exc)
            except httpx.TransportError as exc:
                error = TransportError(str(exc) or type(exc).__name__, attempt)
                logger.warning("attempt %d failed: %s", attempt, exc)
            else:
                if resp.status_code < 400:
                    try:
                        return resp.json(), attempt
                    except ValueError:
                        raise ProtocolError(resp.status_code, resp.text[:200], attempt) from None
                error = ProtocolError(resp.status_code, resp.text[:200], attempt)
                if resp.status_code < 500:
                    raise error
            if attempt > cfg.retries:
                raise error
            _sleep(cfg.backoff_base * 2 ** (attempt - 1))
    finally:
        if own:
            client.close()


def _extract(data: dict, path: tuple, status: int = 200) -> str:
    node = data
    try:
        for key in path:
            node = node[key]
    except (KeyError, IndexError, TypeError):
        raise ProtocolError(status, f"response lacks {'.'.join(map(str, path))}") from None
    if not isinstance(node, str):
        raise ProtocolError(status, "message content is not a string")
    return node


def complete(cfg: BackendConfig, messages: list[dict[str, str]], client: httpx.Client | None = None) -> Completion:
    """Send ``messages`` to the configured backend and return the reply."""
    messages = _check_messages(messages)
    if cfg.kind == "mock":
        return mock_complete(cfg.mock_mode, cfg.fixture_dir, cfg.fault_profile or FaultProfile(), messages,
                             model=cfg.model, max_sentences=cfg.mock_max_sentences)

    body = request_body(cfg, messages)
    payload = canonical_json(body)
    digest = digest_bytes(payload)
    headers = {"Content-Type": "application/json"}
    base = cfg.endpoint.rstrip("/")
    if cfg.kind == "cloud":
        credential = os.environ.get(cfg.credential_env)
        if not credential:
            raise AuthMissing(cfg.credential_env)
        headers["Authorization"] = f"Bearer {credential}"
        url, path = f"{base}/v1/chat/completions", ("choices", 0, "message", "content")
    else:
        url, path = f"{base}/api/chat", ("message", "content")

    start = time.perf_counter()
    data, attempts = _post_with_retry(cfg, url, payload, headers, client)
    content = _extract(data, path)
    return Completion(content, time.perf_counter() - start, cfg.kind, cfg.model, digest, attempts)


_FENCE_RE = re.compile(r'"""\n(.*?)\n"""', re.DOTALL)


def _user_text(messages: list[dict[str, str]]) -> str:
    users = [m["content"] for m in messages if m["role"] == "user"]
    return users[-1] if users else ""


def oracle_response(messages: list[dict[str, str]], max_sentences: int = 4,
                    oracle: OracleConfig = OracleConfig()):
    """Faultless mock content and the context the fault ops may use.

    With a delta table in the last user message the reply is the oracle's
    baseline summary. Otherwise the last triple-quoted input block is relayed
    unchanged, so chained stages pass upstream text (and its errors) along.
    """
    text = _user_text(messages)
    table = parse_prompt_table(text)
    if table is not None:
        analysis = analyze(table, oracle)
        return baseline_summary(analysis, max_sentences), analysis, build_lexicon(table)
    blocks = _FENCE_RE.findall(text)
    return (blocks[-1].strip() if blocks else ""), None, None


def mock_rng(seed: int, digest: str) -> np.random.Generator:
    return np.random.default_rng([seed, int(digest[:16], 16)])


def write_fixture(fixture_dir: str | Path, digest: str, response: str) -> Path:
    path = Path(fixture_dir) / f"{digest}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"digest": digest, "response": response}, ensure_ascii=False, indent=2) + "\n",
                    encoding="utf-8")
    return path


def mock_complete(
    mode: Literal["replay", "oracle"],
    fixture_dir: str | Path | None,
    fault: FaultProfile,
    messages: list[dict[str, str]],
    model: str = "mock-oracle",
    max_sentences: int = 4,
) -> Completion:
    messages = _check_messages(messages)
    cfg = BackendConfig(kind="mock", model=model)
    digest = digest_bytes(canonical_json(cloud_body(cfg, messages)))
    start = time.perf_counter()
    if mode == "replay":
        path = Path(fixture_dir or ".") / f"{digest}.json"
        if not path.is_file():
            raise FixtureMissing(digest)
        content = json.loads(path.read_text(encoding="utf-8"))["response"]
        return Completion(content, time.perf_counter() - start, "mock", model, digest)

    content, analysis, lexicon = oracle_response(messages, max_sentences)
    fired: list[str] = []
    if not fault.is_clean:
        content, fired = apply_faults(content, fault, mock_rng(fault.seed, digest), analysis, lexicon)
    return Completion(content, time.perf_counter() - start, "mock", model, digest, faults=tuple(fired))
