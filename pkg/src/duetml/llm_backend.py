"""Chat-completion backends: live HTTP, scripted fixture, record/replay.

All three expose a single ``complete(request) -> str``. The scripted
backend replays canned completions in order (deterministic tests); the
replay backend caches live responses keyed by a hash of the canonically
serialized request.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .errors import (
    CacheMiss,
    FixtureExhausted,
    FixtureMismatch,
    HttpError,
    TimeoutError_,
)
from .react_core import ChatMessage, Role

API_KEY_ENV_DEFAULT = "AUTOML_GPT_API_KEY"
BASE_URL_ENV = "AUTOML_GPT_BASE_URL"


@dataclass
class CompletionRequest:
    messages: list[ChatMessage]
    temperature: float = 0.0
    max_tokens: int = 1024
    stop: list[str] = field(default_factory=lambda: ["Observation:"])

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.messages[0].role is not Role.SYSTEM:
            raise ValueError("first message must have role system")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


def canonical_serialize(request: CompletionRequest) -> str:
    """Injective canonical form of a request (sorted keys, exact content)."""
    body = {
        "messages": [
            {"role": m.role.value, "content": m.content} for m in request.messages
        ],
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
        "stop": list(request.stop),
    }
    return json.dumps(body, sort_keys=True, separators=(",", ":"))


def request_key(request: CompletionRequest) -> str:
    return hashlib.sha256(canonical_serialize(request).encode("utf-8")).hexdigest()


class Backend:
    def complete(self, request: CompletionRequest) -> str:
        raise NotImplementedError


class HttpBackend(Backend):
    """POSTs the de-facto chat-completions JSON shape.

    Retries transport errors and 5xx responses; 4xx fail immediately.
    The API key comes from an environment variable, never from files.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str = API_KEY_ENV_DEFAULT,
        timeout: float = 60.0,
        retries: int = 2,
    ):
        self.base_url = os.environ.get(BASE_URL_ENV) or base_url
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.retries = retries

    def complete(self, request: CompletionRequest) -> str:
        body = {
            "model": self.model,
            "messages": [
                {"role": m.role.value, "content": m.content}
                for m in request.messages
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "stop": list(request.stop),
        }
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        url = self.base_url.rstrip("/") + "/chat/completions"
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = requests.post(
                    url, json=body, headers=headers, timeout=self.timeout
                )
            except requests.Timeout:
                last = TimeoutError_(f"timed out after {self.timeout}s")
                continue
            except requests.RequestException as exc:
                last = HttpError(0, str(exc)[:200])
                continue
            if resp.status_code >= 500:
                last = HttpError(resp.status_code, resp.text[:200])
                continue
            if resp.status_code >= 400:
                raise HttpError(resp.status_code, resp.text[:200])
            data = resp.json()
            return data["choices"][0]["message"]["content"]
        assert last is not None
        raise last


@dataclass
class FixtureEntry:
    response: str
    expect_substring: str | None = None


class ScriptedBackend(Backend):
    """Pops fixture entries strictly in order; each used at most once.

    An entry with ``expect_substring`` asserts the substring occurs in the
    last user message of the request, catching fixture/flow drift early.
    """

    def __init__(self, entries: list[FixtureEntry]):
        self.entries = list(entries)
        self._pos = 0
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        entries = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            entries.append(FixtureEntry(obj["response"], obj.get("expect")))
        return cls(entries)

    @property
    def calls_made(self) -> int:
        return self._pos

    def complete(self, request: CompletionRequest) -> str:
        with self._lock:
            if self._pos >= len(self.entries):
                raise FixtureExhausted(
                    f"fixture exhausted after {len(self.entries)} entries"
                )
            entry = self.entries[self._pos]
            self._pos += 1
        if entry.expect_substring is not None:
            last_user = next(
                (m for m in reversed(request.messages) if m.role is Role.USER), None
            )
            got = last_user.content if last_user else ""
            if entry.expect_substring not in got:
                raise FixtureMismatch(entry.expect_substring, got[-200:])
        return entry.response


def write_fixture(path: str | Path, entries: list[FixtureEntry]) -> None:
    lines = []
    for e in entries:
        obj: dict = {"response": e.response}
        if e.expect_substring is not None:
            obj["expect"] = e.expect_substring
        lines.append(json.dumps(obj))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class ReplayBackend(Backend):
    """Content-addressed response cache in front of another backend.

    Cache hit returns the stored text; a miss delegates to the wrapped
    backend and stores the response (atomic write-then-rename), or raises
    in strict mode. One file per key, filename = hex hash.
    """

    def __init__(self, cache_dir: str | Path, wrapped: Backend | None = None,
                 strict: bool = False):
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.wrapped = wrapped
        self.strict = strict

    def complete(self, request: CompletionRequest) -> str:
        key = request_key(request)
        entry = self.cache_dir / key
        if entry.exists():
            return entry.read_text(encoding="utf-8")
        if self.strict or self.wrapped is None:
            raise CacheMiss(f"no cached response for key {key}")
        response = self.wrapped.complete(request)
        fd, tmp = tempfile.mkstemp(dir=self.cache_dir, prefix=".tmp-")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                f.write(response)
            os.replace(tmp, entry)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        return response


def make_backend(spec: str) -> Backend:
    """Build a backend from a CLI spec string.

    Syntax: ``scripted:<path>`` | ``http:<model>`` |
    ``replay:<dir>+http:<model>``.
    """
    if spec.startswith("scripted:"):
        return ScriptedBackend.from_file(spec[len("scripted:"):])
    if spec.startswith("http:"):
        base_url = os.environ.get(BASE_URL_ENV, "https://api.openai.com/v1")
        return HttpBackend(base_url=base_url, model=spec[len("http:"):])
    if spec.startswith("replay:"):
        rest = spec[len("replay:"):]
        if "+" in rest:
            cache_dir, inner = rest.split("+", 1)
            return ReplayBackend(cache_dir, wrapped=make_backend(inner))
        return ReplayBackend(rest, strict=True)
    raise ValueError(f"unknown backend spec {spec!r}")
