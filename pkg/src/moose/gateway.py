"""Uniform interface to text-generation backends.

Three backends share one contract (prompt + sampling params -> text):

* ``ScriptedBackend`` replays pre-authored responses matched by prompt
  substring; it makes whole pipeline runs deterministic and is what every
  test uses.
* ``ChatCompletionsBackend`` speaks the ``POST /chat/completions`` wire
  format (provider A).
* ``MessagesBackend`` speaks the ``POST /v1/messages`` wire format
  (provider B).

``Gateway`` wraps a backend with retries (exponential backoff, full jitter),
optional rate limiting, and an append-only call trace. API keys come from
environment variables only, never from config files.
"""

from __future__ import annotations

import json
import os
import random
import threading
import time
import urllib.error
import urllib.request
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

GENERATION_TEMPERATURE = 0.9
GENERATION_TOP_P = 0.9
JUDGE_TEMPERATURE = 0.0
JUDGE_TOP_P = 0.9
GENERATION_MAX_TOKENS = 1024
CHECKER_MAX_TOKENS = 512

DEFAULT_RETRY_LIMIT = 3
BACKOFF_BASE_SECONDS = 1.0

PROVIDER_A_KEY_ENV = "PROVIDER_A_API_KEY"
PROVIDER_B_KEY_ENV = "PROVIDER_B_API_KEY"

WILDCARD = "*"


class GatewayError(RuntimeError):
    """Generation failed and will not be retried further."""


class AuthError(GatewayError):
    """Credentials rejected; never retried."""


class TransientBackendError(GatewayError):
    """Timeouts, rate-limit replies, and 5xx responses; retried with backoff."""


class ScriptError(GatewayError):
    """The scripted backend could not serve a prompt."""


@dataclass(frozen=True)
class GenParams:
    temperature: float
    top_p: float
    max_output_tokens: int
    model_name: str

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError(f"top_p {self.top_p} outside (0, 1]")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")

    @classmethod
    def generation(cls, model_name: str, max_output_tokens: int = GENERATION_MAX_TOKENS) -> "GenParams":
        return cls(GENERATION_TEMPERATURE, GENERATION_TOP_P, max_output_tokens, model_name)

    @classmethod
    def judge(cls, model_name: str, max_output_tokens: int = CHECKER_MAX_TOKENS) -> "GenParams":
        return cls(JUDGE_TEMPERATURE, JUDGE_TOP_P, max_output_tokens, model_name)

    def to_dict(self) -> dict:
        return {
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_output_tokens": self.max_output_tokens,
            "model_name": self.model_name,
        }


@dataclass(frozen=True)
class CallRecord:
    sequence_no: int
    module_tag: str
    prompt: str
    params: GenParams
    response: str
    latency_ms: float
    retries: int
    started_at: float

    def to_dict(self) -> dict:
        return {
            "sequence_no": self.sequence_no,
            "module_tag": self.module_tag,
            "prompt": self.prompt,
            "params": self.params.to_dict(),
            "response": self.response,
            "latency_ms": self.latency_ms,
            "retries": self.retries,
            "started_at": self.started_at,
        }


class RunTrace:
    """Append-only log of gateway calls; safe for concurrent writers."""

    def __init__(self) -> None:
        self._records: list[CallRecord] = []
        self._lock = threading.Lock()

    def append(
        self,
        module_tag: str,
        prompt: str,
        params: GenParams,
        response: str,
        latency_ms: float,
        retries: int,
        started_at: float,
    ) -> CallRecord:
        with self._lock:
            record = CallRecord(
                sequence_no=len(self._records),
                module_tag=module_tag,
                prompt=prompt,
                params=params,
                response=response,
                latency_ms=latency_ms,
                retries=retries,
                started_at=started_at,
            )
            self._records.append(record)
            return record

    def records(self) -> list[CallRecord]:
        with self._lock:
            return list(self._records)

    def tagged(self, module_tag: str) -> list[CallRecord]:
        return [r for r in self.records() if r.module_tag == module_tag]

    def jsonl_lines(self) -> list[str]:
        return [json.dumps(r.to_dict(), sort_keys=True) for r in self.records()]


class ScriptedBackend:
    """Deterministic backend replaying an ordered script.

    Each call consumes the first remaining entry whose matcher occurs in the
    prompt; ``"*"`` matches any prompt. Exhaustion or a prompt nothing matches
    raises ScriptError.
    """

    deterministic = True
    model_name = "scripted"

    def __init__(self, script: Sequence[tuple[str, str]]):
        if not script:
            raise ValueError("script must be non-empty")
        self._entries: list[tuple[str, str]] = list(script)
        self._lock = threading.Lock()

    @classmethod
    def from_jsonl(cls, path) -> "ScriptedBackend":
        entries: list[tuple[str, str]] = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                entries.append((obj.get("match", WILDCARD), obj["response"]))
        return cls(entries)

    def remaining(self) -> int:
        with self._lock:
            return len(self._entries)

    def complete(self, prompt: str, params: GenParams, module_tag: str) -> str:
        with self._lock:
            if not self._entries:
                raise ScriptError(f"script exhausted (module {module_tag!r})")
            for i, (matcher, response) in enumerate(self._entries):
                if matcher == WILDCARD or matcher in prompt:
                    del self._entries[i]
                    return response
            raise ScriptError(f"no script entry matches prompt from module {module_tag!r}")


def _require_env_key(env_var: str) -> str:
    key = os.environ.get(env_var, "").strip()
    if not key:
        raise AuthError(f"environment variable {env_var} is not set")
    return key


def _post_json(url: str, headers: dict[str, str], payload: dict, timeout: float) -> dict:
    body = json.dumps(payload).encode("utf-8")
    request = urllib.request.Request(url, data=body, headers={"Content-Type": "application/json", **headers})
    try:
        with urllib.request.urlopen(request, timeout=timeout) as resp:
            return json.loads(resp.read().decode("utf-8"))
    except urllib.error.HTTPError as exc:
        detail = f"HTTP {exc.code} from {url}"
        if exc.code in (401, 403):
            raise AuthError(detail) from exc
        if exc.code in (408, 429) or exc.code >= 500:
            raise TransientBackendError(detail) from exc
        raise GatewayError(detail) from exc
    except (urllib.error.URLError, TimeoutError) as exc:
        raise TransientBackendError(f"request to {url} failed: {exc}") from exc


class ChatCompletionsBackend:
    """Chat-completions wire format: Bearer auth, messages list, choices reply."""

    deterministic = False

    def __init__(
        self,
        model_name: str,
        base_url: str = "https://api.openai.com/v1",
        system_prompt: str = "",
        key_env: str = PROVIDER_A_KEY_ENV,
        timeout: float = 120.0,
    ):
        self.model_name = model_name
        self.base_url = base_url.rstrip("/")
        self.system_prompt = system_prompt
        self.key_env = key_env
        self.timeout = timeout

    def build_request(self, prompt: str, params: GenParams) -> tuple[str, dict[str, str], dict]:
        messages = []
        if self.system_prompt:
            messages.append({"role": "system", "content": self.system_prompt})
        messages.append({"role": "user", "content": prompt})
        payload = {
            "model": params.model_name,
            "messages": messages,
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_output_tokens,
        }
        headers = {"Authorization": f"Bearer {_require_env_key(self.key_env)}"}
        return f"{self.base_url}/chat/completions", headers, payload

    def complete(self, prompt: str, params: GenParams, module_tag: str) -> str:
        url, headers, payload = self.build_request(prompt, params)
        data = _post_json(url, headers, payload, self.timeout)
        try:
            return data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"malformed chat-completions response: {data!r}") from exc


class MessagesBackend:
    """Messages wire format: x-api-key auth, top-level system field, content blocks reply."""

    deterministic = False
    API_VERSION = "2023-06-01"

    def __init__(
        self,
        model_name: str,
        base_url: str = "https://api.anthropic.com",
        system_prompt: str = "",
        key_env: str = PROVIDER_B_KEY_ENV,
        timeout: float = 120.0,
    ):
        self.model_name = model_name
        self.base_url = base_url.rstrip("/")
        self.system_prompt = system_prompt
        self.key_env = key_env
        self.timeout = timeout

    def build_request(self, prompt: str, params: GenParams) -> tuple[str, dict[str, str], dict]:
        payload = {
            "model": params.model_name,
            "max_tokens": params.max_output_tokens,
            "temperature": params.temperature,
            "top_p": params.top_p,
            "messages": [{"role": "user", "content": prompt}],
        }
        if self.system_prompt:
            payload["system"] = self.system_prompt
        headers = {
            "x-api-key": _require_env_key(self.key_env),
            "anthropic-version": self.API_VERSION,
        }
        return f"{self.base_url}/v1/messages", headers, payload

    def complete(self, prompt: str, params: GenParams, module_tag: str) -> str:
        url, headers, payload = self.build_request(prompt, params)
        data = _post_json(url, headers, payload, self.timeout)
        try:
            return "".join(block.get("text", "") for block in data["content"])
        except (KeyError, TypeError) as exc:
            raise GatewayError(f"malformed messages response: {data!r}") from exc


class RateLimiter:
    """Caps calls so any 1-second window holds at most ``max_calls_per_sec`` calls."""

    WINDOW_SECONDS = 1.0
    MIN_SLEEP_SECONDS = 1e-3

    def __init__(
        self,
        max_calls_per_sec: int,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if max_calls_per_sec < 1:
            raise ValueError("max_calls_per_sec must be >= 1")
        self.max_calls_per_sec = max_calls_per_sec
        self._clock = clock
        self._sleep = sleep
        self._stamps: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        with self._lock:
            while True:
                now = self._clock()
                while self._stamps and now - self._stamps[0] >= self.WINDOW_SECONDS:
                    self._stamps.popleft()
                if len(self._stamps) < self.max_calls_per_sec:
                    self._stamps.append(now)
                    return
                wait = self._stamps[0] + self.WINDOW_SECONDS - now
                # Never request a sub-millisecond sleep: float dust in `wait`
                # could otherwise fail to advance the clock at all.
                self._sleep(max(wait, self.MIN_SLEEP_SECONDS))


class Gateway:
    """Backend wrapper adding retries, rate limiting, and call tracing."""

    def __init__(
        self,
        backend,
        trace: Optional[RunTrace] = None,
        retry_limit: int = DEFAULT_RETRY_LIMIT,
        backoff_base: float = BACKOFF_BASE_SECONDS,
        rate_limiter: Optional[RateLimiter] = None,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.monotonic,
        wall_clock: Callable[[], float] = time.time,
    ):
        self.backend = backend
        self.trace = trace if trace is not None else RunTrace()
        self.retry_limit = retry_limit
        self.backoff_base = backoff_base
        self.rate_limiter = rate_limiter
        self._sleep = sleep
        self._clock = clock
        self._wall_clock = wall_clock
        self._jitter = random.Random()

    @property
    def model_name(self) -> str:
        return self.backend.model_name

    @property
    def deterministic(self) -> bool:
        return getattr(self.backend, "deterministic", False)

    def generate(self, prompt: str, params: GenParams, module_tag: str) -> str:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        started_at = self._wall_clock()
        start = self._clock()
        retries = 0
        while True:
            if self.rate_limiter is not None:
                self.rate_limiter.acquire()
            try:
                response = self.backend.complete(prompt, params, module_tag)
                break
            except AuthError:
                raise
            except TransientBackendError as exc:
                if retries >= self.retry_limit:
                    raise GatewayError(
                        f"module {module_tag!r}: retry limit {self.retry_limit} exhausted: {exc}"
                    ) from exc
                self._sleep(self._jitter.uniform(0.0, self.backoff_base * (2.0**retries)))
                retries += 1
        if not response.strip():
            raise GatewayError(f"module {module_tag!r}: empty completion")
        latency_ms = (self._clock() - start) * 1000.0
        self.trace.append(module_tag, prompt, params, response, latency_ms, retries, started_at)
        return response


def scripted_backend(script: Sequence[tuple[str, str]]) -> ScriptedBackend:
    return ScriptedBackend(script)
