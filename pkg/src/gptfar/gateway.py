"""Provider-agnostic chat/vision completions with deterministic record/replay.

Three backends share one ``complete(request)`` contract:

* ``LiveBackend`` speaks an HTTPS chat-completions wire protocol and can
  record every exchange into a ``FixtureStore``.
* ``ReplayBackend`` answers from recorded fixtures only; a miss is an error,
  never a network call.
* ``ScriptedBackend`` serves canned responses for tests, FIFO or computed
  per request, and keeps a log of every request it saw.

Requests are keyed by a stable digest of their semantic fields, with image
references hashed by content so the digest survives path changes.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Sequence, Union

import httpx

FINISH_STATES = ("complete", "truncated", "refused")
PROVENANCES = ("live", "replay", "scripted")


class GatewayError(Exception):
    """Base class for gateway failures."""


class NetworkError(GatewayError):
    """Live transport failed after all retries."""


class FixtureMiss(GatewayError):
    """Replay requested for a digest with no recorded fixture."""


class UnreadableImage(GatewayError):
    """An image reference could not be read while digesting a request."""


class ScriptExhausted(GatewayError):
    """A scripted backend ran out of programmed responses."""


class RefusalError(GatewayError):
    """Raised by callers that cannot proceed past a refused completion."""


@dataclass(frozen=True)
class ModelRequest:
    role_instructions: str
    user_text: str
    image_refs: tuple[str, ...] = ()
    model_hint: str = "default"
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if not self.user_text:
            raise ValueError("user_text must be non-empty")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError("temperature must be within [0, 1]")


@dataclass(frozen=True)
class ModelResponse:
    text: str
    finish_state: str = "complete"
    provenance: str = "scripted"

    def __post_init__(self) -> None:
        if self.finish_state not in FINISH_STATES:
            raise ValueError(f"unknown finish_state {self.finish_state!r}")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.finish_state == "complete" and not self.text:
            raise ValueError("complete responses must carry text")

    @property
    def refused(self) -> bool:
        return self.finish_state == "refused"


def _image_digest(ref: str) -> str:
    try:
        data = Path(ref).read_bytes()
    except OSError as exc:
        raise UnreadableImage(f"cannot read image {ref!r}: {exc}") from exc
    return hashlib.sha256(data).hexdigest()


def request_digest(request: ModelRequest) -> str:
    """Stable hex digest of a request's semantic content.

    Canonical field ordering before hashing; image references contribute
    their byte content, not their paths. Temperature is excluded: pipeline
    calls always run at 0 and fixtures should survive a tuning knob.
    """
    payload = {
        "image_digests": [_image_digest(ref) for ref in request.image_refs],
        "model_hint": request.model_hint,
        "role_instructions": request.role_instructions,
        "user_text": request.user_text,
    }
    canonical = json.dumps(payload, sort_keys=True, ensure_ascii=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class FixtureStore:
    """One JSON document per request digest; stores the full request for audit."""

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)

    def path_for(self, digest: str) -> Path:
        return self.directory / f"{digest}.json"

    def load(self, digest: str) -> ModelResponse | None:
        path = self.path_for(digest)
        if not path.exists():
            return None
        data = json.loads(path.read_text("utf-8"))
        resp = data["response"]
        return ModelResponse(
            text=resp["text"], finish_state=resp["finish_state"], provenance="replay"
        )

    def save(self, digest: str, request: ModelRequest, response: ModelResponse) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        doc = {
            "digest": digest,
            "request": {
                "role_instructions": request.role_instructions,
                "user_text": request.user_text,
                "image_refs": list(request.image_refs),
                "model_hint": request.model_hint,
                "temperature": request.temperature,
            },
            "response": {
                "text": response.text,
                "finish_state": response.finish_state,
            },
        }
        path = self.path_for(digest)
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", "utf-8")
        return path

    def __len__(self) -> int:
        if not self.directory.exists():
            return 0
        return sum(1 for _ in self.directory.glob("*.json"))


class Backend(Protocol):
    def complete(self, request: ModelRequest) -> ModelResponse: ...


ScriptEntry = Union[str, ModelResponse]


class ScriptedBackend:
    """Serves programmed responses; FIFO queue or a per-request function.

    Every request is appended to ``self.calls`` so tests can count and
    inspect traffic.
    """

    def __init__(
        self,
        script: Sequence[ScriptEntry] | Callable[[ModelRequest], ScriptEntry],
    ) -> None:
        self._fn: Callable[[ModelRequest], ScriptEntry] | None
        self._queue: deque[ScriptEntry]
        if callable(script):
            self._fn = script
            self._queue = deque()
        else:
            self._fn = None
            self._queue = deque(script)
        self.calls: list[ModelRequest] = []

    def complete(self, request: ModelRequest) -> ModelResponse:
        self.calls.append(request)
        if self._fn is not None:
            entry = self._fn(request)
        else:
            if not self._queue:
                raise ScriptExhausted("scripted backend has no responses left")
            entry = self._queue.popleft()
        if isinstance(entry, ModelResponse):
            return entry
        return ModelResponse(text=entry, finish_state="complete", provenance="scripted")


class ReplayBackend:
    """Strict replay from a fixture store; never touches the network."""

    def __init__(self, store: FixtureStore) -> None:
        self.store = store

    def complete(self, request: ModelRequest) -> ModelResponse:
        digest = request_digest(request)
        response = self.store.load(digest)
        if response is None:
            raise FixtureMiss(
                f"no fixture for digest {digest} "
                f"(model_hint={request.model_hint!r}); the recorded corpus is incomplete"
            )
        return response


class RecordingBackend:
    """Wraps any backend and persists each exchange into a fixture store."""

    def __init__(self, inner: Backend, store: FixtureStore) -> None:
        self.inner = inner
        self.store = store

    def complete(self, request: ModelRequest) -> ModelResponse:
        response = self.inner.complete(request)
        self.store.save(request_digest(request), request, response)
        return response


class _RateLimiter:
    """Serializes live traffic to at most ``per_minute`` requests."""

    def __init__(self, per_minute: int | None) -> None:
        self._interval = 60.0 / per_minute if per_minute else 0.0
        self._lock = threading.Lock()
        self._next_at = 0.0

    def wait(self) -> None:
        if not self._interval:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._next_at - now
            self._next_at = max(now, self._next_at) + self._interval
        if delay > 0:
            time.sleep(delay)


_FINISH_MAP = {"stop": "complete", "length": "truncated", "content_filter": "refused"}


class LiveBackend:
    """HTTPS chat-completions client with retries and optional recording.

    Retries apply to transport errors only; refusals and malformed content
    are returned to the caller, who owns semantic retries.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str = "FAR_API_KEY",
        *,
        store: FixtureStore | None = None,
        retries: int = 3,
        backoff: float = 0.5,
        requests_per_minute: int | None = None,
        timeout: float = 60.0,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.store = store
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self._limiter = _RateLimiter(requests_per_minute)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _payload(self, request: ModelRequest) -> dict:
        content: list[dict] | str
        if request.image_refs:
            import base64

            parts: list[dict] = [{"type": "text", "text": request.user_text}]
            for ref in request.image_refs:
                try:
                    data = Path(ref).read_bytes()
                except OSError as exc:
                    raise UnreadableImage(f"cannot read image {ref!r}: {exc}") from exc
                b64 = base64.b64encode(data).decode("ascii")
                parts.append(
                    {
                        "type": "image_url",
                        "image_url": {"url": f"data:image/png;base64,{b64}"},
                    }
                )
            content = parts
        else:
            content = request.user_text
        messages = []
        if request.role_instructions:
            messages.append({"role": "system", "content": request.role_instructions})
        messages.append({"role": "user", "content": content})
        return {
            "model": self.model,
            "messages": messages,
            "temperature": request.temperature,
        }

    def complete(self, request: ModelRequest) -> ModelResponse:
        payload = self._payload(request)
        url = f"{self.base_url}/chat/completions"
        last_error: Exception | None = None
        for attempt in range(self.retries):
            self._limiter.wait()
            try:
                reply = httpx.post(
                    url, json=payload, headers=self._headers(), timeout=self.timeout
                )
                reply.raise_for_status()
                body = reply.json()
                break
            except httpx.TransportError as exc:
                # Only transport failures are retried; HTTP errors are not.
                last_error = exc
                if attempt + 1 < self.retries:
                    time.sleep(self.backoff * (2**attempt))
            except httpx.HTTPStatusError as exc:
                raise NetworkError(f"live completion rejected: {exc}") from exc
        else:
            raise NetworkError(
                f"live completion failed after {self.retries} attempts: {last_error}"
            )
        choice = body["choices"][0]
        finish = _FINISH_MAP.get(choice.get("finish_reason", "stop"), "complete")
        text = choice["message"]["content"] or ""
        if finish == "complete" and not text:
            finish = "refused"
        response = ModelResponse(text=text, finish_state=finish, provenance="live")
        if self.store is not None:
            self.store.save(request_digest(request), request, response)
        return response
