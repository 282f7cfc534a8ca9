"""Clients for the three external models: LLM, image editor, feature extractor.

Every backend comes in two flavors selected by config: `mock` (deterministic,
offline, fixture- or hash-driven) and `http` (JSON-over-POST with bounded
retries, exponential backoff, and token-bucket rate limiting). Mocks are pure
functions of their inputs so pipeline runs are reproducible byte-for-byte.
"""

import base64
import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Protocol

import numpy as np
import requests

from .errors import (
    BackendError,
    BackendProtocolError,
    BackendRateLimited,
    BackendRemoteError,
    BackendTimeout,
    DigestMismatch,
    MissingFixture,
)

logger = logging.getLogger(__name__)

LLM_TOKEN_ENV = "ARMADA_LLM_TOKEN"
EDITOR_URL_ENV = "ARMADA_EDITOR_URL"
EMBEDDER_URL_ENV = "ARMADA_EMBEDDER_URL"


@dataclass(frozen=True)
class ImageRef:
    """A path to image bytes plus the content digest recorded for them."""

    path: Path
    digest: str

    @classmethod
    def from_path(cls, path: Path | str) -> "ImageRef":
        path = Path(path)
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise BackendError(f"cannot read image {path}: {exc}") from exc
        return cls(path=path, digest=hashlib.sha256(data).hexdigest())

    def read_bytes(self) -> bytes:
        try:
            data = self.path.read_bytes()
        except OSError as exc:
            raise BackendError(f"cannot read image {self.path}: {exc}") from exc
        actual = hashlib.sha256(data).hexdigest()
        if actual != self.digest:
            raise DigestMismatch(f"{self.path} changed on disk (digest {actual[:12]}…)")
        return data


class LlmClient(Protocol):
    def complete(self, prompt: str) -> str: ...


class ImageEditorClient(Protocol):
    def edit(self, image: ImageRef, instruction: str, seed: int, out_path: Path) -> ImageRef: ...


class FeatureClient(Protocol):
    def embed(self, image: ImageRef) -> np.ndarray: ...


# ---------------------------------------------------------------------------
# deterministic mocks
# ---------------------------------------------------------------------------


def _keystream(material: bytes, length: int) -> bytes:
    """Deterministic byte stream: blake2b in counter mode over ``material``."""
    out = bytearray()
    counter = 0
    while len(out) < length:
        block = hashlib.blake2b(
            material + counter.to_bytes(8, "big"), digest_size=64
        ).digest()
        out.extend(block)
        counter += 1
    return bytes(out[:length])


def _prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class MockLlmClient:
    """Replays recorded responses, keyed by the SHA-256 of the exact prompt.

    An unknown prompt raises MissingFixture instead of improvising, so any
    drift in prompt rendering fails loudly in tests.
    """

    def __init__(self, fixtures: dict[str, str]):
        self._table = {_prompt_digest(prompt): reply for prompt, reply in fixtures.items()}

    @classmethod
    def from_file(cls, path: Path | str) -> "MockLlmClient":
        entries = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(cls._as_mapping(entries))

    @classmethod
    def from_resource(cls, name: str) -> "MockLlmClient":
        raw = resources.files("armada.resources.fixtures").joinpath(name).read_text("utf-8")
        return cls(cls._as_mapping(json.loads(raw)))

    @staticmethod
    def _as_mapping(entries) -> dict[str, str]:
        # accept either {prompt: response} or [{"prompt":…, "response":…}]
        if isinstance(entries, dict):
            return entries
        return {e["prompt"]: e["response"] for e in entries}

    def complete(self, prompt: str) -> str:
        digest = _prompt_digest(prompt)
        try:
            return self._table[digest]
        except KeyError:
            raise MissingFixture(
                f"no fixture for prompt {digest[:12]!r} starting {prompt[:80]!r}"
            ) from None


class MockImageEditor:
    """Writes a seeded deterministic transform of the input image.

    The output bytes are the input XORed with a keystream derived from the
    input digest, the instruction, and the seed: reproducible across runs
    and threads, different per instruction. An empty instruction copies the
    image unchanged.
    """

    def edit(self, image: ImageRef, instruction: str, seed: int, out_path: Path) -> ImageRef:
        data = image.read_bytes()
        if instruction:
            material = b"edit\x00%s\x00%s\x00%d" % (
                image.digest.encode("ascii"),
                instruction.encode("utf-8"),
                seed,
            )
            stream = _keystream(material, len(data))
            edited = bytes(a ^ b for a, b in zip(data, stream))
            if edited == data:
                edited = edited + b"\x01"
        else:
            edited = data
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_bytes(edited)
        return ImageRef.from_path(out_path)


class MockFeatureClient:
    """Derives a rows x dim feature matrix from the image bytes alone.

    Entries are uniform in [-2, 2), computed from a blake2b keystream over
    the content digest, so byte-identical files embed identically on every
    platform.
    """

    def __init__(self, dim: int = 8, rows: int = 4):
        if dim < 1 or rows < 1:
            raise ValueError("dim and rows must be positive")
        self.dim = dim
        self.rows = rows

    def embed(self, image: ImageRef) -> np.ndarray:
        data = image.read_bytes()
        material = b"feat\x00" + hashlib.sha256(data).digest()
        stream = _keystream(material, self.rows * self.dim * 8)
        values = [
            int.from_bytes(stream[i * 8 : (i + 1) * 8], "big") / 2**64
            for i in range(self.rows * self.dim)
        ]
        return np.asarray(values, dtype=np.float64).reshape(self.rows, self.dim) * 4.0 - 2.0


# ---------------------------------------------------------------------------
# HTTP clients
# ---------------------------------------------------------------------------


class TokenBucket:
    """Classic token bucket; acquire() blocks until a request token is free."""

    def __init__(self, rate: float, capacity: float | None = None, *, clock=time.monotonic,
                 sleep=time.sleep):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate
        self.capacity = capacity if capacity is not None else rate
        self._tokens = self.capacity
        self._updated = clock()
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._updated) * self.rate)
                self._updated = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)


class _HttpBackend:
    """Shared POST-JSON plumbing: retries, backoff, rate limit, redacted logs."""

    def __init__(
        self,
        endpoint: str,
        *,
        token: str | None = None,
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff: float = 0.5,
        rate_limiter: TokenBucket | None = None,
        session: requests.Session | None = None,
        sleep=time.sleep,
    ):
        if max_retries < 1:
            raise ValueError("max_retries must be at least 1")
        self.endpoint = endpoint
        self.token = token
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self.rate_limiter = rate_limiter
        self.session = session or requests.Session()
        self._sleep = sleep

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        return headers

    def _post(self, payload: dict) -> dict:
        last_error: BackendError | None = None
        for attempt in range(1, self.max_retries + 1):
            if self.rate_limiter is not None:
                self.rate_limiter.acquire()
            logger.debug(
                "POST %s attempt %d/%d auth=%s",
                self.endpoint,
                attempt,
                self.max_retries,
                "Bearer ***" if self.token else "none",
            )
            try:
                response = self.session.post(
                    self.endpoint,
                    json=payload,
                    headers=self._headers(),
                    timeout=self.timeout,
                )
            except requests.Timeout as exc:
                last_error = BackendTimeout(f"{self.endpoint}: timed out after {self.timeout}s")
                logger.warning("attempt %d timed out: %s", attempt, exc)
            except requests.RequestException as exc:
                last_error = BackendTimeout(f"{self.endpoint}: connection failed: {exc}")
                logger.warning("attempt %d failed to connect", attempt)
            else:
                if response.status_code == 429:
                    last_error = BackendRateLimited(f"{self.endpoint}: rate limited")
                    logger.warning("attempt %d rate limited", attempt)
                elif response.status_code >= 500:
                    last_error = BackendRemoteError(
                        f"{self.endpoint}: server error {response.status_code}"
                    )
                    logger.warning("attempt %d server error %d", attempt, response.status_code)
                elif response.status_code >= 400:
                    raise BackendRemoteError(
                        f"{self.endpoint}: rejected with {response.status_code}"
                    )
                else:
                    try:
                        body = response.json()
                    except ValueError as exc:
                        raise BackendProtocolError(
                            f"{self.endpoint}: response is not JSON"
                        ) from exc
                    if not isinstance(body, dict):
                        raise BackendProtocolError(f"{self.endpoint}: response is not an object")
                    return body
            if attempt < self.max_retries:
                self._sleep(self.backoff * 2 ** (attempt - 1))
        assert last_error is not None
        raise last_error


class HttpLlmClient(_HttpBackend):
    """Single-turn completion endpoint: {model, prompt, temperature: 0} -> {text}.

    Temperature is pinned to 0 so reruns are reproducible.
    """

    def __init__(self, endpoint: str, model: str, **kwargs):
        token = kwargs.pop("token", None) or os.environ.get(LLM_TOKEN_ENV)
        super().__init__(endpoint, token=token, **kwargs)
        self.model = model

    def complete(self, prompt: str) -> str:
        body = self._post({"model": self.model, "prompt": prompt, "temperature": 0})
        text = body.get("text")
        if not isinstance(text, str):
            raise BackendProtocolError(f"{self.endpoint}: missing 'text' in response")
        return text


class HttpImageEditor(_HttpBackend):
    """Editing endpoint: {image: base64, instruction, seed} -> {image: base64}."""

    def __init__(self, endpoint: str | None = None, **kwargs):
        endpoint = endpoint or os.environ.get(EDITOR_URL_ENV)
        if not endpoint:
            raise BackendError(f"no editor endpoint; set {EDITOR_URL_ENV} or configure one")
        super().__init__(endpoint, **kwargs)

    def edit(self, image: ImageRef, instruction: str, seed: int, out_path: Path) -> ImageRef:
        encoded = base64.b64encode(image.read_bytes()).decode("ascii")
        body = self._post({"image": encoded, "instruction": instruction, "seed": seed})
        payload = body.get("image")
        if not isinstance(payload, str):
            raise BackendProtocolError(f"{self.endpoint}: missing 'image' in response")
        try:
            data = base64.b64decode(payload, validate=True)
        except (ValueError, TypeError) as exc:
            raise BackendProtocolError(f"{self.endpoint}: image payload is not base64") from exc
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_bytes(data)
        return ImageRef.from_path(out_path)


class HttpFeatureClient(_HttpBackend):
    """Embedding endpoint: {image: base64} -> {features: N x D array}.

    The feature dimension is pinned by the first response; later responses
    with a different width are protocol errors.
    """

    def __init__(self, endpoint: str | None = None, **kwargs):
        endpoint = endpoint or os.environ.get(EMBEDDER_URL_ENV)
        if not endpoint:
            raise BackendError(f"no embedder endpoint; set {EMBEDDER_URL_ENV} or configure one")
        super().__init__(endpoint, **kwargs)
        self._dim: int | None = None
        self._dim_lock = threading.Lock()

    def embed(self, image: ImageRef) -> np.ndarray:
        encoded = base64.b64encode(image.read_bytes()).decode("ascii")
        body = self._post({"image": encoded})
        features = body.get("features")
        try:
            matrix = np.asarray(features, dtype=np.float64)
        except (ValueError, TypeError) as exc:
            raise BackendProtocolError(f"{self.endpoint}: features are not numeric") from exc
        if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
            raise BackendProtocolError(f"{self.endpoint}: features must be a 2-D matrix")
        if not np.isfinite(matrix).all():
            raise BackendProtocolError(f"{self.endpoint}: features contain non-finite values")
        with self._dim_lock:
            if self._dim is None:
                self._dim = matrix.shape[1]
            elif matrix.shape[1] != self._dim:
                raise BackendProtocolError(
                    f"{self.endpoint}: feature dimension changed from {self._dim} "
                    f"to {matrix.shape[1]}"
                )
        return matrix
