"""Image-edit backends behind one interface.

Three implementations: the remote multimodal-model client (HTTP POST of
{prompt, image} JSON), the deterministic local chain over the op registry,
and a fixture-returning mock. Credentials are resolved from the
environment at call time and never logged or persisted.
"""

import base64
import logging
import os
import threading
import time
from dataclasses import dataclass, field

import requests

from . import ops, raster
from .config import LOCAL, MOCK, REMOTE, BackendConfig, SessionConfig
from .errors import BackendUnavailable, MalformedResponse
from .pipelinedef import StepSpec

log = logging.getLogger(__name__)

READY = "Ready"
DEGRADED = "Degraded"
UNREACHABLE = "Unreachable"

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


@dataclass
class EditRequest:
    step: StepSpec
    prompt: str
    image: bytes
    session_id: str
    attempt: int
    params: SessionConfig

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.attempt < 1:
            raise ValueError("attempt must be >= 1")


@dataclass
class EditResult:
    image: bytes
    width: int
    height: int
    kind: str
    warnings: list = field(default_factory=list)


class LocalBackend:
    """Runs the step's op chain; referentially transparent."""

    id = "local"

    def edit_image(self, request: EditRequest) -> EditResult:
        arr = raster.decode_image(request.image)
        out = ops.run_chain(request.step.local_op_chain, arr, request.params)
        h, w = out.shape[:2]
        return EditResult(image=raster.encode_png(out), width=w, height=h,
                          kind=request.step.output_kind)

    def health_check(self) -> str:
        return READY


class MockBackend:
    """Returns a per-step fixture when configured, else the input unchanged."""

    id = "mock"

    def __init__(self, fixtures: dict | None = None):
        self.fixtures = fixtures or {}

    def edit_image(self, request: EditRequest) -> EditResult:
        data = self.fixtures.get(request.step.index, request.image)
        arr = raster.decode_image(data)
        h, w = arr.shape[:2]
        return EditResult(image=data, width=w, height=h,
                          kind=request.step.output_kind)

    def health_check(self) -> str:
        return READY


class RemoteBackend:
    """Client for the remote edit service with exponential-backoff retries.

    Wire format: POST endpoint_url, JSON {"prompt": str, "image": base64
    PNG}; response JSON {"image": base64 PNG}. Attempt k (k = 1..max_retries)
    waits backoff_base * 2^(k-1) ms before retrying.
    """

    id = "remote"

    def __init__(self, config: BackendConfig, session=None):
        self.config = config
        self._http = session or requests.Session()
        self._slots = threading.Semaphore(config.max_concurrent)

    def _credential(self) -> str | None:
        return os.environ.get(self.config.credential_source)

    def edit_image(self, request: EditRequest) -> EditResult:
        cfg = self.config
        body = {"prompt": request.prompt,
                "image": base64.b64encode(request.image).decode("ascii")}
        headers = {}
        credential = self._credential()
        if credential:
            headers["Authorization"] = f"Bearer {credential}"
        attempts = 0
        last_reason = "no attempt made"
        with self._slots:
            for attempt in range(cfg.max_retries + 1):
                if attempt > 0:
                    delay = cfg.backoff_base * 2 ** (attempt - 1) / 1000.0
                    time.sleep(delay)
                attempts += 1
                try:
                    resp = self._http.post(cfg.endpoint_url, json=body,
                                           headers=headers, timeout=cfg.timeout)
                except requests.RequestException as exc:
                    last_reason = type(exc).__name__
                    log.warning("remote edit attempt %d failed: %s",
                                attempts, last_reason)
                    continue
                if resp.status_code in _RETRYABLE_STATUS:
                    last_reason = f"HTTP {resp.status_code}"
                    log.warning("remote edit attempt %d failed: %s",
                                attempts, last_reason)
                    continue
                if resp.status_code != 200:
                    raise MalformedResponse(
                        f"remote returned HTTP {resp.status_code}")
                return self._decode_response(resp, request)
        raise BackendUnavailable(
            f"remote backend failed after {attempts} attempt(s): {last_reason}",
            attempts=attempts)

    def _decode_response(self, resp, request: EditRequest) -> EditResult:
        try:
            payload = resp.json()
            img_b64 = payload["image"]
            data = base64.b64decode(img_b64)
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedResponse(f"undecodable response body: {exc}") from exc
        try:
            arr = raster.decode_image(data)
        except Exception as exc:
            raise MalformedResponse(f"response is not an image: {exc}") from exc
        src = raster.decode_image(request.image)
        warnings = []
        if arr.shape[:2] != src.shape[:2]:
            arr = raster.resample_bilinear(arr, src.shape[1], src.shape[0])
            data = raster.encode_png(arr)
            warnings.append("ResampledOutput")
        h, w = arr.shape[:2]
        return EditResult(image=data, width=w, height=h,
                          kind=request.step.output_kind, warnings=warnings)

    def health_check(self) -> str:
        start = time.monotonic()
        try:
            self._http.get(self.config.endpoint_url, timeout=self.config.timeout)
        except requests.RequestException:
            return UNREACHABLE
        latency = time.monotonic() - start
        return DEGRADED if latency > self.config.timeout / 2 else READY


def make_backend(config: BackendConfig):
    if config.kind == LOCAL:
        return LocalBackend()
    if config.kind == MOCK:
        return MockBackend()
    if config.kind == REMOTE:
        return RemoteBackend(config)
    raise ValueError(f"unknown backend kind {config.kind!r}")
