"""Backend behavior: retries against a stub HTTP server, credential
hygiene, and substitutability."""

import base64
import json
import logging
import threading
import time
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from angioforge.backends import (EditRequest, LocalBackend, MockBackend,
                                 RemoteBackend, make_backend)
from angioforge.config import BackendConfig, SessionConfig
from angioforge.errors import BackendUnavailable, MalformedResponse
from angioforge.pipelinedef import PIPELINE
from angioforge.raster import content_hash, decode_image, encode_png


class _StubHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        script = self.server.script
        n = self.server.request_count
        self.server.request_count += 1
        self.server.timestamps.append(time.monotonic())
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        self.server.seen_headers.append(dict(self.headers))
        status = script[min(n, len(script) - 1)]
        if status != 200:
            self.send_response(status)
            self.end_headers()
            return
        payload = json.dumps({"image": self.server.reply_image_b64(body)})
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(payload.encode())

    def log_message(self, *args):
        pass


class _Stub:
    """HTTP server answering the scripted status sequence, then echoing
    (or transforming) the posted image."""

    def __init__(self, script, transform=None):
        self.server = HTTPServer(("127.0.0.1", 0), _StubHandler)
        self.server.script = script
        self.server.request_count = 0
        self.server.timestamps = []
        self.server.seen_headers = []
        transform = transform or (lambda data: data)

        def reply(body):
            data = base64.b64decode(body["image"])
            return base64.b64encode(transform(data)).decode()

        self.server.reply_image_b64 = reply
        self.thread = threading.Thread(target=self.server.serve_forever,
                                       daemon=True)
        self.thread.start()
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}/edit"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def stub_factory():
    stubs = []

    def make(script, transform=None):
        s = _Stub(script, transform)
        stubs.append(s)
        return s

    yield make
    for s in stubs:
        s.close()


def _request(image=None, prompt="refine the projection"):
    if image is None:
        image = encode_png(np.full((32, 32), 99, dtype=np.uint8))
    return EditRequest(step=PIPELINE.step(1), prompt=prompt, image=image,
                      session_id="s1", attempt=1, params=SessionConfig())


def _remote(url, max_retries=3, backoff=40):
    return RemoteBackend(BackendConfig(kind="remote", endpoint_url=url,
                                       max_retries=max_retries,
                                       backoff_base=backoff))


def test_429_then_200_retries_once(stub_factory):
    stub = stub_factory([429, 200])
    backend = _remote(stub.url)
    result = backend.edit_image(_request())
    assert stub.server.request_count == 2
    assert decode_image(result.image).shape == (32, 32)


def test_persistent_500_exhausts_all_attempts(stub_factory):
    stub = stub_factory([500])
    backend = _remote(stub.url, max_retries=3, backoff=40)
    with pytest.raises(BackendUnavailable) as exc_info:
        backend.edit_image(_request())
    assert stub.server.request_count == 4
    assert exc_info.value.attempts == 4
    # exponential spacing: waits of at least 40, 80, 160 ms between attempts
    t = stub.server.timestamps
    gaps = [t[i + 1] - t[i] for i in range(3)]
    assert gaps[0] >= 0.040
    assert gaps[1] >= 0.080
    assert gaps[2] >= 0.160


def test_non_retryable_status_fails_fast(stub_factory):
    stub = stub_factory([403])
    backend = _remote(stub.url)
    with pytest.raises(MalformedResponse):
        backend.edit_image(_request())
    assert stub.server.request_count == 1


def test_dimension_mismatch_resampled_with_warning(stub_factory):
    big = encode_png(np.full((64, 64), 33, dtype=np.uint8))
    stub = stub_factory([200], transform=lambda data: big)
    backend = _remote(stub.url)
    result = backend.edit_image(_request())
    assert "ResampledOutput" in result.warnings
    assert decode_image(result.image).shape == (32, 32)


def test_malformed_json_response(stub_factory):
    stub = stub_factory([200], transform=lambda data: data)
    # sabotage: respond with non-image payload
    stub.server.reply_image_b64 = lambda body: base64.b64encode(
        b"this is not a png").decode()
    backend = _remote(stub.url)
    with pytest.raises(MalformedResponse):
        backend.edit_image(_request())


def test_credential_sent_as_bearer_only(stub_factory, monkeypatch):
    secret = "sk-test-credential-123456"
    monkeypatch.setenv("ANGIOFORGE_API_KEY", secret)
    stub = stub_factory([200])
    backend = _remote(stub.url)
    backend.edit_image(_request())
    headers = stub.server.seen_headers[0]
    assert headers.get("Authorization") == f"Bearer {secret}"


def test_credential_never_leaks(stub_factory, monkeypatch, caplog, store,
                                phantom_png):
    """The credential value must not appear in logs, errors, or manifests."""
    secret = "sk-super-secret-value-98765"
    monkeypatch.setenv("ANGIOFORGE_API_KEY", secret)
    stub = stub_factory([500])
    cfg = BackendConfig(kind="remote", endpoint_url=stub.url,
                        max_retries=2, backoff_base=10)
    backend = RemoteBackend(cfg)
    emitted = []
    with caplog.at_level(logging.DEBUG):
        try:
            backend.edit_image(_request())
        except BackendUnavailable as exc:
            emitted.append(str(exc))
            emitted.append(repr(exc))
    emitted.append(caplog.text)

    from angioforge.session import create_session
    session = create_session(store, phantom_png, SessionConfig(backend=cfg))
    emitted.append(store.manifest_path(session.id).read_text())
    emitted.append(json.dumps(cfg.__dict__, default=str))

    for text in emitted:
        assert secret not in text


def test_missing_credential_env_still_posts(stub_factory, monkeypatch):
    monkeypatch.delenv("ANGIOFORGE_API_KEY", raising=False)
    stub = stub_factory([200])
    backend = _remote(stub.url)
    backend.edit_image(_request())
    assert "Authorization" not in stub.server.seen_headers[0]


def test_local_backend_deterministic():
    backend = LocalBackend()
    r1 = backend.edit_image(_request())
    r2 = backend.edit_image(_request())
    assert content_hash(r1.image) == content_hash(r2.image)


def test_mock_backend_fixture_and_passthrough():
    img = encode_png(np.full((32, 32), 99, dtype=np.uint8))
    fixture = encode_png(np.full((32, 32), 1, dtype=np.uint8))
    backend = MockBackend(fixtures={1: fixture})
    out = backend.edit_image(_request(image=img))
    assert out.image == fixture
    # steps without a fixture pass the input through
    req2 = EditRequest(step=PIPELINE.step(2), prompt="x", image=img,
                       session_id="s1", attempt=1, params=SessionConfig())
    assert backend.edit_image(req2).image == img


def test_backends_are_substitutable():
    img = encode_png(np.full((48, 48), 180, dtype=np.uint8))
    for backend in (LocalBackend(), MockBackend()):
        result = backend.edit_image(_request(image=img))
        assert result.width == 48 and result.height == 48
        decode_image(result.image)  # must stay decodable


def test_edit_request_validates_prompt():
    with pytest.raises(ValueError):
        _request(prompt="")


def test_make_backend_dispatch():
    assert make_backend(BackendConfig(kind="local")).id == "local"
    assert make_backend(BackendConfig(kind="mock")).id == "mock"
    remote = make_backend(BackendConfig(kind="remote",
                                        endpoint_url="http://x/edit"))
    assert remote.id == "remote"
