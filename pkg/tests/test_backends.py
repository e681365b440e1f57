import hashlib
import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from triagekit.backends import (
    ExternalBackend,
    HashingBackend,
    backend_spec,
    external_backend,
    hashing_backend,
    resolve_backend,
    stable_token_hash,
)
from triagekit.errors import BackendTimeout, BackendUnreachable, DimensionMismatch


def independent_hash_embedding(text, dim, max_tokens=512):
    """Oracle built straight from the hash contract, no backend code."""
    vec = [0.0] * dim
    for token in text.split()[:max_tokens]:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        bucket = int.from_bytes(digest, "little") % dim
        vec[bucket] += 1.0
    norm = sum(v * v for v in vec) ** 0.5
    if norm > 0:
        vec = [v / norm for v in vec]
    return vec


class TestHashingBackend:
    def test_matches_independent_oracle(self):
        backend = hashing_backend(dim=64)
        for text in ["", "one", "fpga alert fpga", "many words " * 30]:
            assert backend.embed(text).tolist() == pytest.approx(
                independent_hash_embedding(text, 64), abs=1e-12
            )

    def test_deterministic_across_instances(self):
        a = hashing_backend(dim=128).embed("switch port flap detected")
        b = HashingBackend(dim=128).embed("switch port flap detected")
        assert np.array_equal(a, b)

    def test_unit_norm_unless_empty(self):
        backend = hashing_backend(dim=32)
        assert np.linalg.norm(backend.embed("a b c")) == pytest.approx(1.0)
        assert not backend.embed("").any()

    def test_truncates_to_max_tokens(self):
        backend = HashingBackend(dim=64, max_tokens=3)
        full = backend.embed("a b c")
        extended = backend.embed("a b c d e f")
        assert np.array_equal(full, extended)
        assert not np.array_equal(full, HashingBackend(dim=64, max_tokens=4).embed("a b c d"))

    def test_default_cap_is_512_tokens(self):
        backend = hashing_backend(dim=64)
        text_512 = " ".join(f"t{i}" for i in range(512))
        text_600 = " ".join(f"t{i}" for i in range(600))
        assert np.array_equal(backend.embed(text_512), backend.embed(text_600))

    def test_whitespace_tokenization_only(self):
        backend = hashing_backend(dim=64)
        # Punctuation stays attached; casing matters. No normalization here.
        assert not np.array_equal(backend.embed("Alert!"), backend.embed("alert"))

    def test_batch_stacks_rows(self):
        backend = hashing_backend(dim=32)
        batch = backend.embed_batch(["x", "y z"])
        assert batch.shape == (2, 32)
        assert np.array_equal(batch[0], backend.embed("x"))
        assert np.array_equal(batch[1], backend.embed("y z"))
        assert backend.embed_batch([]).shape == (0, 32)

    def test_dim_floor(self):
        with pytest.raises(ValueError):
            HashingBackend(dim=7)
        HashingBackend(dim=8)

    def test_token_hash_is_64_bit_little_endian_blake2b(self):
        expected = int.from_bytes(
            hashlib.blake2b(b"router", digest_size=8).digest(), "little"
        )
        assert stable_token_hash("router") == expected


class _StubHandler(BaseHTTPRequestHandler):
    behavior = "ok"
    dim = 16
    seen = []

    def log_message(self, *args):
        pass

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).seen.append((self.path, body))
        if type(self).behavior == "hang":
            time.sleep(2.0)
        texts = body["texts"]
        dim = type(self).dim
        if type(self).behavior == "wrong_dim":
            payload = {"dim": dim + 1, "vectors": [[0.0] * (dim + 1) for _ in texts]}
        else:
            payload = {
                "dim": dim,
                "vectors": [[float(len(t))] + [0.0] * (dim - 1) for t in texts],
            }
        raw = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)


@pytest.fixture
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    _StubHandler.behavior = "ok"
    _StubHandler.seen = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    server.server_close()


class TestExternalBackend:
    def test_round_trip(self, stub_server):
        backend = external_backend(stub_server, dim=16)
        vectors = backend.embed_batch(["ab", "abcd"])
        assert vectors.shape == (2, 16)
        assert vectors[0, 0] == 2.0 and vectors[1, 0] == 4.0
        single = backend.embed("xyz")
        assert single.shape == (16,) and single[0] == 3.0

    def test_posts_texts_and_max_tokens_to_embed_route(self, stub_server):
        backend = external_backend(stub_server + "/", dim=16, max_tokens=99)
        backend.embed_batch(["hello"])
        path, body = _StubHandler.seen[-1]
        assert path == "/embed"
        assert body == {"texts": ["hello"], "max_tokens": 99}

    def test_dim_mismatch_raises(self, stub_server):
        _StubHandler.behavior = "wrong_dim"
        backend = external_backend(stub_server, dim=16)
        with pytest.raises(DimensionMismatch):
            backend.embed("text")

    def test_timeout_raises_backend_timeout(self, stub_server):
        _StubHandler.behavior = "hang"
        backend = external_backend(stub_server, dim=16, timeout_s=0.2)
        with pytest.raises(BackendTimeout):
            backend.embed("text")

    def test_unreachable_raises(self):
        backend = external_backend("http://127.0.0.1:1", dim=16, timeout_s=0.5)
        with pytest.raises(BackendUnreachable):
            backend.embed("text")

    def test_empty_batch_skips_network(self):
        backend = external_backend("http://127.0.0.1:1", dim=16)
        assert backend.embed_batch([]).shape == (0, 16)


class TestSpecs:
    def test_hashing_spec_round_trip(self):
        backend = hashing_backend(dim=256)
        assert backend_spec(backend) == "hashing:256"
        resolved = resolve_backend("hashing:256")
        assert isinstance(resolved, HashingBackend) and resolved.dim == 256

    def test_external_spec_round_trip(self):
        backend = external_backend("http://models.internal:9090", dim=384)
        spec = backend_spec(backend)
        assert spec == "external:384:http://models.internal:9090"
        resolved = resolve_backend(spec)
        assert isinstance(resolved, ExternalBackend)
        assert resolved.dim == 384
        assert resolved.endpoint == "http://models.internal:9090"

    def test_endpoint_with_port_survives_colons(self):
        resolved = resolve_backend("external:64:http://10.0.0.5:8000/v1")
        assert resolved.endpoint == "http://10.0.0.5:8000/v1"

    def test_bad_specs_rejected(self):
        with pytest.raises(ValueError):
            resolve_backend("external:64")
        with pytest.raises(ValueError):
            resolve_backend("quantum:64")
        with pytest.raises(ValueError):
            resolve_backend("hashing:seven")

    def test_max_tokens_passthrough(self):
        assert resolve_backend("hashing:64", max_tokens=9).max_tokens == 9
