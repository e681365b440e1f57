"""Text-encoder backends for the MLP head.

The head never trains its encoder; it only needs a deterministic map from
text to a fixed-width vector. Two providers:

* ``HashingBackend``: stable-hash bag of the first ``max_tokens``
  whitespace tokens, L2-normalized. No weights, no network, bit-stable
  across processes (the hash is blake2b, not the per-process-randomized
  builtin). The stand-in used by every test.
* ``ExternalBackend``: proxies a pretrained encoder over HTTP.
    POST {endpoint}/embed  {"texts": [...], "max_tokens": int}
      -> {"dim": int, "vectors": [[...], ...]}

Backends are identified by a spec string (``hashing:256`` or
``external:<dim>:<endpoint>``) stored in artifacts, so a loaded model can
reconstruct the encoder it was trained with.
"""

from __future__ import annotations

import hashlib
import json
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BackendTimeout, BackendUnreachable, DimensionMismatch

__all__ = [
    "DEFAULT_MAX_TOKENS",
    "ExternalBackend",
    "HashingBackend",
    "backend_spec",
    "hashing_backend",
    "external_backend",
    "resolve_backend",
    "stable_token_hash",
]

DEFAULT_MAX_TOKENS = 512
DEFAULT_TIMEOUT_S = 30.0


def stable_token_hash(token: str) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class HashingBackend:
    dim: int = 256
    max_tokens: int = DEFAULT_MAX_TOKENS
    name: str = field(default="hashing", init=False)

    def __post_init__(self) -> None:
        if self.dim < 8:
            raise ValueError(f"hashing dim must be >= 8, got {self.dim}")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in text.split()[: self.max_tokens]:
            vec[stable_token_hash(token) % self.dim] += 1.0
        norm = np.linalg.norm(vec)
        if norm > 0.0:
            vec /= norm
        return vec

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim), dtype=np.float64)
        return np.stack([self.embed(t) for t in texts])


@dataclass(frozen=True)
class ExternalBackend:
    endpoint: str
    dim: int
    max_tokens: int = DEFAULT_MAX_TOKENS
    timeout_s: float = DEFAULT_TIMEOUT_S
    name: str = field(default="external", init=False)

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim), dtype=np.float64)
        body = json.dumps({"texts": list(texts), "max_tokens": self.max_tokens})
        request = urllib.request.Request(
            self.endpoint.rstrip("/") + "/embed",
            data=body.encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout_s) as response:
                payload = json.loads(response.read().decode("utf-8"))
        except TimeoutError as exc:
            raise BackendTimeout(f"{self.endpoint}: {exc}") from exc
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, TimeoutError):
                raise BackendTimeout(f"{self.endpoint}: {exc.reason}") from exc
            raise BackendUnreachable(f"{self.endpoint}: {exc.reason}") from exc
        except OSError as exc:
            raise BackendUnreachable(f"{self.endpoint}: {exc}") from exc
        if payload.get("dim") != self.dim:
            raise DimensionMismatch(self.dim, payload.get("dim", -1))
        vectors = np.asarray(payload["vectors"], dtype=np.float64)
        if vectors.shape != (len(texts), self.dim):
            raise DimensionMismatch(self.dim, vectors.shape[-1] if vectors.ndim else -1)
        return vectors


def hashing_backend(dim: int = 256, max_tokens: int = DEFAULT_MAX_TOKENS) -> HashingBackend:
    return HashingBackend(dim=dim, max_tokens=max_tokens)


def external_backend(
    endpoint: str,
    dim: int,
    max_tokens: int = DEFAULT_MAX_TOKENS,
    timeout_s: float = DEFAULT_TIMEOUT_S,
) -> ExternalBackend:
    return ExternalBackend(endpoint=endpoint, dim=dim, max_tokens=max_tokens, timeout_s=timeout_s)


def backend_spec(backend: HashingBackend | ExternalBackend) -> str:
    """Identifier stored in artifacts; resolve_backend() inverts it."""
    if isinstance(backend, HashingBackend):
        return f"hashing:{backend.dim}"
    return f"external:{backend.dim}:{backend.endpoint}"


def resolve_backend(spec: str, max_tokens: int = DEFAULT_MAX_TOKENS):
    kind, _, rest = spec.partition(":")
    if kind == "hashing":
        return HashingBackend(dim=int(rest), max_tokens=max_tokens)
    if kind == "external":
        dim_text, _, endpoint = rest.partition(":")
        if not endpoint:
            raise ValueError(f"external backend spec needs 'external:<dim>:<endpoint>', got {spec!r}")
        return ExternalBackend(endpoint=endpoint, dim=int(dim_text), max_tokens=max_tokens)
    raise ValueError(f"unknown backend spec {spec!r}")
