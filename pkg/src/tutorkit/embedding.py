"""Text embeddings and vector similarity.

Vectors are numpy float64 arrays of a fixed dimension per provider
configuration. Two providers ship with the package: a deterministic
token-hash embedder for offline runs and tests, and a thin HTTP client
speaking a minimal JSON batch contract so any real embedding service can
be bridged without code changes.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Protocol, Sequence

import numpy as np

from .corpus import Chunk
from .errors import ConfigError, DimensionMismatchError, ProviderError

DEFAULT_DIM = 1536


def as_vector(values: Sequence[float] | np.ndarray) -> np.ndarray:
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1:
        raise ValueError("embedding vectors must be one-dimensional")
    if not np.all(np.isfinite(vec)):
        raise ValueError("embedding vectors must be finite")
    return vec


def is_degenerate(vector: Sequence[float] | np.ndarray) -> bool:
    """True for zero-norm vectors (empty text, no tokens)."""
    return float(np.linalg.norm(np.asarray(vector, dtype=np.float64))) == 0.0


def cosine_similarity(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    """cos(a, b) = dot(a, b) / (|a| * |b|), clamped to [-1, 1].

    Zero-norm input yields 0.0 rather than a division error; callers that
    care can test degeneracy with :func:`is_degenerate`.
    """
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise DimensionMismatchError(f"dim mismatch: {va.shape} vs {vb.shape}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        return 0.0
    value = float(np.dot(va, vb)) / (na * nb)
    return max(-1.0, min(1.0, value))


class EmbeddingProvider(Protocol):
    name: str
    dim: int

    def embed(self, text: str) -> np.ndarray: ...

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]: ...


_TOKEN_RE = re.compile(r"[a-z0-9]+")


class HashEmbedder:
    """Deterministic bag-of-tokens embedder for offline runs.

    Tokens are lowercase alphanumeric runs; each token is hashed to one
    component index with a hash-chosen sign, and the result is
    L2-normalized. Identical text always yields a bitwise-identical
    vector, across processes and platforms.
    """

    name = "hash-test"

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < 8:
            raise ConfigError("hash embedder dim must be >= 8")
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in _TOKEN_RE.findall(text.lower()):
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=16).digest()
            index = int.from_bytes(digest[:8], "big") % self.dim
            sign = 1.0 if digest[8] & 1 == 0 else -1.0
            vec[index] += sign
        norm = float(np.linalg.norm(vec))
        if norm > 0.0:
            vec /= norm
        return vec

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self.embed(t) for t in texts]


class RemoteHttpEmbedder:
    """Bridge to an external embedding service.

    Wire contract: POST {"texts": [...]} -> {"vectors": [[...], ...],
    "dim": N} with HTTP 200 only on full success. One POST per batch.
    """

    name = "remote-http"

    def __init__(self, endpoint: str, dim: int = DEFAULT_DIM, timeout: float = 30.0, client=None):
        if not endpoint:
            raise ConfigError("remote-http embedder requires an endpoint URL")
        self.endpoint = endpoint
        self.dim = dim
        self.timeout = timeout
        self._client = client  # injectable for tests

    def _post(self, texts: Sequence[str]) -> dict:
        import httpx

        client = self._client
        if client is None:
            response = httpx.post(self.endpoint, json={"texts": list(texts)}, timeout=self.timeout)
        else:
            response = client.post(self.endpoint, json={"texts": list(texts)})
        if response.status_code != 200:
            raise ProviderError(f"embedding service returned HTTP {response.status_code}")
        return response.json()

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            return []
        payload = self._post(texts)
        vectors = payload.get("vectors")
        dim = payload.get("dim")
        if vectors is None or len(vectors) != len(texts):
            raise ProviderError("embedding service returned a mismatched vector count")
        if dim != self.dim:
            raise ProviderError(f"embedding service dim {dim} != configured {self.dim}")
        out = []
        for values in vectors:
            vec = as_vector(values)
            if vec.shape[0] != self.dim:
                raise ProviderError("embedding service returned a wrong-dimension vector")
            out.append(vec)
        return out

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]


_REGISTRY = {
    "hash-test": lambda cfg: HashEmbedder(dim=int(cfg.get("dim", DEFAULT_DIM))),
    "remote-http": lambda cfg: RemoteHttpEmbedder(
        endpoint=cfg.get("endpoint", ""),
        dim=int(cfg.get("dim", DEFAULT_DIM)),
        timeout=float(cfg.get("timeout", 30.0)),
    ),
}


def create_provider(config: dict) -> EmbeddingProvider:
    """Build an embedding provider from configuration.

    ``config["provider"]`` names a registered provider; unknown names are
    a startup configuration error, not a runtime one.
    """
    name = config.get("provider", "hash-test")
    factory = _REGISTRY.get(name)
    if factory is None:
        raise ConfigError(
            f"unknown embedding provider {name!r}; known: {sorted(_REGISTRY)}"
        )
    return factory(config)


def register_provider(name: str, factory) -> None:
    _REGISTRY[name] = factory


@dataclass
class ChunkVector:
    """Embedding result for one chunk; ``error`` set when the provider failed."""

    chunk: Chunk
    vector: Optional[np.ndarray]
    error: Optional[str] = None


def embed_chunks(
    provider: EmbeddingProvider,
    chunks: Iterable[Chunk],
    batch_size: int = 16,
) -> list[ChunkVector]:
    """Embed chunks in order, batching internally.

    A failed batch is retried item by item so one bad input cannot poison
    its neighbors; chunks that still fail get per-chunk error entries
    instead of aborting the whole ingestion.
    """
    chunk_list = list(chunks)
    results: list[ChunkVector] = []
    for start in range(0, len(chunk_list), batch_size):
        batch = chunk_list[start : start + batch_size]
        texts = [c.text for c in batch]
        try:
            vectors = provider.embed_batch(texts)
            if len(vectors) != len(batch):
                raise ProviderError("provider returned a mismatched vector count")
            results.extend(ChunkVector(c, v) for c, v in zip(batch, vectors))
        except Exception:
            for chunk in batch:
                try:
                    vec = provider.embed_batch([chunk.text])[0]
                    results.append(ChunkVector(chunk, vec))
                except Exception as item_exc:
                    results.append(ChunkVector(chunk, None, error=str(item_exc)))
    return results


def unit_vector_at_angle(reference: np.ndarray, cosine: float) -> np.ndarray:
    """A unit vector whose cosine against unit ``reference`` is ``cosine``.

    Test helper for engineering exact retrieval scores. Requires
    dim >= 2; uses the first orthogonal axis found.
    """
    ref = as_vector(reference)
    ref = ref / np.linalg.norm(ref)
    # Build a vector orthogonal to ref.
    probe = np.zeros_like(ref)
    probe[int(np.argmin(np.abs(ref)))] = 1.0
    ortho = probe - np.dot(probe, ref) * ref
    ortho /= np.linalg.norm(ortho)
    return cosine * ref + math.sqrt(max(0.0, 1.0 - cosine * cosine)) * ortho
