"""Document embedding providers and the chunk-and-average rule.

Two providers share one interface: a deterministic seeded feature-hashing
embedder that needs no model runtime, and an HTTP client for external model
servers speaking the /v1/embed protocol. Documents of the FULL variant are
split into ``chunk_count`` near-equal character chunks (boundaries snapped to
token starts) and the chunk vectors are averaged; BOC/UC documents embed in a
single call.
"""
from __future__ import annotations

import hashlib
import json
import re
from bisect import bisect_left
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
import requests

from .distill import DistilledDoc, Variant
from .errors import DimMismatch, ProtocolError, TransportError

DEFAULT_DIM = 768
DEFAULT_CHUNK_COUNT = 20
DEFAULT_BATCH_SIZE = 16
REQUEST_TIMEOUT_S = 120.0

KIND_BUILTIN = "builtin_hashed"
KIND_REMOTE = "remote"

_SEGMENT_RE = re.compile(r"\S+")


@dataclass(frozen=True)
class ProviderConfig:
    kind: str
    model_name: str
    dim: int = DEFAULT_DIM
    endpoint: str | None = None
    chunk_count: int = DEFAULT_CHUNK_COUNT
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (KIND_BUILTIN, KIND_REMOTE):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.chunk_count < 1:
            raise ValueError("chunk_count must be >= 1")
        if self.kind == KIND_REMOTE and not self.endpoint:
            raise ValueError("remote provider requires an endpoint")


class EmbeddingProvider(Protocol):
    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]: ...


def _hash64(token: str, seed: int, person: bytes) -> int:
    key = (seed % 2**64).to_bytes(8, "little")
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=key, person=person).digest()
    return int.from_bytes(digest, "big")


def embed_builtin(text: str, config: ProviderConfig, _cache: dict | None = None) -> np.ndarray:
    """Signed feature hashing of whitespace tokens, L2-normalized.

    Bucket index comes from a seeded 64-bit hash, the sign from the parity of
    a second hash; identical (text, seed, dim) always yields identical bits.
    """
    vec = np.zeros(config.dim, dtype=np.float64)
    for token in text.split():
        cached = _cache.get(token) if _cache is not None else None
        if cached is None:
            bucket = _hash64(token, config.seed, b"bucket") % config.dim
            sign = 1.0 if _hash64(token, config.seed, b"sign") % 2 == 0 else -1.0
            cached = (bucket, sign)
            if _cache is not None:
                _cache[token] = cached
        vec[cached[0]] += cached[1]
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


class BuiltinHashedProvider:
    """Stateless after construction; the token cache is a pure memo."""

    def __init__(self, config: ProviderConfig):
        if config.kind != KIND_BUILTIN:
            raise ValueError("config.kind must be builtin_hashed")
        self.config = config
        self._token_cache: dict[str, tuple[int, float]] = {}

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [embed_builtin(t, self.config, self._token_cache) for t in texts]


def embed_remote(texts: Sequence[str], config: ProviderConfig) -> list[np.ndarray]:
    """POST the batch to {endpoint}/v1/embed and validate the response shape."""
    url = config.endpoint.rstrip("/") + "/v1/embed"
    payload = {"model": config.model_name, "texts": list(texts)}
    try:
        resp = requests.post(url, json=payload, timeout=REQUEST_TIMEOUT_S)
    except requests.RequestException as e:
        raise TransportError(f"embedding endpoint unreachable: {e}") from e
    if resp.status_code != 200:
        raise ProtocolError(resp.status_code, resp.text)
    try:
        body = resp.json()
    except json.JSONDecodeError:
        raise ProtocolError(resp.status_code, f"non-JSON body: {resp.text[:200]}") from None
    vectors = body.get("vectors")
    if not isinstance(vectors, list):
        raise ProtocolError(resp.status_code, "response missing 'vectors' list")
    if len(vectors) != len(texts):
        raise ProtocolError(
            resp.status_code, f"{len(texts)} texts sent, {len(vectors)} vectors returned"
        )
    reported_dim = body.get("dim")
    if isinstance(reported_dim, int) and reported_dim != config.dim:
        raise DimMismatch(config.dim, reported_dim)
    out = []
    for vec in vectors:
        arr = np.asarray(vec, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] != config.dim:
            raise DimMismatch(config.dim, int(arr.shape[0]) if arr.ndim == 1 else -1)
        if not np.all(np.isfinite(arr)):
            raise ProtocolError(resp.status_code, "non-finite value in embedding vector")
        out.append(arr)
    return out


class RemoteProvider:
    def __init__(self, config: ProviderConfig):
        if config.kind != KIND_REMOTE:
            raise ValueError("config.kind must be remote")
        self.config = config

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        return embed_remote(texts, self.config)


def make_provider(config: ProviderConfig) -> EmbeddingProvider:
    if config.kind == KIND_BUILTIN:
        return BuiltinHashedProvider(config)
    return RemoteProvider(config)


def chunk_text(text: str, chunk_count: int) -> list[str]:
    """Split into up to chunk_count contiguous chunks of near-equal character
    length, with boundaries snapped forward to token starts.

    Concatenating the chunks reproduces the text; the chunk count equals
    min(chunk_count, number of whitespace-separated tokens). Text with no
    tokens comes back as a single chunk.
    """
    if chunk_count < 1:
        raise ValueError("chunk_count must be >= 1")
    starts = [m.start() for m in _SEGMENT_RE.finditer(text)]
    n_segments = len(starts)
    if n_segments == 0:
        return [text]
    n_chunks = min(chunk_count, n_segments)
    boundaries: list[int] = []
    prev_seg = 0   # first chunk owns segment 0
    for k in range(1, n_chunks):
        budget = round(k * len(text) / n_chunks)
        seg = bisect_left(starts, budget)
        # keep boundaries strictly increasing and leave one segment per chunk
        seg = min(max(seg, prev_seg + 1), n_segments - (n_chunks - k))
        boundaries.append(starts[seg])
        prev_seg = seg
    edges = [0, *boundaries, len(text)]
    return [text[edges[i]:edges[i + 1]] for i in range(len(edges) - 1)]


def embed_document(doc: DistilledDoc, provider: EmbeddingProvider, config: ProviderConfig) -> np.ndarray:
    """FULL docs: chunk, embed each chunk, average. BOC/UC: one call."""
    if doc.variant is Variant.FULL:
        chunks = chunk_text(doc.text, config.chunk_count)
        vectors = provider.embed_batch(chunks)
        return np.mean(np.stack(vectors), axis=0)
    return provider.embed_batch([doc.text])[0]


def embed_corpus(
    docs: Sequence[DistilledDoc],
    provider: EmbeddingProvider,
    config: ProviderConfig,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> list[tuple[str, np.ndarray]]:
    """Embed every document, preserving input order.

    FULL documents embed one at a time (their chunks form the batch); other
    variants are batched across documents. The first provider error aborts the
    run with the offending patient ids attached.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    out: list[tuple[str, np.ndarray]] = []
    full_docs = [d for d in docs if d.variant is Variant.FULL]
    if full_docs and len(full_docs) != len(docs):
        raise ValueError("embed_corpus expects a single variant per call")
    if full_docs:
        for doc in docs:
            try:
                out.append((doc.patient_id, embed_document(doc, provider, config)))
            except Exception as e:
                e.args = (f"patient {doc.patient_id}: {e}",)
                raise
        return out
    for i in range(0, len(docs), batch_size):
        batch = docs[i:i + batch_size]
        try:
            vectors = provider.embed_batch([d.text for d in batch])
        except Exception as e:
            ids = ", ".join(d.patient_id for d in batch)
            e.args = (f"patients [{ids}]: {e}",)
            raise
        out.extend((d.patient_id, v) for d, v in zip(batch, vectors))
    return out


def write_embedding_matrix(rows: Sequence[tuple[str, np.ndarray]], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for patient_id, vec in rows:
            fh.write(json.dumps({"patient_id": patient_id, "vector": [float(x) for x in vec]}))
            fh.write("\n")


def read_embedding_matrix(path: str | Path) -> list[tuple[str, np.ndarray]]:
    rows = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            rows.append((obj["patient_id"], np.asarray(obj["vector"], dtype=np.float64)))
    return rows
