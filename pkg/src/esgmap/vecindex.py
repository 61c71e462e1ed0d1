"""Embedding backends and an exact cosine top-k index over document chunks.

The index is an embedded replacement for a hosted vector database: retrieval
is an exhaustive scan over unit-normalized float64 vectors, which keeps
results exact and bit-reproducible at the corpus sizes this pipeline targets
(hundreds to thousands of chunks per document set).
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import struct
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .corpus import Chunk
from .exceptions import BackendError, EmbedderMismatchError

_MAGIC = b"ESGVIDX1"
_WORD = re.compile(r"[a-z0-9]+")


class EmbeddingBackend(Protocol):
    """Provider contract: raw (un-normalized) vectors for a batch of texts."""

    embedder_id: str
    dimension: int

    def encode(self, texts: Sequence[str]) -> list[list[float]]: ...


class HashedBagOfWordsEmbedder:
    """Deterministic test embedder: hashed bag-of-words over D buckets.

    Lowercases, splits on non-alphanumerics, hashes each token into one of
    `dimension` buckets with a fixed keyed hash, and counts. Requires no
    network and reproduces retrieval decisions bit-for-bit across runs.
    """

    def __init__(self, dimension: int = 256, seed: str = "esgmap-v1"):
        self.dimension = dimension
        self.seed = seed
        self.embedder_id = f"hashed-bow-{dimension}"
        self._key = seed.encode("utf-8")

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=self._key).digest()
        return int.from_bytes(digest, "big") % self.dimension

    def encode(self, texts: Sequence[str]) -> list[list[float]]:
        out = []
        for text in texts:
            counts = [0.0] * self.dimension
            for token in _WORD.findall(text.lower()):
                counts[self._bucket(token)] += 1.0
            out.append(counts)
        return out


class RemoteEmbedder:
    """HTTP embedding provider speaking the fixed record schema.

    Request: {"model": <id>, "texts": [...]}
    Response: {"vectors": [[...], ...], "dimension": D, "model_id": <id>}
    """

    def __init__(self, endpoint: str, model: str, dimension: int,
                 api_key: str = "", max_attempts: int = 3, timeout: float = 30.0):
        self.endpoint = endpoint
        self.model = model
        self.dimension = dimension
        self.embedder_id = model
        self.api_key = api_key
        self.max_attempts = max_attempts
        self.timeout = timeout

    @classmethod
    def from_env(cls) -> "RemoteEmbedder":
        endpoint = os.environ.get("EMBED_ENDPOINT", "")
        model = os.environ.get("EMBED_MODEL", "")
        if not endpoint or not model:
            raise BackendError("EMBED_ENDPOINT and EMBED_MODEL must be set")
        dim = int(os.environ.get("EMBED_DIMENSION", "0"))
        return cls(endpoint, model, dim, api_key=os.environ.get("EMBED_API_KEY", ""))

    def encode(self, texts: Sequence[str]) -> list[list[float]]:
        import httpx

        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {"model": self.model, "texts": list(texts)}
        last_err = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                resp = httpx.post(self.endpoint, json=payload, headers=headers, timeout=self.timeout)
                resp.raise_for_status()
                data = resp.json()
                vectors = data["vectors"]
                if self.dimension and int(data.get("dimension", self.dimension)) != self.dimension:
                    raise BackendError(
                        f"provider returned dimension {data.get('dimension')}, expected {self.dimension}",
                        attempts=attempt,
                    )
                if not self.dimension:
                    self.dimension = int(data.get("dimension", len(vectors[0]) if vectors else 0))
                return vectors
            except BackendError:
                raise
            except Exception as exc:  # transport or schema failure, retry
                last_err = exc
                if attempt < self.max_attempts:
                    time.sleep(0.2 * attempt)
        raise BackendError(f"embedding request failed: {last_err}", attempts=self.max_attempts)


def embed(texts: Sequence[str], provider: EmbeddingBackend) -> np.ndarray:
    """Embed texts and L2-normalize, returning a (n, D) float64 array.

    Order follows the input. Zero vectors (no recognizable content) and
    non-finite entries are rejected; dimension must match the provider's
    declared D.
    """
    texts = list(texts)
    if any(not isinstance(t, str) or not t for t in texts):
        raise ValueError("texts must be non-empty strings")
    if not texts:
        return np.zeros((0, provider.dimension), dtype=np.float64)
    vectors = np.asarray(provider.encode(texts), dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape != (len(texts), provider.dimension):
        raise BackendError(
            f"provider returned shape {vectors.shape}, expected ({len(texts)}, {provider.dimension})"
        )
    if not np.isfinite(vectors).all():
        raise ValueError("embedding contains non-finite entries")
    norms = np.linalg.norm(vectors, axis=1)
    if (norms == 0).any():
        bad = int(np.argmax(norms == 0))
        raise ValueError(f"zero embedding vector for text index {bad}: {texts[bad][:60]!r}")
    return vectors / norms[:, None]


@dataclass(frozen=True)
class ChunkRef:
    """Self-contained pointer to a chunk: enough to re-resolve its span."""

    chunk_id: str
    doc_id: str
    char_start: int
    char_end: int

    @classmethod
    def from_chunk(cls, chunk: Chunk) -> "ChunkRef":
        return cls(chunk.chunk_id, chunk.doc_id, chunk.char_start, chunk.char_end)


@dataclass(frozen=True)
class RetrievalHit:
    ref: ChunkRef
    score: float


class VectorIndex:
    """Immutable store of (chunk ref, unit vector) rows for one embedder."""

    def __init__(self, dimension: int, embedder_id: str,
                 refs: Sequence[ChunkRef], vectors: np.ndarray):
        if vectors.shape != (len(refs), dimension):
            raise ValueError(f"vectors shape {vectors.shape} != ({len(refs)}, {dimension})")
        ids = [r.chunk_id for r in refs]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate chunk ids in index: {dupes[:3]}")
        self.dimension = dimension
        self.embedder_id = embedder_id
        self.refs = tuple(refs)
        self.vectors = np.ascontiguousarray(vectors, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.refs)

    def equals(self, other: "VectorIndex") -> bool:
        return (
            self.dimension == other.dimension
            and self.embedder_id == other.embedder_id
            and self.refs == other.refs
            and np.array_equal(self.vectors, other.vectors)
        )


def build_index(chunks: Sequence[Chunk], provider: EmbeddingBackend,
                batch_size: int = 64) -> VectorIndex:
    """Embed every chunk and assemble the index; chunk ids must be unique."""
    if not chunks:
        raise ValueError("cannot build an index from an empty chunk list")
    ids = [c.chunk_id for c in chunks]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ValueError(f"duplicate chunk ids: {dupes[:3]}")
    rows = []
    for i in range(0, len(chunks), batch_size):
        batch = chunks[i : i + batch_size]
        rows.append(embed([c.text for c in batch], provider))
    vectors = np.vstack(rows)
    refs = [ChunkRef.from_chunk(c) for c in chunks]
    return VectorIndex(provider.dimension, provider.embedder_id, refs, vectors)


def query_top_k(index: VectorIndex, query_text: str, k: int,
                provider: EmbeddingBackend) -> list[RetrievalHit]:
    """Exact cosine top-k: full scan, score descending, ties by chunk_id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(index) == 0:
        raise ValueError("index is empty")
    if provider.embedder_id != index.embedder_id:
        raise EmbedderMismatchError(
            f"index built with {index.embedder_id!r} but queried with {provider.embedder_id!r}"
        )
    q = embed([query_text], provider)[0]
    return rank_by_cosine(index, q, k)


def rank_by_cosine(index: VectorIndex, query_vec: np.ndarray, k: int) -> list[RetrievalHit]:
    """Rank all entries against a unit query vector (exhaustive, exact)."""
    scores = index.vectors @ np.asarray(query_vec, dtype=np.float64)
    scores = np.clip(scores, -1.0, 1.0)
    order = sorted(range(len(index)), key=lambda i: (-scores[i], index.refs[i].chunk_id))
    return [RetrievalHit(index.refs[i], float(scores[i])) for i in order[:k]]


def save_index(index: VectorIndex, path: str | Path) -> None:
    """Persist to the binary index format (header + per-entry IEEE-754 doubles)."""
    path = Path(path)
    header = json.dumps(
        {"dimension": index.dimension, "embedder_id": index.embedder_id, "count": len(index)}
    ).encode("utf-8")
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for ref, vec in zip(index.refs, index.vectors):
            rid = json.dumps(
                [ref.chunk_id, ref.doc_id, ref.char_start, ref.char_end]
            ).encode("utf-8")
            fh.write(struct.pack("<I", len(rid)))
            fh.write(rid)
            fh.write(vec.tobytes())


def load_index(path: str | Path) -> VectorIndex:
    path = Path(path)
    with path.open("rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path} is not an esgmap vector index")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        dim, count = int(header["dimension"]), int(header["count"])
        refs = []
        vectors = np.empty((count, dim), dtype=np.float64)
        for i in range(count):
            (rlen,) = struct.unpack("<I", fh.read(4))
            cid, did, start, end = json.loads(fh.read(rlen).decode("utf-8"))
            refs.append(ChunkRef(cid, did, int(start), int(end)))
            vectors[i] = np.frombuffer(fh.read(8 * dim), dtype=np.float64)
    return VectorIndex(dim, header["embedder_id"], refs, vectors)
