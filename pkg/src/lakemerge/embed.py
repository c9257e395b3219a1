"""Attribute-level embeddings: hashed n-gram provider, HTTP provider, caching.

Every cell embeds to a d_k vector. Nulls map to one reserved unit-norm
vector per provider so the matcher can tell "missing" apart from any real
text; numbers embed through their canonical decimal string, so Number("1997")
and Text("1997") coincide.
"""

from __future__ import annotations

import hashlib
import os
import time
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .augment import SynonymDict
from .core import MaskVector, Row, Table, Value, mask_vector
from .seeds import rng_for

__all__ = [
    "ProviderError",
    "EmbeddingProvider",
    "HashedNgramProvider",
    "HttpEmbeddingProvider",
    "EmbeddingCache",
    "TupleEmbedding",
    "TableEmbedding",
    "hash_ngram_embed",
    "embed_value",
    "embed_row",
    "embed_table",
]

_TOKEN_ENV = "LAKEMERGE_EMBED_TOKEN"


class ProviderError(Exception):
    """The embedding service failed or answered with the wrong shape."""


class EmbeddingProvider(Protocol):
    def dimension(self) -> int: ...

    def embed_text(self, text: str) -> np.ndarray: ...

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]: ...

    def null_vector(self) -> np.ndarray: ...


def _null_vector(dim: int, seed: int) -> np.ndarray:
    v = rng_for(seed, "null-token").standard_normal(dim)
    return v / np.linalg.norm(v)


def hash_ngram_embed(
    text: str, d_k: int = 128, n_range: tuple[int, int] = (2, 4), seed: int = 0
) -> np.ndarray:
    """Sum of hash-indexed one-hot n-gram counts, L2-normalized.

    n-grams are taken over the text wrapped in boundary markers, for every
    n in [n_range[0], n_range[1]]. Empty text maps to the zero vector.
    """
    if d_k < 8:
        raise ValueError("d_k must be >= 8")
    vec = np.zeros(d_k)
    if not text:
        return vec
    marked = "\x02" + text + "\x03"
    salt = seed.to_bytes(8, "big", signed=False)
    lo, hi = n_range
    for n in range(lo, hi + 1):
        if len(marked) < n:
            break
        for i in range(len(marked) - n + 1):
            gram = marked[i : i + n]
            digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8, salt=salt).digest()
            vec[int.from_bytes(digest, "big") % d_k] += 1.0
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


class HashedNgramProvider:
    """Self-contained character n-gram embedder.

    Small typos change few n-grams, so perturbed strings land near their
    originals; known synonyms are folded to one canonical word first, so
    common paraphrases land exactly on theirs. Both stand in for the
    semantic closeness a pretrained encoder would give the matcher.
    """

    def __init__(self, dim: int = 128, n_range: tuple[int, int] = (2, 4), seed: int = 0):
        if dim < 8:
            raise ValueError("dim must be >= 8")
        self.dim = dim
        self.n_range = n_range
        self.seed = seed
        self._null = _null_vector(dim, seed)
        self._canon = SynonymDict.default().canonical_map()

    def dimension(self) -> int:
        return self.dim

    def embed_text(self, text: str) -> np.ndarray:
        words = text.split()
        mapped = [self._canon.get(w.lower(), w) for w in words]
        if mapped != words:
            text = " ".join(mapped)
        return hash_ngram_embed(text, self.dim, self.n_range, self.seed)

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self.embed_text(t) for t in texts]

    def null_vector(self) -> np.ndarray:
        return self._null.copy()


class HttpEmbeddingProvider:
    """Client for an embedding service: POST {"inputs": [...]} -> {"vectors": [...]}.

    Requests are sent in sequential batches (in-flight count never exceeds
    the configured bound) with exponential-backoff retry. The bearer token,
    if any, comes from the LAKEMERGE_EMBED_TOKEN environment variable only.
    """

    def __init__(
        self,
        url: str,
        dim: int = 768,
        seed: int = 0,
        batch_size: int = 64,
        max_in_flight: int = 8,
        attempts: int = 3,
        timeout: float = 30.0,
        backoff: float = 0.5,
    ):
        if dim < 8:
            raise ValueError("dim must be >= 8")
        self.url = url
        self.dim = dim
        self.batch_size = batch_size
        self.max_in_flight = max_in_flight
        self.attempts = attempts
        self.timeout = timeout
        self.backoff = backoff
        self._null = _null_vector(dim, seed)
        import requests

        self._session = requests.Session()
        token = os.environ.get(_TOKEN_ENV)
        if token:
            self._session.headers["Authorization"] = f"Bearer {token}"

    def dimension(self) -> int:
        return self.dim

    def _post(self, texts: Sequence[str]) -> list[np.ndarray]:
        last: Exception | None = None
        for attempt in range(self.attempts):
            try:
                resp = self._session.post(
                    self.url, json={"inputs": list(texts)}, timeout=self.timeout
                )
                resp.raise_for_status()
                vectors = resp.json()["vectors"]
                if len(vectors) != len(texts):
                    raise ProviderError(
                        f"expected {len(texts)} vectors, got {len(vectors)}"
                    )
                out = [np.asarray(v, dtype=float) for v in vectors]
                for v in out:
                    if v.shape != (self.dim,):
                        raise ProviderError(f"bad vector shape {v.shape}")
                return out
            except ProviderError:
                raise
            except Exception as exc:  # transport or JSON shape trouble: retry
                last = exc
                if attempt + 1 < self.attempts:
                    time.sleep(self.backoff * (2**attempt))
        raise ProviderError(str(last))

    def embed_text(self, text: str) -> np.ndarray:
        return self._post([text])[0]

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for start in range(0, len(texts), self.batch_size):
            out.extend(self._post(texts[start : start + self.batch_size]))
        return out

    def null_vector(self) -> np.ndarray:
        return self._null.copy()


class EmbeddingCache:
    """Unbounded in-memory cache keyed by exact cell text."""

    def __init__(self, provider: EmbeddingProvider):
        self.provider = provider
        self._cache: dict[str, np.ndarray] = {}

    def dimension(self) -> int:
        return self.provider.dimension()

    def null_vector(self) -> np.ndarray:
        return self.provider.null_vector()

    def vector(self, text: str) -> np.ndarray:
        hit = self._cache.get(text)
        if hit is None:
            hit = self._cache[text] = self.provider.embed_text(text)
        return hit

    def warm(self, texts: Sequence[str]) -> None:
        missing = sorted({t for t in texts if t not in self._cache})
        if missing:
            for text, vec in zip(missing, self.provider.embed_batch(missing)):
                self._cache[text] = vec

    def __len__(self) -> int:
        return len(self._cache)


@dataclass(frozen=True)
class TupleEmbedding:
    """Per-attribute vectors (m, d_k) plus the tuple's null mask."""

    attr_vecs: np.ndarray
    mask: MaskVector


@dataclass(frozen=True)
class TableEmbedding:
    """Stacked tuple embeddings: vecs (n, m, d_k), mask_bits (n, m) in {0, 1}."""

    vecs: np.ndarray
    mask_bits: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.vecs.shape[0]

    def tuple_embedding(self, row_id: int) -> TupleEmbedding:
        return TupleEmbedding(
            self.vecs[row_id], MaskVector(tuple(int(b) for b in self.mask_bits[row_id]))
        )


def embed_value(cache: EmbeddingCache, value: Value) -> np.ndarray:
    if value.is_null:
        return cache.null_vector()
    return cache.vector(value.text)


def embed_row(cache: EmbeddingCache, row: Row) -> TupleEmbedding:
    vecs = np.stack([embed_value(cache, c) for c in row.cells])
    return TupleEmbedding(vecs, mask_vector(row.cells))


def embed_table(cache: EmbeddingCache, table: Table) -> TableEmbedding:
    """Embed every row, batching unique texts through the provider once."""
    cache.warm([c.text for cells in table.rows for c in cells if not c.is_null])
    n, m, d = table.n_rows, table.n_attrs, cache.dimension()
    vecs = np.empty((n, m, d))
    bits = np.empty((n, m))
    null_vec = cache.null_vector()
    for i, cells in enumerate(table.rows):
        for j, c in enumerate(cells):
            if c.is_null:
                vecs[i, j] = null_vec
                bits[i, j] = 0.0
            else:
                vecs[i, j] = cache.vector(c.text)
                bits[i, j] = 1.0
    return TableEmbedding(vecs, bits)
