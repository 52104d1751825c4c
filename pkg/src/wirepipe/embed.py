"""Embedding providers and vector math.

The baseline embedder is a deterministic hashed character n-gram encoder:
no model weights, no randomness, bit-identical output across processes and
platforms.  Neural vectors enter the pipeline through the ``file:`` provider
instead, precomputed in the embedding interchange format.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

import numpy as np

from .corpus import normalize_tokens
from .ingest import read_embeddings

# Rolling-hash constants, fixed forever for reproducibility.
HASH_PRIME = 2147483647        # 2^31 - 1
HASH_BASE = 1000003
HASH_SEED = 0x9E3779B9


class EmbedError(ValueError):
    pass


class EmptyTextError(EmbedError):
    """Text has no alphabetic tokens, so no embedding is defined."""


class MissingEmbeddingError(EmbedError):
    """A file-backed provider has no vector for a requested id."""


@dataclass(frozen=True)
class EmbedConfig:
    dim: int = 1024
    char_ngram_range: tuple[int, int] = (3, 5)

    def __post_init__(self):
        if self.dim < 64 or self.dim & (self.dim - 1):
            raise EmbedError(f"dim must be a power of two >= 64, got {self.dim}")
        lo, hi = self.char_ngram_range
        if not 1 <= lo <= hi:
            raise EmbedError(f"bad char_ngram_range {self.char_ngram_range}")


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; for unit vectors this is the dot product."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise EmbedError(f"dim mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise EmbedError("cosine undefined for zero vector")
    return float(np.dot(u, v) / (nu * nv))


def _ngram_hashes(codes: np.ndarray, n: int) -> np.ndarray:
    """Rolling polynomial hash of every length-n window, mod HASH_PRIME.

    Intermediate products stay below 2^52, so uint64 arithmetic is exact.
    """
    count = len(codes) - n + 1
    h = np.full(count, (HASH_SEED + n) % HASH_PRIME, dtype=np.uint64)
    for j in range(n):
        h = (h * np.uint64(HASH_BASE) + codes[j : j + count]) % np.uint64(HASH_PRIME)
    return h


def hashed_tfidf_embed(text: str, config: EmbedConfig = EmbedConfig()) -> np.ndarray:
    """Embed one text as L2-normalized log-scaled hashed char n-gram counts."""
    tokens = normalize_tokens(text)
    if not tokens:
        raise EmptyTextError("empty text")
    joined = " ".join(tokens)
    codes = np.frombuffer(joined.encode("utf-32-le"), dtype="<u4").astype(np.uint64)
    # Code points exceed HASH_PRIME never (max 0x10FFFF), so no pre-reduction.
    counts = np.zeros(config.dim, dtype=np.float64)
    lo, hi = config.char_ngram_range
    any_gram = False
    for n in range(lo, hi + 1):
        if len(codes) < n:
            break
        any_gram = True
        buckets = _ngram_hashes(codes, n) % np.uint64(config.dim)
        counts += np.bincount(buckets.astype(np.int64), minlength=config.dim)
    if not any_gram:
        # Token run shorter than the smallest n-gram: hash it whole.
        buckets = _ngram_hashes(codes, len(codes)) % np.uint64(config.dim)
        counts += np.bincount(buckets.astype(np.int64), minlength=config.dim)
    vec = np.log1p(counts)
    norm = np.linalg.norm(vec)
    return (vec / norm).astype(np.float32)


def decorate_mention(context: str, span: tuple[int, int], max_tokens: int = 256) -> str:
    """Wrap the inclusive token ``span`` of ``context`` in ``[M] ... [\\M]`` markers.

    Output is single-space joined and capped at ``max_tokens`` tokens total,
    markers included, with the window centered on the span.  The span itself
    is only shortened when it alone exceeds the cap.
    """
    tokens = context.split()
    start, end = span
    if not (0 <= start <= end < len(tokens)):
        raise EmbedError(f"span {span} out of bounds for {len(tokens)} tokens")

    budget = max_tokens - 2
    span_tokens = tokens[start : end + 1]
    if len(span_tokens) > budget:
        span_tokens = span_tokens[:budget]
    rem = budget - len(span_tokens)
    left_avail, right_avail = start, len(tokens) - 1 - end
    left_take = min(left_avail, rem // 2)
    right_take = min(right_avail, rem - left_take)
    left_take = min(left_avail, rem - right_take)
    left = tokens[start - left_take : start] if left_take else []
    right = tokens[end + 1 : end + 1 + right_take]
    return " ".join(left + ["[M]"] + span_tokens + ["[\\M]"] + right)


class EmbeddingProvider(Protocol):
    """Maps item ids to vectors; safe to call from many workers at once."""

    dim: int

    def embed_many(self, items: Mapping[str, str]) -> dict[str, np.ndarray]:
        ...


class BaselineProvider:
    """Deterministic in-process provider backed by :func:`hashed_tfidf_embed`."""

    def __init__(self, config: EmbedConfig = EmbedConfig()):
        self.config = config
        self.dim = config.dim

    def embed_many(self, items: Mapping[str, str]) -> dict[str, np.ndarray]:
        return {key: hashed_tfidf_embed(text, self.config) for key, text in items.items()}


class FileProvider:
    """Precomputed vectors from an embedding interchange file; texts are ignored."""

    def __init__(self, path: str):
        self._vectors = read_embeddings(path)
        if not self._vectors:
            raise EmbedError(f"embedding file {path} holds no vectors")
        self.dim = len(next(iter(self._vectors.values())))
        self.path = path

    def embed_many(self, items: Mapping[str, str]) -> dict[str, np.ndarray]:
        out = {}
        for key in items:
            vec = self._vectors.get(key)
            if vec is None:
                raise MissingEmbeddingError(f"no vector for {key!r} in {self.path}")
            out[key] = vec
        return out


def make_provider(spec: str, config: EmbedConfig = EmbedConfig()) -> EmbeddingProvider:
    """Build a provider from its name: ``baseline`` or ``file:<path>``."""
    if spec == "baseline":
        return BaselineProvider(config)
    if spec.startswith("file:"):
        return FileProvider(spec[len("file:"):])
    raise EmbedError(f"unknown embedding provider {spec!r}")
