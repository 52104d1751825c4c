"""Deterministic word-vector checkpoints in sentence-transformers layout.

A checkpoint built here is a real sentence-transformers model directory
(WordEmbeddings -> mean Pooling -> Normalize), so `encode` treats it exactly
like any downloaded bi-encoder.  Vectors are seeded per token, which makes
builds reproducible with no network and no training.
"""

import hashlib
from pathlib import Path
from typing import Mapping

import numpy as np

from . import SidecarError


def token_vector(token: str, dim: int, seed: int) -> np.ndarray:
    """Unit Gaussian vector drawn from a stream keyed by (seed, token)."""
    digest = hashlib.blake2b(
        f"{seed}\x00{token}".encode("utf-8"), digest_size=8
    ).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    vec = rng.standard_normal(dim)
    return vec / np.linalg.norm(vec)


def build_checkpoint(
    vocab_weights: Mapping[str, float],
    out_dir: str | Path,
    *,
    dim: int = 64,
    seed: int = 0,
) -> Path:
    """Write a checkpoint whose token vectors have norm = the token's weight.

    Weighted tokens dominate the mean pool, so upweighting name tokens makes
    mention vectors name-driven rather than boilerplate-driven.
    """
    if not vocab_weights:
        raise SidecarError("build-checkpoint", "empty vocabulary")
    if dim < 2:
        raise SidecarError("build-checkpoint", f"dim must be >= 2, got {dim}")
    for token, weight in vocab_weights.items():
        if not token or token.split() != [token]:
            raise SidecarError("build-checkpoint", f"bad vocab token {token!r}")
        if not weight > 0:
            raise SidecarError("build-checkpoint", f"weight for {token!r} must be > 0")

    from sentence_transformers import SentenceTransformer

    try:  # module layout moved in sentence-transformers 5.x
        from sentence_transformers.sentence_transformer.modules import (
            Normalize,
            Pooling,
            WordEmbeddings,
        )
        from sentence_transformers.sentence_transformer.modules.tokenizer import (
            WhitespaceTokenizer,
        )
    except ImportError:
        from sentence_transformers.models import Normalize, Pooling, WordEmbeddings
        from sentence_transformers.models.tokenizer import WhitespaceTokenizer

    vocab = sorted(vocab_weights)
    weights = np.stack(
        [token_vector(tok, dim, seed) * vocab_weights[tok] for tok in vocab]
    ).astype(np.float32)
    tokenizer = WhitespaceTokenizer(vocab=vocab, stop_words=(), do_lower_case=False)
    modules = [
        WordEmbeddings(tokenizer=tokenizer, embedding_weights=weights, update_embeddings=False),
        Pooling(dim, pooling_mode="mean"),
        Normalize(),
    ]
    out_dir = Path(out_dir)
    SentenceTransformer(modules=modules, device="cpu").save(str(out_dir))
    return out_dir


def read_vocab_file(path: str | Path) -> dict[str, float]:
    """Read `token` or `token<TAB>weight` lines; missing weights default to 1."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise SidecarError("read-input", f"cannot read vocab {path}: {exc}") from exc
    vocab: dict[str, float] = {}
    for i, line in enumerate(lines, 1):
        if not line.strip():
            continue
        parts = line.rstrip("\n").split("\t")
        token = parts[0]
        if len(parts) > 2:
            raise SidecarError("read-input", f"{path}:{i}: expected 'token' or 'token<TAB>weight'")
        try:
            weight = float(parts[1]) if len(parts) == 2 else 1.0
        except ValueError as exc:
            raise SidecarError("read-input", f"{path}:{i}: bad weight {parts[1]!r}") from exc
        if token in vocab:
            raise SidecarError("read-input", f"{path}:{i}: duplicate token {token!r}")
        vocab[token] = weight
    if not vocab:
        raise SidecarError("read-input", f"{path}: empty vocabulary")
    return vocab
