"""Model loading and batch inference."""

import json
import os
from pathlib import Path

import numpy as np

from . import SidecarError
from .emb import write_embeddings


def read_encode_input(path: str | Path) -> list[tuple[str, str]]:
    """Read (id, text) pairs from encode-input JSONL; ids must be unique."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise SidecarError("read-input", f"cannot read {path}: {exc}") from exc
    pairs: list[tuple[str, str]] = []
    seen: set[str] = set()
    for i, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SidecarError("read-input", f"{path}:{i}: bad JSON: {exc}") from exc
        key, text = row.get("id"), row.get("text")
        if not isinstance(key, str) or not key:
            raise SidecarError("read-input", f"{path}:{i}: missing or empty 'id'")
        if not isinstance(text, str) or not text:
            raise SidecarError("read-input", f"{path}:{i}: missing or empty 'text'")
        if key in seen:
            raise SidecarError("read-input", f"{path}:{i}: duplicate id {key!r}")
        seen.add(key)
        pairs.append((key, text))
    if not pairs:
        raise SidecarError("read-input", f"{path}: no records")
    return pairs


def load_model(model_id: str):
    """Load a sentence-transformers bi-encoder; local paths need no network."""
    # Loading must never reach for a hub when the id is a local checkpoint.
    os.environ.setdefault("HF_HUB_OFFLINE", "1")
    os.environ.setdefault("TOKENIZERS_PARALLELISM", "false")
    from sentence_transformers import SentenceTransformer

    try:
        return SentenceTransformer(model_id, device="cpu")
    except Exception as exc:
        raise SidecarError("load-model", f"cannot load model {model_id!r}: {exc}") from exc


def encode_to_file(
    pairs: list[tuple[str, str]],
    model,
    out_path: str | Path,
    batch_size: int,
) -> int:
    """Encode texts and write one unit-norm vector per id; returns the count."""
    import torch

    if batch_size < 1:
        raise SidecarError("encode", f"batch size must be >= 1, got {batch_size}")
    # Single-threaded inference keeps float reductions order-stable, so a
    # rerun writes byte-identical files.
    torch.set_num_threads(1)
    texts = [text for _, text in pairs]
    try:
        with torch.inference_mode():
            matrix = model.encode(
                texts,
                batch_size=batch_size,
                convert_to_numpy=True,
                normalize_embeddings=True,
                show_progress_bar=False,
            )
    except Exception as exc:
        raise SidecarError("encode", f"inference failed: {exc}") from exc

    matrix = np.asarray(matrix, dtype=np.float32)
    if matrix.ndim != 2 or matrix.shape[0] != len(pairs):
        raise SidecarError("encode", f"model returned shape {matrix.shape} for {len(pairs)} texts")
    norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
    bad = np.flatnonzero(~np.isfinite(norms) | (np.abs(norms - 1.0) > 1e-4))
    if bad.size:
        key = pairs[int(bad[0])][0]
        raise SidecarError(
            "encode",
            f"{bad.size} vectors are not unit-norm (first: {key!r}, norm "
            f"{norms[int(bad[0])]:.6f}); the text may hold no in-vocabulary tokens",
        )
    entries = {key: matrix[i] for i, (key, _) in enumerate(pairs)}
    write_embeddings(entries, matrix.shape[1], out_path, normalized=True)
    return len(entries)
