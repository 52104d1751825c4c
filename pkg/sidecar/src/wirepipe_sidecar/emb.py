"""The binary embedding interchange format.

Layout: magic b"NWEMB1\\n" | u32-le dim | u8 normalized flag | u64-le count |
per record: u16-le id byte length, id UTF-8 bytes, dim x f32-le values.
Records are sorted by id so equal inputs give byte-identical files.
"""

import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from . import SidecarError

MAGIC = b"NWEMB1\n"


def write_embeddings(
    entries: Mapping[str, np.ndarray],
    dim: int,
    path: str | Path,
    *,
    normalized: bool = True,
) -> None:
    path = Path(path)
    ids = sorted(entries)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IBQ", dim, 1 if normalized else 0, len(ids)))
        for key in ids:
            vec = np.asarray(entries[key], dtype=np.float32)
            if vec.shape != (dim,):
                raise SidecarError(
                    "write-output",
                    f"vector for {key!r} has shape {vec.shape}, expected ({dim},)",
                )
            if normalized:
                norm = float(np.linalg.norm(vec.astype(np.float64)))
                if abs(norm - 1.0) > 1e-4:
                    raise SidecarError(
                        "write-output",
                        f"vector for {key!r} has norm {norm:.6f}, expected 1 +/- 1e-4",
                    )
            key_bytes = key.encode("utf-8")
            if len(key_bytes) > 0xFFFF:
                raise SidecarError("write-output", f"id too long: {key[:40]!r}...")
            fh.write(struct.pack("<H", len(key_bytes)))
            fh.write(key_bytes)
            fh.write(vec.tobytes())


def read_embeddings(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise SidecarError("read-input", f"cannot read {path}: {exc}") from exc
    if data[: len(MAGIC)] != MAGIC:
        raise SidecarError("read-input", f"{path}: bad magic at offset 0")
    off = len(MAGIC)
    try:
        dim, _normalized, count = struct.unpack_from("<IBQ", data, off)
        off += struct.calcsize("<IBQ")
        out: dict[str, np.ndarray] = {}
        for _ in range(count):
            (id_len,) = struct.unpack_from("<H", data, off)
            off += 2
            key = data[off : off + id_len].decode("utf-8")
            off += id_len
            vec = np.frombuffer(data, dtype="<f4", count=dim, offset=off).copy()
            off += 4 * dim
            out[key] = vec
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise SidecarError("read-input", f"{path}: truncated or corrupt at offset {off}") from exc
    if off != len(data):
        raise SidecarError("read-input", f"{path}: {len(data) - off} trailing bytes")
    return out
