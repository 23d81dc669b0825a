"""Writer for the AEMB span-embedding store format.

Layout (little-endian): magic "AEMB", version u16 = 1, dim u32, count u64,
then `count` records of [key_len u32][key UTF-8][dim x f32]. Keys are
canonical "doc|sent|start|end" strings.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable

import numpy as np

MAGIC = b"AEMB"
VERSION = 1
_HEADER = struct.Struct("<4sHIQ")
_KEYLEN = struct.Struct("<I")


def span_key(doc_id: str, sentence_id: str, start: int, end: int) -> str:
    if "|" in doc_id or "|" in sentence_id:
        raise ValueError(f"ids may not contain '|': {doc_id!r}/{sentence_id!r}")
    return f"{doc_id}|{sentence_id}|{start}|{end}"


def write_store(path: Path, dim: int, entries: Iterable[tuple[str, np.ndarray]]) -> int:
    """Write entries in iteration order; returns the record count."""
    items = list(entries)
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, dim, len(items)))
        for key, vec in items:
            arr = np.asarray(vec, dtype="<f4")
            if arr.shape != (dim,):
                raise ValueError(f"vector for {key!r} has shape {arr.shape}, expected ({dim},)")
            key_bytes = key.encode("utf-8")
            fh.write(_KEYLEN.pack(len(key_bytes)))
            fh.write(key_bytes)
            fh.write(arr.tobytes())
    return len(items)
