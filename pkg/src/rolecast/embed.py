"""Span-keyed embedding store and the deterministic test-time embedder.

Store file layout (all integers little-endian):

    magic "AEMB" | version u16 = 1 | dim u32 | count u64
    then `count` records of [key_len u32][key UTF-8][dim x f32]

Keys are canonical "doc|sent|start|end" strings. Vectors are float32 on disk
and in memory; reductions that need precision run in float64.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .corpus import Sentence

MAGIC = b"AEMB"
VERSION = 1
_HEADER = struct.Struct("<4sHIQ")
_KEYLEN = struct.Struct("<I")


class StoreError(Exception):
    """Malformed store file or store/corpus mismatch."""


class MissingKeyError(StoreError, KeyError):
    """Lookup of a span key absent from the store (corpus/store mismatch)."""

    def __init__(self, canonical: str):
        super().__init__(f"no embedding for span key {canonical!r}")
        self.canonical = canonical


@dataclass(frozen=True)
class SpanKey:
    """Address of one span occurrence; canonical form is injective over valid spans."""

    doc_id: str
    sentence_id: str
    start: int
    end: int

    def __post_init__(self):
        if "|" in self.doc_id or "|" in self.sentence_id:
            raise StoreError(f"span key ids may not contain '|': {self.doc_id!r}/{self.sentence_id!r}")

    def canonical(self) -> str:
        return f"{self.doc_id}|{self.sentence_id}|{self.start}|{self.end}"

    @staticmethod
    def parse(canonical: str) -> "SpanKey":
        parts = canonical.split("|")
        if len(parts) != 4:
            raise StoreError(f"bad canonical span key {canonical!r}")
        return SpanKey(parts[0], parts[1], int(parts[2]), int(parts[3]))


class EmbeddingStore:
    """Immutable-after-build map from canonical span keys to float32 vectors."""

    def __init__(self, dim: int):
        if dim < 1:
            raise StoreError(f"store dim must be >= 1, got {dim}")
        self.dim = dim
        self.entries: dict[str, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: SpanKey) -> bool:
        return key.canonical() in self.entries

    def put(self, key: SpanKey, vector: np.ndarray) -> None:
        vec = np.asarray(vector, dtype=np.float32)
        if vec.shape != (self.dim,):
            raise StoreError(f"vector shape {vec.shape} does not match store dim {self.dim}")
        if not np.all(np.isfinite(vec)):
            raise StoreError(f"non-finite components in vector for {key.canonical()!r}")
        vec = vec.copy()
        vec.flags.writeable = False
        self.entries[key.canonical()] = vec


def lookup(store: EmbeddingStore, key: SpanKey) -> np.ndarray:
    """Return the stored vector (read-only view, never a copy)."""
    canonical = key.canonical()
    try:
        return store.entries[canonical]
    except KeyError:
        raise MissingKeyError(canonical) from None


def store_write(store: EmbeddingStore, path: Path) -> None:
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, store.dim, len(store.entries)))
        for canonical, vec in store.entries.items():
            key_bytes = canonical.encode("utf-8")
            fh.write(_KEYLEN.pack(len(key_bytes)))
            fh.write(key_bytes)
            fh.write(vec.astype("<f4", copy=False).tobytes())


def store_read(path: Path) -> EmbeddingStore:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise StoreError(f"{path}: truncated header")
    magic, version, dim, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise StoreError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise StoreError(f"{path}: unsupported version {version}")
    store = EmbeddingStore(dim)
    offset = _HEADER.size
    rec_bytes = 4 * dim
    for i in range(count):
        if offset + _KEYLEN.size > len(data):
            raise StoreError(f"{path}: truncated at record {i}")
        (key_len,) = _KEYLEN.unpack_from(data, offset)
        offset += _KEYLEN.size
        if offset + key_len + rec_bytes > len(data):
            raise StoreError(f"{path}: truncated at record {i}")
        canonical = data[offset : offset + key_len].decode("utf-8")
        offset += key_len
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += rec_bytes
        vec.flags.writeable = False
        store.entries[canonical] = vec
    if offset != len(data):
        raise StoreError(f"{path}: {len(data) - offset} trailing bytes")
    return store


# --- deterministic embedder -------------------------------------------------


def deterministic_embed(text: str, dim: int, seed: int) -> np.ndarray:
    """Unit-norm float32 vector derived purely from (text, dim, seed).

    Components come from counter-mode SHA-256 mapped to uniforms in [-1, 1);
    only exactly-rounded IEEE operations are used, so output is identical on
    any platform. Distinct texts collide with negligible probability.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    text_bytes = text.encode("utf-8")
    prefix = (
        b"rolecast-detemb-v1"
        + struct.pack("<q", seed)
        + struct.pack("<I", len(text_bytes))
        + text_bytes
    )
    n_blocks = (dim + 3) // 4  # 4 uint64 per digest
    raw = bytearray()
    for block in range(n_blocks):
        raw += hashlib.sha256(prefix + struct.pack("<I", block)).digest()
    words = np.frombuffer(bytes(raw), dtype="<u8")[:dim]
    # top 53 bits -> [0,1) -> [-1,1); multiplies and adds are exact in IEEE
    unit = (words >> np.uint64(11)).astype(np.float64) * 2.0**-53
    vec = unit * 2.0 - 1.0
    norm = float(np.sqrt(np.dot(vec, vec)))
    if norm == 0.0:  # astronomically unlikely, but keep the contract total
        vec = np.zeros(dim)
        vec[0] = 1.0
        norm = 1.0
    return (vec / norm).astype(np.float32)


def build_deterministic_store(
    corpora: Iterable[Iterable[Sentence]], dim: int, seed: int
) -> EmbeddingStore:
    """Store covering every trigger and spanned element, embedding surface text only."""
    store = EmbeddingStore(dim)
    for corpus in corpora:
        for s in corpus:
            for a in s.annotations:
                spans = [a.trigger] + [e.span for e in a.elements if e.span is not None]
                for span in spans:
                    key = SpanKey(s.doc_id, s.sentence_id, span.start, span.end)
                    if key not in store:
                        store.put(key, deterministic_embed(span.text, dim, seed))
    return store


def build_instance_vector(store: EmbeddingStore, src_pair, tgt_pair) -> np.ndarray:
    """Concatenate [src predicate | src element | tgt predicate | tgt element]."""
    return np.concatenate(
        [
            lookup(store, src_pair.predicate_key),
            lookup(store, src_pair.element_key),
            lookup(store, tgt_pair.predicate_key),
            lookup(store, tgt_pair.element_key),
        ]
    )
