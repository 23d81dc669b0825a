"""Predicate-argument pairs and labeled analogy instances.

Instance collections are numpy structured arrays of (src pair_id u32,
tgt pair_id u32, label u8), which keeps the millions of instances built from
a full fulltext corpus in memory as 9-byte records. Shard files serialize the
same records behind a versioned header:

    magic "ASHD" | version u16 = 1 | shard_index u32 | count u64 | records

The pair table sidecar is JSONL, one pair per line:

    {"pair_id": ..., "frame": ..., "role": ...,
     "predicate": "doc|sent|start|end", "element": "doc|sent|start|end"}
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Sentence
from .embed import SpanKey

INSTANCE_DTYPE = np.dtype([("src", "<u4"), ("tgt", "<u4"), ("label", "u1")])

SHARD_MAGIC = b"ASHD"
SHARD_VERSION = 1
_SHARD_HEADER = struct.Struct("<4sHIQ")


class InstanceError(Exception):
    """Degenerate or inconsistent instance data."""


@dataclass(frozen=True)
class PredicateArgumentPair:
    """One (predicate span, element span) drawn from a single annotation."""

    pair_id: int
    frame_name: str
    predicate_key: SpanKey
    element_key: SpanKey
    role_name: str  # used for labeling and transfer, never as a model feature


@dataclass(frozen=True)
class AnalogyInstance:
    src: int
    tgt: int
    label: int


@dataclass
class InstanceShard:
    shard_index: int
    instances: np.ndarray  # INSTANCE_DTYPE records


class PairTable:
    """Dense pair_id -> pair mapping plus a frame index, in corpus order."""

    def __init__(self, pairs: Sequence[PredicateArgumentPair]):
        self.pairs = list(pairs)
        for i, p in enumerate(self.pairs):
            if p.pair_id != i:
                raise InstanceError(f"pair_id {p.pair_id} at position {i}: ids must be dense")
        self.by_frame: dict[str, list[int]] = {}
        for p in self.pairs:
            self.by_frame.setdefault(p.frame_name, []).append(p.pair_id)

    def __len__(self) -> int:
        return len(self.pairs)

    def frame_group(self, frame_name: str) -> list[PredicateArgumentPair]:
        return [self.pairs[i] for i in self.by_frame.get(frame_name, [])]

    def roles(self, ids: Iterable[int]) -> list[str]:
        return [self.pairs[i].role_name for i in ids]


def collect_pairs(corpus: Iterable[Sentence]) -> PairTable:
    """One pair per (annotation, spanned element); NI elements carry no span and are skipped."""
    pairs = []
    for s in corpus:
        for a in s.annotations:
            pred_key = SpanKey(s.doc_id, s.sentence_id, a.trigger.start, a.trigger.end)
            for e in a.elements:
                if e.span is None:
                    continue
                pairs.append(
                    PredicateArgumentPair(
                        pair_id=len(pairs),
                        frame_name=a.frame_name,
                        predicate_key=pred_key,
                        element_key=SpanKey(s.doc_id, s.sentence_id, e.span.start, e.span.end),
                        role_name=e.role_name,
                    )
                )
    return PairTable(pairs)


def build_instances(
    frame_group: Sequence[PredicateArgumentPair], include_self: bool = True
) -> np.ndarray:
    """Ordered Cartesian product of a frame's pairs, labeled by role equality.

    Self-instances (src == tgt) are part of the product; `include_self=False`
    drops them for ablations.
    """
    frames = {p.frame_name for p in frame_group}
    if len(frames) > 1:
        raise InstanceError(f"pairs from multiple frames in one group: {sorted(frames)}")
    ids = np.array([p.pair_id for p in frame_group], dtype=np.uint32)
    role_index = {r: i for i, r in enumerate(sorted({p.role_name for p in frame_group}))}
    roles = np.array([role_index[p.role_name] for p in frame_group], dtype=np.int64)
    n = len(ids)
    src = np.repeat(ids, n)
    tgt = np.tile(ids, n)
    labels = (np.repeat(roles, n) == np.tile(roles, n)).astype(np.uint8)
    out = np.empty(n * n, dtype=INSTANCE_DTYPE)
    out["src"] = src
    out["tgt"] = tgt
    out["label"] = labels
    if not include_self:
        out = out[out["src"] != out["tgt"]]
    return out


def build_all_instances(table: PairTable, include_self: bool = True) -> np.ndarray:
    """Union of per-frame instance sets, frames in first-appearance order."""
    parts = [
        build_instances(table.frame_group(f), include_self=include_self)
        for f in table.by_frame
    ]
    if not parts:
        return np.empty(0, dtype=INSTANCE_DTYPE)
    return np.concatenate(parts)


def instance_counts(instances: np.ndarray) -> dict:
    """Totals with and without self-instances, for reporting."""
    self_mask = instances["src"] == instances["tgt"]
    pos = instances["label"] == 1
    return {
        "total": int(len(instances)),
        "positive": int(pos.sum()),
        "negative": int(len(instances) - pos.sum()),
        "total_no_self": int((~self_mask).sum()),
        "positive_no_self": int((pos & ~self_mask).sum()),
        "negative_no_self": int((~pos & ~self_mask).sum()),
    }


def balance(instances: np.ndarray, seed: int) -> np.ndarray:
    """Uniformly downsample the majority class to the minority count, without replacement."""
    pos_idx = np.flatnonzero(instances["label"] == 1)
    neg_idx = np.flatnonzero(instances["label"] == 0)
    if len(pos_idx) == 0 or len(neg_idx) == 0:
        raise InstanceError(
            f"cannot balance: {len(pos_idx)} positive / {len(neg_idx)} negative instances"
        )
    if len(pos_idx) == len(neg_idx):
        return instances.copy()
    minority, majority = sorted([pos_idx, neg_idx], key=len)
    rng = np.random.Generator(np.random.PCG64(seed))
    kept = rng.choice(majority, size=len(minority), replace=False)
    keep = np.sort(np.concatenate([minority, kept]))  # preserve original order
    return instances[keep]


def shard(instances: np.ndarray, n_shards: int, seed: int) -> list[InstanceShard]:
    """Global shuffle by seed, then block split into shards whose sizes differ by at most 1."""
    if n_shards < 1:
        raise InstanceError(f"n_shards must be >= 1, got {n_shards}")
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(len(instances))
    shuffled = instances[order]
    base, extra = divmod(len(instances), n_shards)
    shards = []
    offset = 0
    for i in range(n_shards):
        size = base + (1 if i < extra else 0)
        shards.append(InstanceShard(shard_index=i, instances=shuffled[offset : offset + size]))
        offset += size
    return shards


# --- serialization ----------------------------------------------------------


def write_shard(sh: InstanceShard, path: Path) -> None:
    with Path(path).open("wb") as fh:
        fh.write(_SHARD_HEADER.pack(SHARD_MAGIC, SHARD_VERSION, sh.shard_index, len(sh.instances)))
        fh.write(np.ascontiguousarray(sh.instances).tobytes())


def read_shard(path: Path) -> InstanceShard:
    data = Path(path).read_bytes()
    if len(data) < _SHARD_HEADER.size:
        raise InstanceError(f"{path}: truncated header")
    magic, version, index, count = _SHARD_HEADER.unpack_from(data, 0)
    if magic != SHARD_MAGIC:
        raise InstanceError(f"{path}: bad magic {magic!r}")
    if version != SHARD_VERSION:
        raise InstanceError(f"{path}: unsupported version {version}")
    expected = _SHARD_HEADER.size + count * INSTANCE_DTYPE.itemsize
    if len(data) != expected:
        raise InstanceError(f"{path}: expected {expected} bytes, found {len(data)}")
    records = np.frombuffer(data, dtype=INSTANCE_DTYPE, count=count, offset=_SHARD_HEADER.size)
    return InstanceShard(shard_index=index, instances=records.copy())


def write_pair_table(table: PairTable, path: Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for p in table.pairs:
            fh.write(
                json.dumps(
                    {
                        "pair_id": p.pair_id,
                        "frame": p.frame_name,
                        "role": p.role_name,
                        "predicate": p.predicate_key.canonical(),
                        "element": p.element_key.canonical(),
                    },
                    ensure_ascii=False,
                    separators=(",", ":"),
                )
            )
            fh.write("\n")


def read_pair_table(path: Path) -> PairTable:
    pairs = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                pairs.append(
                    PredicateArgumentPair(
                        pair_id=int(obj["pair_id"]),
                        frame_name=obj["frame"],
                        predicate_key=SpanKey.parse(obj["predicate"]),
                        element_key=SpanKey.parse(obj["element"]),
                        role_name=obj["role"],
                    )
                )
            except (KeyError, ValueError, json.JSONDecodeError) as exc:
                raise InstanceError(f"{path}: line {lineno}: {exc}") from exc
    return PairTable(pairs)
