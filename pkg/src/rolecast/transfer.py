"""Analogical-transfer decoding: assign each target element the role whose
sampled reference pairs the binary model most often judges analogous.

For a target (p_t, e_t) of frame f, up to n_e source pairs are sampled per
role of f from the reference bank; instances [src | tgt] are scored by the
binary classifier, each role's score is its count of positive verdicts, and
the argmax role wins. Ties: higher positive-probability mass, then (for
all-zero counts with equal mass) the role with more bank entries, then
lexicographic role name.

Decoder output is JSONL, one target per line:

    {"doc_id": ..., "sentence_id": ..., "frame": ...,
     "element": {"start": ..., "end": ...}, "gold_role": ...,
     "predicted_role": ... | null, "unclassifiable": bool,
     "scores": [{"role": ..., "positive_count": ..., "prob_mass": ...,
                 "n_sampled": ...}]}
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

from . import model
from .corpus import Sentence
from .embed import EmbeddingStore, SpanKey, lookup
from .instances import PredicateArgumentPair, collect_pairs


class TransferError(Exception):
    pass


class UnclassifiableError(TransferError):
    """Target frame has no reference bank entry (no-training-data condition)."""


@dataclass(frozen=True)
class RoleScore:
    role_name: str
    positive_count: int
    positive_prob_mass: float
    n_sampled: int


@dataclass
class ReferenceBank:
    """frame -> role -> source pairs, built exclusively from the source corpus."""

    by_frame: dict[str, dict[str, list[PredicateArgumentPair]]] = field(default_factory=dict)

    def add(self, pair: PredicateArgumentPair) -> None:
        self.by_frame.setdefault(pair.frame_name, {}).setdefault(pair.role_name, []).append(pair)

    def frames(self) -> list[str]:
        return list(self.by_frame)

    def roles(self, frame: str) -> list[str]:
        return list(self.by_frame.get(frame, {}))

    def entries(self, frame: str, role: str) -> list[PredicateArgumentPair]:
        return self.by_frame.get(frame, {}).get(role, [])


def build_bank(source_corpus: Iterable[Sentence]) -> ReferenceBank:
    bank = ReferenceBank()
    for pair in collect_pairs(source_corpus).pairs:
        bank.add(pair)
    return bank


def recommended_n_e(bank: ReferenceBank, coverage: float = 0.9) -> int:
    """Largest k such that at least `coverage` of all (frame, role) groups have >= k pairs."""
    counts = sorted(
        len(pairs) for roles in bank.by_frame.values() for pairs in roles.values()
    )
    if not counts:
        raise TransferError("empty reference bank")
    n = len(counts)
    # at least m groups must have >= k pairs; the largest such k is the
    # m-th largest count, i.e. counts[n - m] in ascending order
    m = max(1, math.ceil(coverage * n - 1e-9))
    return counts[n - m]


def _stable_int(*parts: object) -> int:
    payload = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")


def target_seed(global_seed: int, target_key: SpanKey) -> int:
    """Per-target sampling seed: reproducible, uncorrelated across targets."""
    return _stable_int("target", global_seed, target_key.canonical())


def sample_sources(
    bank: ReferenceBank, frame: str, role: str, n_e: int, seed: int
) -> list[PredicateArgumentPair]:
    """Uniform sample without replacement of min(n_e, available) pairs; [] if the role is absent."""
    available = bank.entries(frame, role)
    if not available:
        log.info("no source pairs for role %r of frame %r; it cannot win", role, frame)
        return []
    if len(available) <= n_e:
        return list(available)
    rng = np.random.Generator(np.random.PCG64(seed))
    picked = rng.choice(len(available), size=n_e, replace=False)
    return [available[i] for i in picked]


class CheckpointClassifier:
    """Binary verdicts + positive-class probabilities from a trained network."""

    def __init__(self, ckpt: model.NetworkCheckpoint):
        self.ckpt = ckpt

    def classify(self, vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        probs = model.predict_proba(self.ckpt, vectors)
        return (probs[:, 1] > probs[:, 0]).astype(np.uint8), probs[:, 1]


def classify_element(
    classifier,
    store: EmbeddingStore,
    bank: ReferenceBank,
    target_pair: PredicateArgumentPair,
    n_e: int,
    seed: int,
) -> tuple[str, list[RoleScore]]:
    """Score every role of the target's frame and return (argmax role, all scores)."""
    frame = target_pair.frame_name
    roles = bank.roles(frame)
    if not roles:
        raise UnclassifiableError(f"frame {frame!r} has no reference bank entries")

    tgt_vec = np.concatenate(
        [lookup(store, target_pair.predicate_key), lookup(store, target_pair.element_key)]
    )
    samples: list[tuple[str, list[PredicateArgumentPair]]] = []
    blocks = []
    for role in roles:
        picked = sample_sources(bank, frame, role, n_e, _stable_int("role", seed, role))
        samples.append((role, picked))
        for src in picked:
            blocks.append(
                np.concatenate(
                    [lookup(store, src.predicate_key), lookup(store, src.element_key), tgt_vec]
                )
            )
    scores: list[RoleScore] = []
    labels = np.empty(0, dtype=np.uint8)
    pos_probs = np.empty(0)
    if blocks:
        labels, pos_probs = classifier.classify(np.vstack(blocks))
    offset = 0
    for role, picked in samples:
        k = len(picked)
        scores.append(
            RoleScore(
                role_name=role,
                positive_count=int(labels[offset : offset + k].sum()) if k else 0,
                positive_prob_mass=float(pos_probs[offset : offset + k].sum()) if k else 0.0,
                n_sampled=k,
            )
        )
        offset += k

    return _argmax_role(scores, bank, frame), scores


def _argmax_role(scores: Sequence[RoleScore], bank: ReferenceBank, frame: str) -> str:
    if all(s.positive_count == 0 for s in scores):
        # fallback: probability mass, then bank support, then role name
        return min(
            scores,
            key=lambda s: (-s.positive_prob_mass, -len(bank.entries(frame, s.role_name)), s.role_name),
        ).role_name
    return min(
        scores, key=lambda s: (-s.positive_count, -s.positive_prob_mass, s.role_name)
    ).role_name


@dataclass
class TargetResult:
    doc_id: str
    sentence_id: str
    frame: str
    element_start: int
    element_end: int
    gold_role: Optional[str]
    predicted_role: Optional[str]
    unclassifiable: bool
    scores: list[RoleScore] = field(default_factory=list)


def decode_corpus(
    classifier,
    store: EmbeddingStore,
    bank: ReferenceBank,
    target_corpus: Iterable[Sentence],
    n_e: int,
    global_seed: int,
) -> list[TargetResult]:
    """Classify every spanned element of the target corpus against the bank."""
    results = []
    for pair in collect_pairs(target_corpus).pairs:
        seed = target_seed(global_seed, pair.element_key)
        try:
            predicted, scores = classify_element(classifier, store, bank, pair, n_e, seed)
            unclassifiable = False
        except UnclassifiableError:
            predicted, scores, unclassifiable = None, [], True
        results.append(
            TargetResult(
                doc_id=pair.element_key.doc_id,
                sentence_id=pair.element_key.sentence_id,
                frame=pair.frame_name,
                element_start=pair.element_key.start,
                element_end=pair.element_key.end,
                gold_role=pair.role_name,
                predicted_role=predicted,
                unclassifiable=unclassifiable,
                scores=scores,
            )
        )
    return results


def write_decoded_jsonl(results: Iterable[TargetResult], path: Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in results:
            obj = {
                "doc_id": r.doc_id,
                "sentence_id": r.sentence_id,
                "frame": r.frame,
                "element": {"start": r.element_start, "end": r.element_end},
                "gold_role": r.gold_role,
                "predicted_role": r.predicted_role,
                "unclassifiable": r.unclassifiable,
                "scores": [
                    {
                        "role": s.role_name,
                        "positive_count": s.positive_count,
                        "prob_mass": s.positive_prob_mass,
                        "n_sampled": s.n_sampled,
                    }
                    for s in r.scores
                ],
            }
            fh.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")


def read_decoded_jsonl(path: Path) -> list[TargetResult]:
    results = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            results.append(
                TargetResult(
                    doc_id=obj["doc_id"],
                    sentence_id=obj["sentence_id"],
                    frame=obj["frame"],
                    element_start=obj["element"]["start"],
                    element_end=obj["element"]["end"],
                    gold_role=obj.get("gold_role"),
                    predicted_role=obj.get("predicted_role"),
                    unclassifiable=bool(obj.get("unclassifiable", False)),
                    scores=[
                        RoleScore(
                            role_name=s["role"],
                            positive_count=s["positive_count"],
                            positive_prob_mass=s["prob_mass"],
                            n_sampled=s["n_sampled"],
                        )
                        for s in obj.get("scores", [])
                    ],
                )
            )
    return results


# --- bank serialization ------------------------------------------------------


def write_bank_json(bank: ReferenceBank, path: Path) -> None:
    obj = {
        frame: {
            role: [
                {"predicate": p.predicate_key.canonical(), "element": p.element_key.canonical()}
                for p in pairs
            ]
            for role, pairs in roles.items()
        }
        for frame, roles in bank.by_frame.items()
    }
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump({"version": 1, "frames": obj}, fh, ensure_ascii=False, separators=(",", ":"))


def read_bank_json(path: Path) -> ReferenceBank:
    with Path(path).open("r", encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("version") != 1:
        raise TransferError(f"{path}: unsupported bank version {data.get('version')}")
    bank = ReferenceBank()
    pair_id = 0
    for frame, roles in data["frames"].items():
        for role, pairs in roles.items():
            for p in pairs:
                bank.add(
                    PredicateArgumentPair(
                        pair_id=pair_id,
                        frame_name=frame,
                        predicate_key=SpanKey.parse(p["predicate"]),
                        element_key=SpanKey.parse(p["element"]),
                        role_name=role,
                    )
                )
                pair_id += 1
    return bank
