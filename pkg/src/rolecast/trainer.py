"""Incremental segment-by-segment training over instance shards.

One checkpoint is recorded after each segment; the metrics log keeps one row
per checkpoint (mean loss/accuracy over a fixed-size window of recent
training batches). Reruns with identical seeds, config, and data produce
byte-identical checkpoints and logs.
"""

from __future__ import annotations

import csv
import hashlib
import struct
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import model
from .embed import EmbeddingStore, MissingKeyError, lookup
from .instances import InstanceShard, PairTable


class TrainerError(Exception):
    """Bad training inputs (empty segments, unresolvable embeddings)."""


@dataclass(frozen=True)
class TrainParams:
    batch_size: int = 1024
    epochs_per_segment: int = 1
    metrics_window: int = 512
    adam: model.AdamParams = model.AdamParams()


class BatchSource:
    """Materializes instance records into concatenated embedding vectors.

    Span vectors are gathered into one dense matrix so a batch becomes four
    fancy-indexed row gathers plus a horizontal stack.
    """

    def __init__(self, store: EmbeddingStore, table: PairTable):
        self.dim = store.dim
        row_of: dict[str, int] = {}
        rows: list[np.ndarray] = []
        pred_rows = np.empty(len(table), dtype=np.int64)
        elem_rows = np.empty(len(table), dtype=np.int64)
        for p in table.pairs:
            for key, dest in ((p.predicate_key, pred_rows), (p.element_key, elem_rows)):
                canonical = key.canonical()
                if canonical not in row_of:
                    try:
                        rows.append(lookup(store, key))
                    except MissingKeyError as exc:
                        raise TrainerError(
                            f"pair {p.pair_id}: {exc.args[0]}"
                        ) from exc
                    row_of[canonical] = len(rows) - 1
                dest[p.pair_id] = row_of[canonical]
        self.matrix = np.vstack(rows) if rows else np.empty((0, self.dim), dtype=np.float32)
        self.pred_rows = pred_rows
        self.elem_rows = elem_rows

    @property
    def vector_dim(self) -> int:
        return 4 * self.dim

    def vectors(self, instances: np.ndarray) -> np.ndarray:
        """Instance records -> (n, 4*dim) matrix, source halves first."""
        src = instances["src"].astype(np.int64)
        tgt = instances["tgt"].astype(np.int64)
        return np.hstack(
            [
                self.matrix[self.pred_rows[src]],
                self.matrix[self.elem_rows[src]],
                self.matrix[self.pred_rows[tgt]],
                self.matrix[self.elem_rows[tgt]],
            ]
        )


def _dropout_seed(seed: int, segment: int, epoch: int, batch: int) -> int:
    digest = hashlib.sha256(struct.pack("<qqqq", seed, segment, epoch, batch)).digest()
    return int.from_bytes(digest[:8], "little")


def train_segments(
    shards: Sequence[InstanceShard],
    source: BatchSource,
    config: model.NetworkConfig,
    params: TrainParams = TrainParams(),
    resume_from: Optional[model.NetworkCheckpoint] = None,
) -> tuple[list[model.NetworkCheckpoint], list[dict]]:
    """Train sequentially over segments; one checkpoint and metrics row per segment.

    `resume_from` continues from a saved checkpoint at its next segment and
    reproduces the uninterrupted trajectory exactly.
    """
    if resume_from is not None:
        ckpt = resume_from.clone()
        start = ckpt.segment_index + 1
    else:
        ckpt = model.init_checkpoint(config)
        start = 0

    checkpoints: list[model.NetworkCheckpoint] = []
    metrics: list[dict] = []
    for sh in shards:
        if sh.shard_index < start:
            continue
        if len(sh.instances) == 0:
            raise TrainerError(f"segment {sh.shard_index} is empty")
        # window resets per segment so a resumed run logs identically; only
        # batches that can survive the window get the extra metrics forward
        window: deque = deque(maxlen=params.metrics_window)
        per_epoch = -(-len(sh.instances) // params.batch_size)
        total_batches = params.epochs_per_segment * per_epoch
        counter = 0
        for epoch in range(params.epochs_per_segment):
            for b, lo in enumerate(range(0, len(sh.instances), params.batch_size)):
                batch = sh.instances[lo : lo + params.batch_size]
                x = source.vectors(batch)
                y = batch["label"].astype(np.int64)
                seed = _dropout_seed(config.seed, sh.shard_index, epoch, b)
                loss, grad_w, grad_b = model.loss_and_grad(
                    ckpt, x, y, train_mode=True, dropout_seed=seed
                )
                model.optimizer_step(ckpt, grad_w, grad_b, params.adam)
                if counter >= total_batches - params.metrics_window:
                    scores, _ = model.forward(ckpt, x, train_mode=False)
                    acc = float((scores.argmax(axis=1) == y).mean())
                    window.append((loss, acc))
                counter += 1
        row = {
            "checkpoint": sh.shard_index,
            "loss": float(np.mean([w[0] for w in window])),
            "accuracy": float(np.mean([w[1] for w in window])),
        }
        ckpt.segment_index = sh.shard_index
        ckpt.history.append(row)
        metrics.append(row)
        checkpoints.append(ckpt.clone())
    return checkpoints, metrics


def binary_accuracy(
    ckpt: model.NetworkCheckpoint,
    instances: np.ndarray,
    source: BatchSource,
    batch_size: int = 4096,
) -> float:
    correct = 0
    for lo in range(0, len(instances), batch_size):
        batch = instances[lo : lo + batch_size]
        preds = model.predict(ckpt, source.vectors(batch))
        correct += int((preds == batch["label"]).sum())
    return correct / max(1, len(instances))


def select_checkpoint(
    checkpoints: Sequence[model.NetworkCheckpoint],
    dev_instances: np.ndarray,
    source: BatchSource,
) -> model.NetworkCheckpoint:
    """Checkpoint with the highest dev binary accuracy; ties go to the latest segment."""
    if not checkpoints:
        raise TrainerError("no checkpoints to select from")
    best = checkpoints[0]
    best_acc = -1.0
    for ckpt in checkpoints:
        acc = binary_accuracy(ckpt, dev_instances, source)
        if acc >= best_acc:
            best, best_acc = ckpt, acc
    return best


def write_metrics_csv(metrics: Sequence[dict], path: Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["checkpoint", "loss", "accuracy"])
        writer.writeheader()
        for row in metrics:
            writer.writerow(row)


def read_metrics_csv(path: Path) -> list[dict]:
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        return [
            {"checkpoint": int(r["checkpoint"]), "loss": float(r["loss"]),
             "accuracy": float(r["accuracy"])}
            for r in csv.DictReader(fh)
        ]
