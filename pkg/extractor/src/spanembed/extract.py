"""Compute contextual embeddings for every annotated span of a JSONL corpus.

Reads the corpus interchange schema (one sentence per line with doc_id,
sentence_id, text, and annotations carrying trigger/element character
offsets), runs a pretrained encoder, pools the final-layer subword states
overlapping each span, and writes one vector per distinct span key.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

from .aemb import span_key, write_store

log = logging.getLogger(__name__)

POOLINGS = ("mean", "first", "max")


class ExtractError(Exception):
    pass


@dataclass
class SentenceSpans:
    doc_id: str
    sentence_id: str
    text: str
    spans: list[tuple[int, int]]


@dataclass
class ExtractReport:
    dim: int = 0
    n_sentences: int = 0
    n_spans: int = 0
    n_written: int = 0
    skipped: list[str] = field(default_factory=list)


def read_corpus_spans(corpus_jsonl: Path) -> list[SentenceSpans]:
    """Collect trigger and spanned-element offsets per sentence, deduplicated."""
    sentences = []
    with Path(corpus_jsonl).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                spans: list[tuple[int, int]] = []
                for ann in obj.get("annotations", []):
                    trigger = ann["trigger"]
                    candidates = [(trigger["start"], trigger["end"])]
                    for el in ann.get("elements", []):
                        if "start" in el and "end" in el:
                            candidates.append((el["start"], el["end"]))
                    for c in candidates:
                        if c not in spans:
                            spans.append(c)
                sentences.append(
                    SentenceSpans(
                        doc_id=obj["doc_id"],
                        sentence_id=obj["sentence_id"],
                        text=obj["text"],
                        spans=spans,
                    )
                )
            except (KeyError, TypeError, json.JSONDecodeError) as exc:
                raise ExtractError(f"{corpus_jsonl}: line {lineno}: {exc}") from exc
    return sentences


class SpanEncoder:
    def __init__(self, model_id: str, pooling: str = "mean", layer: int = -1,
                 max_length: int = 512):
        if pooling not in POOLINGS:
            raise ExtractError(f"pooling must be one of {POOLINGS}, got {pooling!r}")
        self.tokenizer = AutoTokenizer.from_pretrained(model_id, use_fast=True)
        if not self.tokenizer.is_fast:
            raise ExtractError(f"{model_id}: a fast tokenizer (offset mapping) is required")
        self.model = AutoModel.from_pretrained(model_id)
        self.model.eval()
        self.pooling = pooling
        self.layer = layer
        self.max_length = max_length
        self.dim = int(self.model.config.hidden_size)

    @torch.no_grad()
    def encode_batch(self, batch: list[SentenceSpans], report: ExtractReport):
        """Yield (key, vector) for every alignable span in the batch."""
        enc = self.tokenizer(
            [s.text for s in batch],
            return_offsets_mapping=True,
            return_special_tokens_mask=True,
            padding=True,
            truncation=True,
            max_length=self.max_length,
            return_tensors="pt",
        )
        special = enc.pop("special_tokens_mask").bool()
        offsets = enc.pop("offset_mapping")
        outputs = self.model(
            **{k: v for k, v in enc.items()}, output_hidden_states=self.layer != -1
        )
        if self.layer == -1:
            hidden = outputs.last_hidden_state
        else:
            hidden = outputs.hidden_states[self.layer]
        states = hidden.numpy()
        attn = enc["attention_mask"].bool()
        for i, sent in enumerate(batch):
            usable = (~special[i]) & attn[i]
            starts = offsets[i, :, 0].numpy()
            ends = offsets[i, :, 1].numpy()
            for span_start, span_end in sent.spans:
                report.n_spans += 1
                overlap = usable.numpy() & (starts < span_end) & (ends > span_start)
                idx = np.flatnonzero(overlap)
                if idx.size == 0:
                    report.skipped.append(
                        f"{sent.sentence_id}: span [{span_start},{span_end}) "
                        f"aligns with no subword tokens"
                    )
                    continue
                sub = states[i, idx].astype(np.float64)
                if self.pooling == "mean":
                    vec = sub.mean(axis=0)
                elif self.pooling == "first":
                    vec = sub[0]
                else:
                    vec = sub.max(axis=0)
                yield span_key(sent.doc_id, sent.sentence_id, span_start, span_end), vec


def extract(
    corpus_jsonl: Path,
    model_id: str,
    pooling: str,
    output_store: Path,
    layer: int = -1,
    batch_size: int = 16,
    max_length: int = 512,
) -> ExtractReport:
    """Embed every annotated span and write the store; returns a summary report."""
    sentences = read_corpus_spans(corpus_jsonl)
    encoder = SpanEncoder(model_id, pooling=pooling, layer=layer, max_length=max_length)
    report = ExtractReport(dim=encoder.dim, n_sentences=len(sentences))
    entries: dict[str, np.ndarray] = {}
    for lo in range(0, len(sentences), batch_size):
        batch = sentences[lo : lo + batch_size]
        for key, vec in encoder.encode_batch(batch, report):
            if key not in entries:
                entries[key] = vec.astype(np.float32)
    report.n_written = write_store(output_store, encoder.dim, entries.items())
    for message in report.skipped:
        log.warning("skipped: %s", message)
    if report.skipped:
        log.warning("%d span(s) skipped for subword misalignment", len(report.skipped))
    return report
